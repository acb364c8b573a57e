#!/usr/bin/env python3
"""Replicate the density-vs-overhead comparison for the accident scenario.

Runs both relay policies (4-hop bound and 60-second freshness bound) over
seven traffic densities, five seeded trials each, and writes the detail and
aggregate CSV plus a per-density comparison to stdout.

Usage: python scripts/overhead_sweep.py [OUT_DIR]
"""

import sys

from vanetim.cli import RunConfig, cmd_sweep

DENSITIES = (19, 39, 59, 79, 99, 119, 139)


def main() -> int:
    out_dir = sys.argv[1] if len(sys.argv) > 1 else "out/overhead"
    config = RunConfig(
        scenario="accident",
        densities=DENSITIES,
        trials=5,
        seed=1,
        out_dir=out_dir,
    )
    return cmd_sweep(config)


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""Replicate the police-attended accident comparison.

Runs the police-attended accident scenario with two official vehicles over
five densities, both relay policies, five seeded trials each.

Usage: python scripts/police_sweep.py [OUT_DIR]
"""

import sys

from vanetim.cli import RunConfig, cmd_sweep

DENSITIES = (21, 51, 81, 111, 131)


def main() -> int:
    out_dir = sys.argv[1] if len(sys.argv) > 1 else "out/police"
    config = RunConfig(
        scenario="accident-police",
        densities=DENSITIES,
        police=2,
        trials=5,
        seed=1,
        out_dir=out_dir,
    )
    return cmd_sweep(config)


if __name__ == "__main__":
    sys.exit(main())

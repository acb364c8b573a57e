#!/usr/bin/env python3
"""Run every catalogue scenario once and print its conformance report.

Usage: python scripts/conformance_all.py [SEED]
"""

import sys

from vanetim.netsim import Engine, TrialSetup
from vanetim.relay import HOP4
from vanetim.scenarios import SCENARIOS, build_scenario, check_conformance, spec_for


def main() -> int:
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 1
    failures = 0
    for name in SCENARIOS:
        script = build_scenario(name)
        setup = TrialSetup(
            script=script, policy=HOP4, vehicles=19, police=script.min_police
        )
        trace, metrics = Engine(setup, seed).run()
        report = check_conformance(trace, spec_for(script))
        print(f"== {name} ({metrics.total} transmissions)")
        print(report.summary())
        failures += not report.passed
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())

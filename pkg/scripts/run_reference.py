"""Run the single-mode reference scenarios and print their checks.

Usage: python3 scripts/run_reference.py [--out results]
"""
import argparse
from pathlib import Path

from cavres.cli import execute, resolve_config

SCENARIOS = ["resonant-pointer", "composite-pointer", "velocity-calibration", "decoherence", "jump-recovery", "damped-marginals"]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results")
    args = parser.parse_args()
    for name in SCENARIOS:
        overrides = {"u": "0.5", "theta_r": "0.4"} if name == "resonant-pointer" else {}
        result, out = execute(resolve_config(name, overrides=overrides), Path(args.out) / name)
        for c in result.checks:
            print(f"{name:16s} {'PASS' if c.passed else 'FAIL'} {c.name} = {c.value:.6g} [{c.low}, {c.high}]")
        print(f"{name:16s} outputs in {out}")


if __name__ == "__main__":
    main()

"""Two-mode reservoir: fidelity trajectory, Bell signal and the cavity lifetime where B_max crosses 2.

The exact two-mode propagators take about half a minute per (Delta, v) setting.
Usage: python3 scripts/twomode_bell_tc.py [--out results] [--dim 10]
"""
import argparse
from pathlib import Path

from cavres.cli import execute, resolve_config


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results")
    parser.add_argument("--dim", default="10")
    args = parser.parse_args()
    for name in ("twomode-bell", "twomode-bell-tc"):
        result, out = execute(resolve_config(name, overrides={"dim_two_mode": args.dim}), Path(args.out) / name)
        for key, val in result.key_numbers.items():
            if not key.startswith("gamma_"):
                print(f"{name:16s} {key} = {val}")
        for c in result.checks:
            print(f"{name:16s} {'PASS' if c.passed else 'FAIL'} {c.name} = {c.value:.6g} [{c.low}, {c.high}]")


if __name__ == "__main__":
    main()

"""Damped steady cat fidelity over velocity, detuning mismatch, window shift and switching time.

Each grid is a resumable sweep; rerunning skips cells already on disk.
Usage: python3 scripts/robustness_sweep.py [--out results/robustness] [--workers 1]
"""
import argparse
from pathlib import Path

from cavres.cli import parse_grid, resolve_config, sweep

GRIDS = {
    "velocity": ["v=66:74:5"],
    "mismatch": ["a1=0.9,1.0,1.1", "a2=0.9,1.0,1.1"],
    "shift": ["shift=-1e-6,-5e-7,0,5e-7,1e-6"],
    "rise": ["rise_time=0,1e-7,2e-7"],
}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results/robustness")
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()
    cfg = resolve_config("robustness")
    for name, spec in GRIDS.items():
        records, out, ran = sweep(cfg, parse_grid(spec), Path(args.out) / name, args.workers)
        print(f"{name}: {len(records)} cells ({ran} computed) -> {out / 'sweep.csv'}")
        for rec in records:
            cell = ", ".join(f"{k}={rec[k]}" for k in spec_keys(spec))
            print(f"  {cell}: F = {rec['cat_fidelity']:.4f}")


def spec_keys(spec):
    return [s.split("=", 1)[0] for s in spec]


if __name__ == "__main__":
    main()

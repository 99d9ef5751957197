"""Command line: ``run``, ``sweep``, ``list-scenarios`` and ``validate-config``.

Parameters not covered by the verb options are passed as ``--key value``
(for example ``--theta-r 0.4``, ``--tc 650ms``, ``--delta0 "2.2 omega0"``).
Exit status is 0 on success, 2 on a configuration error and 3 on a numerical
failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import itertools
import json
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from .config import apply_overrides, load_config
from .errors import CavresError, ConfigError
from .scenarios import SCENARIOS, default_config, run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _versions():
    from . import __version__

    return dict(cavres=__version__, numpy=np.__version__, scipy=scipy.__version__, python=platform.python_version())


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, (np.floating, float)):
        return float(x) if np.isfinite(x) else str(float(x))
    return x


def parse_overrides(tokens):
    """``["--theta-r", "0.4", "--tc=650ms"]`` -> ``{"theta-r": "0.4", "tc": "650ms"}``."""
    out, i = {}, 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--") or len(tok) == 2:
            raise ConfigError(f"unexpected argument {tok!r}", tok)
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise ConfigError("missing value", key)
            val = tokens[i + 1]
            i += 2
        out[key] = val
    return out


def resolve_config(scenario, config_path=None, overrides=None):
    """Scenario defaults, then the config file, then command-line overrides."""
    cfg = default_config(scenario)
    if config_path:
        cfg = load_config(config_path, cfg)
    cfg = apply_overrides(cfg, dict(overrides or {}))
    if cfg.scenario != scenario:
        cfg = apply_overrides(cfg, {"scenario": scenario})
    return cfg


def _write_table(path, records, header, cols=None):
    cols = list(cols or [])
    for rec in records:
        cols += [k for k in rec if k not in cols]
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        writer = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
        writer.writeheader()
        for rec in records:
            writer.writerow({k: repr(float(v)) if isinstance(v, (float, np.floating)) else v for k, v in rec.items()})


def execute(cfg, out_dir=None):
    """Run ``cfg.scenario`` and write its CSV tables, metadata sidecar and check summary.

    Returns the scenario result and the output directory.
    """
    np.random.seed(cfg.seed)
    start = time.perf_counter()
    try:
        result = run_scenario(cfg.scenario, cfg)
    except CavresError as exc:
        raise CavresError(f"scenario {cfg.scenario}: {type(exc).__name__}: {exc}") from exc
    wall = time.perf_counter() - start
    out = Path(out_dir or Path(cfg.output_dir) / cfg.scenario)
    out.mkdir(parents=True, exist_ok=True)
    config_json = json.dumps(_jsonable(cfg.to_dict()), sort_keys=True)
    header = [f"config: {config_json}", f"seed: {cfg.seed}"]
    for name, records in result.tables.items():
        _write_table(out / f"{name}.csv", records, header)
    checks = [dict(name=c.name, value=c.value, low=c.low, high=c.high, passed=c.passed) for c in result.checks]
    _write_table(out / "summary.csv", checks, header, cols=["name", "value", "low", "high", "passed"])
    meta = dict(scenario=cfg.scenario, config=cfg.to_dict(), seed=cfg.seed, versions=_versions(), wall_time_s=wall,
                key_numbers=result.key_numbers, checks=checks, tables=sorted(result.tables))
    (out / "meta.json").write_text(json.dumps(_jsonable(meta), indent=2, sort_keys=True))
    return result, out


# ------------------------------------------------------------------- sweep


def parse_grid(specs):
    """``["v=66:74:5", "a1=0.9,1.1"]`` -> list of override dicts (Cartesian product).

    ``start:stop:num`` gives ``num`` evenly spaced values including both ends;
    a comma list is taken verbatim (units allowed).
    """
    if not specs:
        raise ConfigError("a sweep needs at least one --grid key=values", "grid")
    axes = []
    for spec in specs:
        if "=" not in spec:
            raise ConfigError(f"expected key=values, got {spec!r}", "grid")
        key, vals = spec.split("=", 1)
        parts = vals.split(":")
        if len(parts) == 3:
            try:
                values = [repr(float(x)) for x in np.linspace(float(parts[0]), float(parts[1]), int(parts[2]))]
            except ValueError:
                raise ConfigError(f"bad range {vals!r}", key) from None
        else:
            values = [x.strip() for x in vals.split(",") if x.strip()]
        if not values:
            raise ConfigError("empty value list", key)
        axes.append([(key, v) for v in values])
    return [dict(cell) for cell in itertools.product(*axes)]


def _cell_id(cell):
    text = json.dumps(cell, sort_keys=True)
    return hashlib.sha1(text.encode()).hexdigest()[:12]


def _run_cell(args):
    cfg, cell, path = args
    cfg = apply_overrides(cfg, cell)
    result = run_scenario(cfg.scenario, cfg)
    rec = dict(cell=cell, key_numbers=result.key_numbers,
               checks=[dict(name=c.name, value=c.value, passed=c.passed) for c in result.checks],
               config=cfg.to_dict(), seed=cfg.seed)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(_jsonable(rec), sort_keys=True))
    tmp.replace(path)
    return rec


def sweep(cfg, cells, out_dir=None, workers=1):
    """Run every grid cell not yet on disk, then reduce all cells into ``sweep.csv``."""
    out = Path(out_dir or Path(cfg.output_dir) / f"{cfg.scenario}-sweep")
    cell_dir = out / "cells"
    cell_dir.mkdir(parents=True, exist_ok=True)
    todo = []
    for cell in cells:
        path = cell_dir / f"{_cell_id(cell)}.json"
        if not path.exists():
            todo.append((cfg, cell, path))
    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            list(pool.map(_run_cell, todo))
    else:
        for item in todo:
            _run_cell(item)
    records = []
    for cell in cells:
        rec = json.loads((cell_dir / f"{_cell_id(cell)}.json").read_text())
        records.append(dict(rec["cell"], **rec["key_numbers"]))
    config_json = json.dumps(_jsonable(cfg.to_dict()), sort_keys=True)
    _write_table(out / "sweep.csv", records, [f"config: {config_json}", f"seed: {cfg.seed}"])
    return records, out, len(todo)


# --------------------------------------------------------------------- CLI


def _scenario_help():
    lines = ["scenarios and their CSV columns:"]
    for name, (_, columns, doc) in SCENARIOS.items():
        lines.append(f"  {name}: {doc}")
        for table, cols in columns.items():
            lines.append(f"      {table}.csv: {cols}")
    lines.append("  every run also writes summary.csv (name, value, low, high, passed) and meta.json")
    return "\n".join(lines)


def build_parser():
    parser = argparse.ArgumentParser(prog="cavres", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in ("run", "sweep"):
        p = sub.add_parser(verb, epilog=_scenario_help(), formatter_class=argparse.RawDescriptionHelpFormatter,
                           help=f"{verb} a named scenario; extra --key value pairs override parameters")
        p.add_argument("scenario")
        p.add_argument("--config", help="key = value file")
        p.add_argument("--out", help="output directory (default <output_dir>/<scenario>)")
        if verb == "sweep":
            p.add_argument("--grid", action="append", default=[], help="key=start:stop:num or key=v1,v2,...")
            p.add_argument("--workers", type=int, default=1)
    sub.add_parser("list-scenarios", help="list scenario names")
    p = sub.add_parser("validate-config", help="parse a config file and print the resolved parameters")
    p.add_argument("path")
    p.add_argument("--scenario", default=None)
    return parser


def main(argv=None):
    parser = build_parser()
    args, rest = parser.parse_known_args(argv)
    try:
        if args.verb == "list-scenarios":
            for name, (_, _, doc) in SCENARIOS.items():
                print(f"{name:22s} {doc}")
            return EXIT_OK
        if args.verb == "validate-config":
            if rest:
                raise ConfigError(f"unexpected arguments {rest}", rest[0])
            base = default_config(args.scenario) if args.scenario else None
            cfg = load_config(args.path, base)
            print(json.dumps(_jsonable(cfg.to_dict()), indent=2, sort_keys=True))
            return EXIT_OK
        cfg = resolve_config(args.scenario, args.config, parse_overrides(rest))
        if args.verb == "run":
            result, out = execute(cfg, args.out)
            for key, val in result.key_numbers.items():
                print(f"{key} = {val}")
            for c in result.checks:
                print(f"{'PASS' if c.passed else 'FAIL'} {c.name} = {c.value:.6g} (expected [{c.low}, {c.high}])")
            print(f"outputs in {out}")
            return EXIT_OK
        records, out, ran = sweep(cfg, parse_grid(args.grid), args.out, args.workers)
        print(f"{len(records)} cells ({ran} computed), table in {out / 'sweep.csv'}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CavresError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point: ``magorbit census|split|probe|check-topology``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import List, Optional

import numpy as np

from . import harness
from .errors import MagorbitError
from .topology import CATALOG, predict_bound_for, sphere_bundle_betti, sum_betti, total_space_betti


def _write(out_dir, name, payload):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def read_matrix(path):
    """JSON (``[[...]]`` or ``{"a": [[...]], "n": k}``) or whitespace-separated rows."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        rows = [r.split() for r in text.splitlines() if r.strip() and not r.lstrip().startswith("#")]
        return np.array([[float(v) for v in r] for r in rows]), None
    if isinstance(data, dict):
        return np.asarray(data["a"], dtype=float), data.get("n")
    return np.asarray(data, dtype=float), None


def _census(args):
    cfg = harness.ExperimentConfig.load(args.config)
    out_dir = args.out_dir or cfg.data["output"]["dir"]
    fmt = args.format or cfg.data["output"]["format"]
    report = harness.run_census(cfg, threads=args.threads)
    for path in harness.emit_report(report, out_dir, fmt):
        print(f"wrote {path}")
    for lv in report.levels:
        print(f"energy {lv.energy:g}: counted {lv.counted_orbits} "
              f"(dedup {lv.deduplicated_count}, seeds {lv.seeds_tried}), "
              f"bound {lv.predicted_bound}: {lv.bound_status}")
    return report.exit_code


def _split(args):
    a, n = read_matrix(args.matrix_file)
    result = harness.run_split(a, n)
    print(f"k = {result['k']}, W1 dimension = {result['w1_dim']}, "
          f"congruence residual = {result['congruence_residual']:.3e}")
    if args.out_dir:
        print(f"wrote {_write(args.out_dir, 'split.json', result)}")
    else:
        print(json.dumps(result, indent=2, sort_keys=True))
    return harness.EXIT_OK


def _probe(args):
    cfg = harness.ExperimentConfig.load(args.config)
    result = harness.run_probe(cfg)
    for key in ("c0", "c1"):
        slope = result[f"{key}_slope"]
        print(f"{key}: {result[f'{key}_status']}" + ("" if slope is None else f", slope {slope:.4f}"))
    out_dir = args.out_dir or cfg.data["output"]["dir"]
    print(f"wrote {_write(out_dir, 'probe.json', result)}")
    return harness.EXIT_OK


def _check_topology(args):
    name = args.manifold
    if name not in CATALOG:
        raise MagorbitError(f"unknown manifold {name!r}; catalog: {', '.join(sorted(CATALOG))}")
    base = CATALOG[name][0]
    payload = {"manifold": name, "betti": list(base.betti), "sum_betti": sum_betti(base),
               "euler": base.euler, "cup_length": CATALOG[name][1]}
    if name != "point":
        E = total_space_betti(name)
        payload["unit_bundle_betti"] = list(E.betti)
        payload["unit_bundle_sum_betti"] = sum_betti(E)
        if base.euler != 0:
            payload["formula_betti"] = list(sphere_bundle_betti(base).betti)
        payload["bound"] = predict_bound_for(name).as_dict()
    text = json.dumps(payload, indent=2, sort_keys=True)
    print(text)
    if args.out_dir:
        _write(args.out_dir, "topology.json", payload)
    return harness.EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="magorbit",
                                     description="Periodic orbits of magnetic flows on low energy levels.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None, help="worker threads for seed shooting")
    common.add_argument("--out-dir", default=None, help="directory for output files")
    common.add_argument("--format", choices=("json", "tsv", "both"), default=None,
                        help="report format (census only)")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("census", parents=[common], help="orbit census from a config file")
    p.add_argument("config")
    p.set_defaults(func=_census)
    p = sub.add_parser("split", parents=[common], help="symplectic splitting of a constant form on T^n")
    p.add_argument("matrix_file")
    p.set_defaults(func=_split)
    p = sub.add_parser("probe", parents=[common], help="rescaled-field convergence probe")
    p.add_argument("config")
    p.set_defaults(func=_probe)
    p = sub.add_parser("check-topology", parents=[common], help="Betti data and orbit bounds")
    p.add_argument("manifold")
    p.set_defaults(func=_check_topology)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return harness.EXIT_ERROR
    try:
        return args.func(args)
    except (MagorbitError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return harness.EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

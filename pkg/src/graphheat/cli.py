"""Command line entry point: ``graphheat {generate,kernel,lambda,bounds,verify}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .graph import GraphError, dump_graph
from .reports import write_json, write_kernel_csv, write_spectral_csv
from .scenario import (
    CHECKS,
    EXIT_ERROR,
    EXIT_OK,
    ConfigError,
    ScenarioConfig,
    build_family,
    kernel_fields,
    run_scenario,
    spectral_results,
)
from .spectral import SpectralNonConvergence

log = logging.getLogger("graphheat")

BOUND_CHECKS = ("davies", "scalars", "thm31", "thm32", "tail")


def _center(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _load(args) -> ScenarioConfig:
    cfg = ScenarioConfig.load(args.config)
    if args.time:
        if any(t <= 0 for t in args.time):
            raise ConfigError("--time: must be positive")
        cfg.times = sorted(args.time)
    if args.center:
        cfg.centers = [_center(c) for c in args.center]
    if args.out_dir:
        cfg.output_dir = args.out_dir
    return cfg


def cmd_generate(cfg, args):
    g = build_family(cfg)
    path = dump_graph(g, Path(cfg.output_dir) / "graph.json")
    print(f"{path}: {g.n} vertices, {g.num_edges} edges, D_mu={g.D_mu:g}")
    return EXIT_OK


def cmd_kernel(cfg, args):
    g, fields = kernel_fields(cfg)
    label = (lambda v: json.dumps(list(g.label_of(v))) if isinstance(g.label_of(v), tuple) else g.label_of(v)) \
        if g.labels is not None else (lambda v: v)
    path = write_kernel_csv(Path(cfg.output_dir) / "kernel.csv", fields, label)
    print(f"{path}: {sum(f.support.size for f in fields)} rows")
    return EXIT_OK


def cmd_lambda(cfg, args):
    _, res = spectral_results(cfg)
    path = write_spectral_csv(Path(cfg.output_dir) / "spectral.csv", res)
    for r in res:
        print(f"{r.domain_tag}: lambda={r.lam:.12g} residual={r.residual:.2e}")
    print(path)
    return EXIT_OK


def _run(cfg, checks, write_kernels=False):
    res = run_scenario(cfg, checks=checks, write_kernels=write_kernels)
    for name, s in res.summary["results"].items():
        print(f"{name:24s} {s['passed']:6d}/{s['total']:<6d} worst slack {s['worst_slack']:.3e}")
    for name, note in sorted(res.summary["notes"].items()):
        if isinstance(note, str):
            print(f"note {name}: {note}")
    print("PASS" if res.status == EXIT_OK else "FAIL")
    return res.status


def cmd_bounds(cfg, args):
    return _run(cfg, BOUND_CHECKS)


def cmd_verify(cfg, args):
    return _run(cfg, CHECKS, write_kernels=True)


COMMANDS = {
    "generate": (cmd_generate, "build the configured family and write graph.json"),
    "kernel": (cmd_kernel, "dump heat kernels p(t, center, .) to kernel.csv"),
    "lambda": (cmd_lambda, "bottom of the spectrum to spectral.csv"),
    "bounds": (cmd_bounds, "certify the upper/lower/tail bounds"),
    "verify": (cmd_verify, "run every configured check"),
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="graphheat", description="Heat kernels on weighted graphs and bound certificates.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", required=True, help="scenario JSON file")
        s.add_argument("--time", type=float, action="append", help="override times (repeatable)")
        s.add_argument("--center", action="append", help="override centers; JSON such as 0 or [0,0] (repeatable)")
        s.add_argument("--out-dir", help="override output directory")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    func = COMMANDS[args.command][0]
    try:
        cfg = _load(args)
        return func(cfg, args)
    except (ConfigError, GraphError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
    except (SpectralNonConvergence, RuntimeError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

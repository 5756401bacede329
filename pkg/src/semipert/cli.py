"""Command-line entry point: ``semipert <command> [options]``.

Commands ``audit``, ``certify``, ``solve-de``, ``solve-rde`` and
``identities`` run one experiment kind; ``diff`` compares two reports.
Exit status is 0 when every check passes (or the diff is empty), 1 when a
check fails or the reports differ, and 2 on configuration errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .errors import ConfigError
from .runner import COMMANDS, ExperimentConfig, compare_reports, diff_is_empty, load_config, run, write_outputs

log = logging.getLogger("semipert")


def _mesh_list(text):
    try:
        return [int(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError("expected a comma-separated list of integers") from None


def _seed(text):
    try:
        val = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError("seed must be an integer") from None
    if not 0 <= val < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return val


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semipert", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, kind in COMMANDS.items():
        p = sub.add_parser(name, help=f"run a {kind} experiment")
        p.add_argument("--config", help="YAML or JSON configuration file")
        p.add_argument("--seed", type=_seed, help="random seed (overrides the configuration)")
        p.add_argument("--out", default=None, help="output directory (default: ./out)")
        p.add_argument("--mesh-family", type=_mesh_list, help="comma-separated mesh sizes, ascending")
        p.add_argument("--workers", type=int, help="parallel worker processes")
        p.add_argument("--no-trajectory", action="store_true", help="skip trajectory.csv")
    d = sub.add_parser("diff", help="compare two report.json files")
    d.add_argument("baseline")
    d.add_argument("candidate")
    d.add_argument("--rel-tol", type=float, default=0.05, help="relative drift threshold")
    d.add_argument("--out", default=None, help="write diff.json into this directory")
    return parser


def _run_experiment(args) -> int:
    kind = COMMANDS[args.command]
    data = load_config(args.config) if args.config else {}
    cfg = ExperimentConfig.from_mapping(data, kind=kind, seed=args.seed, mesh_family=args.mesh_family,
                                        workers=args.workers, out=args.out)
    out = cfg.output.get("dir", "out")
    log.info("running %s with seed %d on meshes %s", cfg.kind, cfg.seed, cfg.mesh_family)
    report = run(cfg)
    traj = cfg.output.get("trajectory", True) and not args.no_trajectory
    paths = write_outputs(report, out, trajectory=traj)
    for c in report["checks"]:
        print(f"{c['verdict']:8s} {c['name']}")
    print(f"{report['verdict']}: {len(report['checks'])} checks, report at {paths['report']}")
    return 0 if report["verdict"] != "FAIL" else 1


def _run_diff(args) -> int:
    reports = []
    for path in (args.baseline, args.candidate):
        try:
            with open(path, encoding="utf-8") as fh:
                reports.append(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read report {path}: {exc}", "report") from None
    diff = compare_reports(*reports, rel_tol=args.rel_tol)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "diff.json"), "w", encoding="utf-8") as fh:
            json.dump(diff, fh, indent=2, sort_keys=True)
    for f in diff["verdict_flips"]:
        print(f"FLIP  {f['check']}: {f['baseline']} -> {f['candidate']}")
    for d in diff["drifts"]:
        print(f"DRIFT {d['check']} {d['quantity']}: {d['baseline']} -> {d['candidate']}")
    for name in diff["missing"]:
        print(f"MISSING {name}")
    for name in diff["added"]:
        print(f"ADDED {name}")
    empty = diff_is_empty(diff)
    print("no differences" if empty else "reports differ")
    return 0 if empty else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "diff":
            return _run_diff(args)
        return _run_experiment(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

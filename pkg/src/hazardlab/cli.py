"""Command line front end: run scenarios, list them, reprint reports."""

import argparse
import dataclasses
import sys
import time

from .backend import HAS_NUMBA, active_backend
from .runner import run_scenario, write_artifact
from .scenario import bundled_scenarios, resolve_scenario


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="hazardlab",
        description="Monte-Carlo laboratory for random-time hazard processes")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and write CSV artifacts")
    run.add_argument("--config", required=True,
                     help="bundled scenario name or path to an INI file")
    run.add_argument("--out", default=None,
                     help="output directory (default runs/<scenario name>)")
    run.add_argument("--seed", type=int, default=None,
                     help="override the scenario seed")
    run.add_argument("--n-paths", type=int, default=None,
                     help="override the scenario path count")
    run.add_argument("--chunk-size", type=int, default=None,
                     help="paths per streaming chunk")
    run.add_argument("--samples", type=int, default=0,
                     help="also write per-path scalars for the first N paths")

    sub.add_parser("list-scenarios", help="list bundled scenario names")

    rep = sub.add_parser("report", help="reprint reports.csv from a run dir")
    rep.add_argument("dir", help="directory holding reports.csv")
    return parser


def _print_reports(reports):
    width = max(len(r.name) for r in reports)
    for r in reports:
        print(f"{r.name:<{width}}  {str(r.decision):<18} "
              f"stat={r.statistic:.6g} se={r.se:.3g} thr={r.threshold:.3g}")


def _cmd_run(args):
    scn = resolve_scenario(args.config)
    overrides = {}
    if args.seed is not None:
        if args.seed < 0:
            raise ValueError("seed must be >= 0")
        overrides["seed"] = args.seed
    if args.n_paths is not None:
        if args.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        overrides["n_paths"] = args.n_paths
    if overrides:
        scn = dataclasses.replace(scn, **overrides)

    t0 = time.perf_counter()
    artifact = run_scenario(scn, chunk_size=args.chunk_size,
                            collect_samples=args.samples)
    elapsed = time.perf_counter() - t0

    out_dir = args.out or f"runs/{scn.name}"
    written = write_artifact(artifact, out_dir)
    print(f"scenario {scn.name} ({scn.kind}), n_paths={scn.n_paths}, "
          f"seed={scn.seed}, backend={artifact.backend}, {elapsed:.1f}s")
    _print_reports(artifact.reports)
    if artifact.pricing:
        p = artifact.pricing
        print(f"pricing: indicator={p.indicator_mean:.6f} "
              f"(se {p.indicator_se:.2g}) conditional={p.conditional_mean:.6f} "
              f"(se {p.conditional_se:.2g})")
    print("wrote: " + ", ".join(written))
    failed = [r for r in artifact.reports if not r.passed]
    if failed:
        print(f"{len(failed)} report(s) FAILED", file=sys.stderr)
        return 1
    return 0


def _cmd_list():
    print(f"backend: {active_backend()}"
          + ("" if HAS_NUMBA else " (numba unavailable)"))
    for name in bundled_scenarios():
        scn = resolve_scenario(name)
        print(f"{name}: kind={scn.kind}, horizon={scn.grid.horizon:g}, "
              f"steps={scn.grid.n_steps}, n_paths={scn.n_paths}, "
              f"seed={scn.seed}")
    return 0


def _cmd_report(run_dir):
    import csv
    import os
    path = os.path.join(run_dir, "reports.csv")
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("# schema="):
            raise ValueError(f"{path} has no schema line")
        rows = list(csv.DictReader(fh))
    bad = 0
    width = max(len(r["test"]) for r in rows) if rows else 4
    for r in rows:
        ok = r["decision"] in ("pass", "reject_as_expected")
        bad += 0 if ok else 1
        print(f"{r['test']:<{width}}  {r['decision']:<18} "
              f"stat={r['statistic']} thr={r['threshold']}")
    print(f"{len(rows) - bad}/{len(rows)} reports passed")
    return 1 if bad else 0


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "list-scenarios":
            return _cmd_list()
        return _cmd_report(args.dir)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

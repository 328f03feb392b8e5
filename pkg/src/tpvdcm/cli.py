"""tpvdcm command line: run one scenario, batch all three experiments, or self-test.

Exit codes: 0 success, 1 collision / extraction failure / unfinished laps,
2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, parse_config
from .sim import EXPERIMENTS, ScenarioFailure, format_metrics, run_scenario, write_trajectory_csv

log = logging.getLogger("tpvdcm")

EXIT_OK, EXIT_RUN_FAILED, EXIT_CONFIG = 0, 1, 2
SUMMARY_FIELDS = ["experiment", "mean_abs_lat_err", "std_lat_err", "collided", "laps_completed"]


def _run_to_dir(cfg, out_dir: Path) -> tuple[int, dict]:
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        traj, metrics = run_scenario(cfg)
        note = ""
    except ScenarioFailure as exc:
        traj, metrics, note = exc.log, exc.metrics, str(exc)
        log.warning("%s: %s", cfg.experiment, note)
    write_trajectory_csv(traj, out_dir / "trajectory.csv")
    text = format_metrics(metrics, cfg.rng_seed) if metrics else f"seed={cfg.rng_seed}\n"
    if note:
        text += f"failure={note}\n"
    (out_dir / "metrics.txt").write_text(text)

    ok = not note and metrics is not None and not metrics.collided and metrics.laps_completed >= cfg.laps
    row = {"experiment": cfg.experiment}
    if metrics is not None:
        row.update(
            mean_abs_lat_err=metrics.mean_abs_lat_err,
            std_lat_err=metrics.std_lat_err,
            collided=str(metrics.collided).lower(),
            laps_completed=metrics.laps_completed,
        )
    return (EXIT_OK if ok else EXIT_RUN_FAILED), row


def _batch_job(args):
    cfg, out_dir = args
    return _run_to_dir(cfg, out_dir)


def cmd_run(args) -> int:
    cfg = parse_config(args.scenario)
    if args.seed is not None:
        cfg = replace(cfg, rng_seed=args.seed)
    out = Path(args.out)
    code, row = _run_to_dir(cfg, out)
    print((out / "metrics.txt").read_text(), end="")
    return code


def cmd_batch(args) -> int:
    base = parse_config(args.scenario)
    if args.seed is not None:
        base = replace(base, rng_seed=args.seed)
    out = Path(args.out)
    jobs = [(replace(base, experiment=e), out / e) for e in EXPERIMENTS]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_batch_job, jobs))
    else:
        results = [_batch_job(j) for j in jobs]

    out.mkdir(parents=True, exist_ok=True)
    with open(out / "summary.csv", "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=SUMMARY_FIELDS, lineterminator="\n")
        w.writeheader()
        for _, row in results:
            w.writerow(row)
    print(f"{'experiment':16s} {'mean|e| [m]':>12s} {'std [m]':>9s} {'collided':>9s} {'laps':>5s}")
    for _, row in results:
        if "mean_abs_lat_err" in row:
            print(
                f"{row['experiment']:16s} {row['mean_abs_lat_err']:12.4f} {row['std_lat_err']:9.4f} "
                f"{row['collided']:>9s} {row['laps_completed']:5d}"
            )
        else:
            print(f"{row['experiment']:16s} {'failed':>12s}")
    return max(code for code, _ in results)


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    return EXIT_OK if run_selftest() else EXIT_RUN_FAILED


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tpvdcm", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    for name, helptext in (("run", "run one scenario"), ("batch", "run all three experiments")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("scenario", help="scenario configuration file")
        p.add_argument("-o", "--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override sim.rng_seed")
        if name == "batch":
            p.add_argument("-j", "--jobs", type=int, default=1)

    sub.add_parser("selftest", help="check controller and geometry invariants")
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    handler = {"run": cmd_run, "batch": cmd_batch, "selftest": cmd_selftest}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

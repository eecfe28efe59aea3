"""Command line entry point.

Subcommands: ``generate``, ``cluster``, ``infer``, ``evaluate`` and
``pipeline``. Exit codes: 0 success, 2 configuration error, 3 data error,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .dbscan import DbscanParams, write_clusters_csv
from .errors import ConfigError, DigfillError
from .moments import TEST, MomentDataset, read_moments_csv, write_moments_csv
from .pipeline import (RandomScenario, RunConfig, StageError, cluster_stage,
                       evaluate_artifacts, infer_stage, parse_scenario, run_pipeline,
                       split_stage, write_report)
from .rng import stage_seed
from .simulate import (PathKind, RandomClusters, SynthConfig, Window, apply_dropout,
                       generate_synthetic_bench, write_ground_truth_csv)
from .telemetry import load_csv, rejection_report, write_csv


def _add_dbscan_flags(p):
    p.add_argument("--eps", type=float, default=2.5, help="neighbourhood radius in meters")
    p.add_argument("--min-pts", type=int, default=5, help="density threshold (self-inclusive)")


def _add_synth_flags(p):
    g = p.add_argument_group("synthetic bench")
    d = SynthConfig()
    g.add_argument("--n-stations", type=int, default=d.n_stations)
    g.add_argument("--digs-per-station", type=int, default=d.digs_per_station)
    g.add_argument("--station-spacing", type=float, default=d.station_spacing)
    g.add_argument("--path", choices=[k.value for k in PathKind], default=d.path_kind.value)
    g.add_argument("--dig-spread", type=float, default=d.dig_spread_x)
    g.add_argument("--gps-noise", type=float, default=d.gps_noise)


def _synth_from(args) -> SynthConfig:
    return SynthConfig(
        n_stations=args.n_stations, digs_per_station=args.digs_per_station,
        station_spacing=args.station_spacing, path_kind=args.path,
        dig_spread_x=args.dig_spread, dig_spread_y=args.dig_spread, gps_noise=args.gps_noise,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="digfill",
        description="Infer missing bucket dig locations from excavator GPS telemetry.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("generate", help="write a seeded synthetic bench")
    g.add_argument("--out-dir", type=Path, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--dropout", default=None,
                   help="also write a thinned log: random:<f> or window:<t0>:<t1>")
    _add_synth_flags(g)

    c = sub.add_parser("cluster", help="cluster dig points of a telemetry CSV")
    c.add_argument("--telemetry", type=Path, required=True)
    c.add_argument("--out-dir", type=Path, required=True)
    _add_dbscan_flags(c)

    i = sub.add_parser("infer", help="fit moment models and simulate held-out clusters")
    i.add_argument("--moments", type=Path, required=True,
                   help="moments.csv; rows tagged 'test' are inferred")
    i.add_argument("--out-dir", type=Path, required=True)
    i.add_argument("--scenario", default=None,
                   help="re-split the rows: random:<f> or window:<t0>:<t1>")
    i.add_argument("--restarts", type=int, default=8)
    i.add_argument("--sim-count", type=int, default=None)
    i.add_argument("--seed", type=int, default=0)

    e = sub.add_parser("evaluate", help="score the artifacts of a finished run")
    e.add_argument("--out-dir", type=Path, required=True)
    _add_dbscan_flags(e)

    p = sub.add_parser("pipeline", help="run every stage end to end")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--synthetic", action="store_true", help="use a generated bench (default)")
    src.add_argument("--telemetry", type=Path, default=None)
    p.add_argument("--scenario", default="random:0.25")
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--sim-count", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", type=Path, default=Path("out"))
    p.add_argument("--no-plots", action="store_true")
    _add_dbscan_flags(p)
    _add_synth_flags(p)
    return parser


def _cmd_generate(args) -> None:
    synth = replace(_synth_from(args), seed=stage_seed(args.seed, "generate"))
    tlog, truth = generate_synthetic_bench(synth)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(tlog, args.out_dir / "telemetry.csv")
    write_ground_truth_csv(args.out_dir / "ground_truth.csv", truth)
    if args.dropout:
        sc = parse_scenario(args.dropout)
        if isinstance(sc, RandomScenario):
            mode = RandomClusters(sc.fraction, stage_seed(args.seed, "dropout"))
        else:
            mode = Window(sc.t0, sc.t1)
        thinned, dropped = apply_dropout(tlog, mode)
        write_csv(thinned, args.out_dir / "telemetry_observed.csv")
        (args.out_dir / "dropped.json").write_text(json.dumps(dropped) + "\n")


def _cmd_cluster(args) -> None:
    tlog = load_csv(args.telemetry)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    (args.out_dir / "rejections.json").write_text(rejection_report(tlog) + "\n")
    cr = cluster_stage(tlog, DbscanParams(args.eps, args.min_pts))
    write_clusters_csv(args.out_dir / "clusters.csv", cr.points, cr.clustering)
    write_moments_csv(args.out_dir / "moments.csv", MomentDataset.all_train(cr.moments))
    print(f"{cr.clustering.k} clusters, {cr.clustering.noise_count} noise points")


def _cmd_infer(args) -> None:
    ds = read_moments_csv(args.moments)
    if args.scenario:
        ds = split_stage(ds.rows, parse_scenario(args.scenario), args.seed)
    elif TEST not in ds.split:
        raise ConfigError("moments file has no rows tagged 'test'; pass --scenario")
    args.out_dir.mkdir(parents=True, exist_ok=True)
    write_moments_csv(args.out_dir / "moments.csv", ds)
    infer_stage(ds, args.restarts, args.sim_count, args.seed, args.out_dir)


def _cmd_evaluate(args) -> None:
    report = evaluate_artifacts(args.out_dir, DbscanParams(args.eps, args.min_pts))
    write_report(args.out_dir, report)
    print(json.dumps(report.to_dict()["summary"], indent=2, sort_keys=True))


def _cmd_pipeline(args) -> None:
    cfg = RunConfig(
        out_dir=args.out_dir,
        scenario=parse_scenario(args.scenario),
        dbscan=DbscanParams(args.eps, args.min_pts),
        restarts=args.restarts,
        sim_count=args.sim_count,
        seed=args.seed,
        plots=not args.no_plots,
        telemetry=args.telemetry,
        synth=_synth_from(args),
    )
    report = run_pipeline(cfg)
    print(json.dumps(report.to_dict()["summary"], indent=2, sort_keys=True))


COMMANDS = {
    "generate": _cmd_generate,
    "cluster": _cmd_cluster,
    "infer": _cmd_infer,
    "evaluate": _cmd_evaluate,
    "pipeline": _cmd_pipeline,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.cmd](args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except DigfillError as exc:
        print(f"error [{args.cmd}]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

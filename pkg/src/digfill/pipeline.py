"""End-to-end orchestration: generate, cluster, split, fit, predict, simulate,
evaluate. Every stage writes its artifact to the output directory."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import plots
from .dbscan import Clustering, DbscanParams, dbscan, read_clusters_csv, strip_noise, write_clusters_csv
from .errors import ConfigError, DataError, DigfillError
from .evaluate import EvalReport, build_report, cluster_recovery, greedy_match, write_per_cluster_csv
from .gpr import fit_moment_models, predict_moments, write_hyperparams_json
from .moments import (ClusterMoments, MomentDataset, associate_all, compute_moments,
                      read_moments_csv, split_random, split_window, write_moments_csv)
from .rng import stage_seed
from .simulate import (SimulatedCluster, SynthConfig, choose_sim_count, generate_synthetic_bench,
                       read_simulated_csv, simulate_all, write_ground_truth_csv,
                       write_simulated_csv)
from .spatial_index import PointSet
from .telemetry import Role, TelemetryLog, load_csv, rejection_report, write_csv

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RandomScenario:
    fraction: float

    def __str__(self):
        return f"random:{self.fraction:g}"


@dataclass(frozen=True)
class WindowScenario:
    t0: float
    t1: float

    def __str__(self):
        return f"window:{self.t0:g}:{self.t1:g}"


def parse_scenario(text: str):
    """``random:<fraction>`` or ``window:<t0>:<t1>``."""
    kind, _, rest = text.partition(":")
    try:
        if kind == "random":
            return RandomScenario(float(rest))
        if kind == "window":
            t0, t1 = rest.split(":")
            return WindowScenario(float(t0), float(t1))
    except ValueError:
        pass
    raise ConfigError(f"bad scenario {text!r}; expected random:<f> or window:<t0>:<t1>")


def middle_window(cfg: SynthConfig, n_drop: int) -> WindowScenario:
    """Time window covering the middle ``n_drop`` stations of a synthetic bench."""
    first = (cfg.n_stations - n_drop) // 2
    last = first + n_drop - 1
    return WindowScenario(cfg.station_start(first), cfg.station_start(last) + cfg.dwell)


@dataclass(frozen=True)
class RunConfig:
    out_dir: Path
    scenario: RandomScenario | WindowScenario = RandomScenario(0.25)
    dbscan: DbscanParams = DbscanParams()
    restarts: int = 8
    sim_count: int | None = None
    seed: int = 0
    plots: bool = True
    telemetry: Path | None = None  # None means synthetic
    synth: SynthConfig = field(default_factory=SynthConfig)

    def __post_init__(self):
        if self.restarts < 1:
            raise ConfigError("restarts must be >= 1")
        if self.sim_count is not None and self.sim_count < 1:
            raise ConfigError("sim-count must be >= 1")


class StageError(DigfillError):
    def __init__(self, stage: str, cause: DigfillError):
        super().__init__(f"stage '{stage}' failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = cause.exit_code


class _Stage:
    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        log.info("stage %s", self.name)

    def __exit__(self, etype, exc, tb):
        if exc is not None and isinstance(exc, DigfillError) and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


@dataclass
class ClusterResult:
    points: PointSet  # all dig points, noise included
    times: np.ndarray
    clustering: Clustering
    members: PointSet  # noise stripped
    member_clustering: Clustering
    moments: list[ClusterMoments]


def cluster_stage(tlog: TelemetryLog, params: DbscanParams) -> ClusterResult:
    tlog.require_pipeline_ready()
    ps = PointSet(tlog.coords(Role.DIG, dims=3))
    times = tlog.times(Role.DIG)
    c = dbscan(ps, params)
    if c.k == 0:
        raise DataError(f"DBSCAN found no clusters (eps={params.eps}, min_pts={params.min_pts})")
    keep = c.labels != -1
    mps, mc = strip_noise(ps, c)
    rows = associate_all(compute_moments(mps, mc, times[keep]), tlog)
    return ClusterResult(ps, times, c, mps, mc, rows)


def split_stage(rows, scenario, seed: int) -> MomentDataset:
    ds = MomentDataset.all_train(rows)
    if isinstance(scenario, RandomScenario):
        return split_random(ds, scenario.fraction, stage_seed(seed, "split"))
    return split_window(ds, scenario.t0, scenario.t1)


def match_truth(test_rows, truth_rows) -> list[ClusterMoments]:
    """Relabel ground-truth stations with the ids of the clusters nearest them."""
    est = np.array([(r.mean_x, r.mean_y) for r in test_rows]).reshape(-1, 2)
    tru = np.array([(r.mean_x, r.mean_y) for r in truth_rows]).reshape(-1, 2)
    pairs = greedy_match(est, tru, math.inf)
    if len(pairs) != len(test_rows):
        raise DataError("more test clusters than ground-truth stations")
    out = [None] * len(test_rows)
    for i, j, _d in pairs:
        out[i] = replace(truth_rows[j], cluster_id=test_rows[i].cluster_id)
    return out


def infer_stage(ds: MomentDataset, restarts: int, sim_count: int | None, seed: int, out: Path):
    with _Stage("fit"):
        models = fit_moment_models(ds, restarts, stage_seed(seed, "gpr"))
        write_hyperparams_json(out / "hyperparams.json", models)
    with _Stage("predict"):
        predicted = predict_moments(models, ds.test())
        write_moments_csv(out / "predicted.csv", predicted)
    with _Stage("simulate"):
        n = sim_count or choose_sim_count(ds.train())
        sims = simulate_all(predicted, n, stage_seed(seed, "simulate"))
        write_simulated_csv(out / "simulated.csv", sims)
    return models, predicted, sims


def evaluate_stage(scenario: str, ds: MomentDataset, predicted, sims,
                   members: PointSet, member_clustering: Clustering,
                   params: DbscanParams, truth=None) -> EvalReport:
    test = ds.test()
    reference = match_truth(test, truth) if truth is not None else test
    rec = cluster_recovery(sims, members, member_clustering, params,
                           dropped=[r.cluster_id for r in test])
    extra = {
        "truth": "synthetic ground truth" if truth is not None else "observed clusters",
        "n_recovered_clusters": rec.n_recovered,
        "eps": params.eps,
        "min_pts": params.min_pts,
    }
    return build_report(scenario, predicted, reference, ds.train(), rec, extra)


def write_report(out: Path, report: EvalReport) -> None:
    (out / "report.json").write_text(report.to_json())
    write_per_cluster_csv(out / "per_cluster.csv", report)


def run_pipeline(cfg: RunConfig) -> EvalReport:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    truth = None

    with _Stage("generate" if cfg.telemetry is None else "load"):
        if cfg.telemetry is None:
            synth = replace(cfg.synth, seed=stage_seed(cfg.seed, "generate"))
            tlog, truth = generate_synthetic_bench(synth)
            write_ground_truth_csv(out / "ground_truth.csv", truth)
        else:
            tlog = load_csv(cfg.telemetry)
            (out / "rejections.json").write_text(rejection_report(tlog) + "\n")
        write_csv(tlog, out / "telemetry.csv")

    with _Stage("cluster"):
        cr = cluster_stage(tlog, cfg.dbscan)
        write_clusters_csv(out / "clusters.csv", cr.points, cr.clustering)

    with _Stage("split"):
        ds = split_stage(cr.moments, cfg.scenario, cfg.seed)
        write_moments_csv(out / "moments.csv", ds)

    _models, predicted, sims = infer_stage(ds, cfg.restarts, cfg.sim_count, cfg.seed, out)

    with _Stage("evaluate"):
        report = evaluate_stage(str(cfg.scenario), ds, predicted, sims, cr.members,
                                cr.member_clustering, cfg.dbscan, truth)
        write_report(out, report)

    if cfg.plots:
        _plots(out, tlog, cr, ds, predicted, sims, truth)
    return report


def _plots(out, tlog, cr: ClusterResult, ds, predicted, sims, truth) -> None:
    test = ds.test()
    reference = match_truth(test, truth) if truth is not None else test
    test_ids = {r.cluster_id for r in test}
    held = np.isin(cr.member_clustering.labels, list(test_ids))
    plots.emit_plots(out, {
        "a_telemetry": lambda: plots.plot_telemetry(
            tlog.coords(Role.DIG, 2), tlog.coords(Role.DUMP, 2), tlog.coords(Role.EXCAVATOR, 2)),
        "b_clusters": lambda: plots.plot_clusters(cr.points.coords, cr.clustering.labels),
        "c_moments": lambda: plots.plot_moments(reference, predicted, ds.train()),
        "d_simulated": lambda: plots.plot_simulated(
            sims, cr.members.coords[held], cr.member_clustering.labels[held]),
    })


def evaluate_artifacts(out: Path, params: DbscanParams) -> EvalReport:
    """Recompute the report from the CSV artifacts of a finished run."""
    out = Path(out)
    ps, c = read_clusters_csv(out / "clusters.csv")
    mps, mc = strip_noise(ps, c)
    ds = read_moments_csv(out / "moments.csv")
    pred = read_moments_csv(out / "predicted.csv").rows
    by_id = {r.cluster_id: r for r in pred}
    sims = [SimulatedCluster(cid, pts, by_id[cid])
            for cid, pts in sorted(read_simulated_csv(out / "simulated.csv").items())]
    truth = None
    gt = out / "ground_truth.csv"
    if gt.is_file():
        truth = list(read_moments_csv(gt).rows)
    scenario = "unknown"
    rep = out / "report.json"
    if rep.is_file():
        scenario = json.loads(rep.read_text())["scenario"]
    return evaluate_stage(scenario, ds, list(pred), sims, mps, mc, params, truth)

"""Exact Gaussian-process regression with a squared-exponential kernel.

Inputs are centred per dimension and divided by one shared scale, so the
isotropic ``length_scale`` keeps its meaning in input units (meters). Targets
are standardised to zero mean and unit scale; ``signal_var`` and ``noise_var``
live in those standardised units.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg, optimize

from .errors import AllStartsFailed, ConfigError, NotPositiveDefinite, TooFewPoints
from .moments import ClusterMoments, MomentDataset
from .rng import stage_seed

NOISE_FLOOR = 1e-10
JITTER_STEPS = (0.0, 1e-10, 1e-8, 1e-6)
STD_OFFSET = 0.05  # additive floor inside log(std + offset)
MIN_STD = 0.01

MOMENT_TARGETS = ("mean_x", "mean_y", "log_std_x", "log_std_y")


@dataclass(frozen=True)
class KernelParams:
    signal_var: float = 1.0
    length_scale: float = 1.0
    noise_var: float = 1e-4

    def __post_init__(self):
        if not (self.signal_var > 0 and self.length_scale > 0):
            raise ConfigError(f"kernel parameters must be positive: {self}")
        if not self.noise_var >= NOISE_FLOOR:
            raise ConfigError(f"noise_var must be >= {NOISE_FLOOR}, got {self.noise_var}")

    def to_log(self) -> np.ndarray:
        return np.log([self.signal_var, self.length_scale, self.noise_var])

    @classmethod
    def from_log(cls, theta) -> "KernelParams":
        sf, ell, sn = np.exp(np.asarray(theta, dtype=float))
        return cls(float(sf), float(ell), max(float(sn), NOISE_FLOOR))


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: float

    def apply(self, v):
        return (np.asarray(v, dtype=float) - self.mean) / self.scale


def _input_standardizer(X: np.ndarray) -> Standardizer:
    mu = X.mean(axis=0)
    s = float(np.sqrt(np.mean(X.var(axis=0))))
    return Standardizer(mu, s if s > 0 else 1.0)


def _target_standardizer(y: np.ndarray) -> Standardizer:
    mu = float(y.mean())
    s = float(y.std())
    # relative test: near-constant targets would otherwise blow up rounding noise
    if not s > 1e-12 * max(1.0, abs(mu)):
        s = 1.0
    return Standardizer(np.asarray(mu), s)


@dataclass(frozen=True)
class GprModel:
    params: KernelParams
    train_inputs: np.ndarray  # standardised
    weights: np.ndarray
    chol: np.ndarray
    input_std: Standardizer
    target_std: Standardizer
    jitter: float = 0.0

    @property
    def ell(self) -> float:
        """Length scale in standardised input units."""
        return self.params.length_scale / self.input_std.scale

    @property
    def diag_noise(self) -> float:
        return self.params.noise_var + self.jitter


@dataclass(frozen=True)
class Prediction:
    mean: np.ndarray | float
    variance: np.ndarray | float


def kernel_eval(a, b, p: KernelParams) -> float:
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return float(p.signal_var * math.exp(-float(d @ d) / (2.0 * p.length_scale**2)))


def _sqdist(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    diff = A[:, None, :] - B[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _se(d2: np.ndarray, signal_var: float, ell: float) -> np.ndarray:
    return signal_var * np.exp(-0.5 * d2 / ell**2)


def _as_inputs(inputs) -> np.ndarray:
    X = np.asarray(inputs, dtype=float)
    if X.ndim != 2:
        raise ConfigError(f"inputs must be an (n, d) array, got shape {X.shape}")
    return X


def fit(inputs, targets, p: KernelParams) -> GprModel:
    X = _as_inputs(inputs)
    y = np.asarray(targets, dtype=float).ravel()
    n = len(X)
    if n < 2:
        raise TooFewPoints(f"GP fit needs >= 2 points, got {n}")
    if len(y) != n:
        raise ConfigError("inputs and targets differ in length")
    xs, ys = _input_standardizer(X), _target_standardizer(y)
    Xs, yz = xs.apply(X), ys.apply(y)
    K = _se(_sqdist(Xs, Xs), p.signal_var, p.length_scale / xs.scale)

    for jitter in JITTER_STEPS:
        try:
            L = linalg.cholesky(K + (p.noise_var + jitter) * np.eye(n), lower=True)
            break
        except linalg.LinAlgError:
            continue
    else:
        raise NotPositiveDefinite(
            f"kernel matrix not positive definite after jitter {JITTER_STEPS[-1]:g}"
        )
    w = linalg.cho_solve((L, True), yz)
    return GprModel(p, Xs, w, L, xs, ys, jitter)


def predict(m: GprModel, query, clamp: bool = True) -> Prediction:
    """Posterior predictive mean and variance (observation noise included).

    ``query`` is a single input vector or an (m, d) batch. With ``clamp=False``
    the raw variance is returned, which may dip a hair below zero.
    """
    q = np.asarray(query, dtype=float)
    single = q.ndim == 1
    Q = m.input_std.apply(np.atleast_2d(q))
    ks = _se(_sqdist(m.train_inputs, Q), m.params.signal_var, m.ell)
    mean_z = ks.T @ m.weights
    v = linalg.solve_triangular(m.chol, ks, lower=True)
    var_z = m.params.signal_var + m.diag_noise - np.sum(v * v, axis=0)
    if clamp:
        var_z = np.maximum(var_z, 0.0)
    scale = m.target_std.scale
    mean = mean_z * scale + float(m.target_std.mean)
    var = var_z * scale**2
    if single:
        return Prediction(float(mean[0]), float(var[0]))
    return Prediction(mean, var)


def log_marginal_likelihood(inputs, targets, p: KernelParams) -> tuple[float, np.ndarray]:
    """Log evidence of the standardised data and its gradient with respect to
    (log signal_var, log length_scale, log noise_var)."""
    X = _as_inputs(inputs)
    y = np.asarray(targets, dtype=float).ravel()
    n = len(X)
    if n < 2:
        raise TooFewPoints(f"log marginal likelihood needs >= 2 points, got {n}")
    xs, ys = _input_standardizer(X), _target_standardizer(y)
    Xs, yz = xs.apply(X), ys.apply(y)
    ell = p.length_scale / xs.scale
    d2 = _sqdist(Xs, Xs)
    Kse = _se(d2, p.signal_var, ell)
    K = Kse + p.noise_var * np.eye(n)
    try:
        L = linalg.cholesky(K, lower=True)
    except linalg.LinAlgError:
        raise NotPositiveDefinite("kernel matrix not positive definite") from None

    alpha = linalg.cho_solve((L, True), yz)
    value = -0.5 * yz @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * n * math.log(2 * math.pi)

    W = np.outer(alpha, alpha) - linalg.cho_solve((L, True), np.eye(n))
    grad = 0.5 * np.array([
        np.sum(W * Kse),
        np.sum(W * Kse * d2) / ell**2,
        p.noise_var * np.trace(W),
    ])
    return float(value), grad


def median_pairwise_distance(X: np.ndarray) -> float:
    X = _as_inputs(X)
    iu = np.triu_indices(len(X), k=1)
    d = np.sqrt(_sqdist(X, X)[iu])
    med = float(np.median(d)) if d.size else 0.0
    return med if med > 0 else 1.0


@dataclass(frozen=True)
class StartResult:
    start: KernelParams
    start_lml: float
    end: KernelParams
    end_lml: float


def multistart_search(inputs, targets, restarts: int = 8, seed: int = 0) -> list[StartResult]:
    """Run one bounded quasi-Newton ascent of the log evidence per start."""
    X = _as_inputs(inputs)
    y = np.asarray(targets, dtype=float).ravel()
    if len(X) < 3:
        raise TooFewPoints(f"hyperparameter search needs >= 3 points, got {len(X)}")
    if restarts < 1:
        raise ConfigError("restarts must be >= 1")
    med = median_pairwise_distance(X)
    rng = np.random.default_rng(seed)
    lo = np.log([0.1, 0.1 * med, 1e-6])
    hi = np.log([10.0, 10.0 * med, 1e-1])
    bounds = [(math.log(1e-4), math.log(1e4)),
              (math.log(1e-3 * med), math.log(1e3 * med)),
              (math.log(NOISE_FLOOR), math.log(10.0))]

    def neg(theta):
        try:
            v, g = log_marginal_likelihood(X, y, KernelParams.from_log(theta))
        except NotPositiveDefinite:
            return 1e25, np.zeros(3)
        return -v, -g

    out = []
    for _ in range(restarts):
        theta0 = rng.uniform(lo, hi)
        f0, _g = neg(theta0)
        res = optimize.minimize(neg, theta0, jac=True, method="L-BFGS-B", bounds=bounds)
        theta1, f1 = (res.x, float(res.fun)) if np.isfinite(res.fun) else (theta0, f0)
        out.append(StartResult(KernelParams.from_log(theta0), -f0,
                               KernelParams.from_log(theta1), -f1))
    return out


def optimize_hyperparams(inputs, targets, restarts: int = 8, seed: int = 0) -> KernelParams:
    best, best_lml = None, -math.inf
    for r in multistart_search(inputs, targets, restarts, seed):
        for params, lml in ((r.start, r.start_lml), (r.end, r.end_lml)):
            if lml > -1e24 and lml > best_lml:
                best, best_lml = params, lml
    if best is None:
        raise AllStartsFailed(f"all {restarts} optimizer starts failed")
    return best


@dataclass(frozen=True)
class MomentModels:
    models: dict[str, GprModel]
    lml: dict[str, float] = field(default_factory=dict)

    def hyperparams(self) -> list[dict]:
        return [
            {
                "target": t,
                "signal_var": m.params.signal_var,
                "length_scale": m.params.length_scale,
                "noise_var": m.params.noise_var,
                "lml": self.lml.get(t, math.nan),
            }
            for t, m in self.models.items()
        ]


def moment_targets(rows) -> dict[str, np.ndarray]:
    return {
        "mean_x": np.array([r.mean_x for r in rows]),
        "mean_y": np.array([r.mean_y for r in rows]),
        "log_std_x": np.log(np.array([r.std_x for r in rows]) + STD_OFFSET),
        "log_std_y": np.log(np.array([r.std_y for r in rows]) + STD_OFFSET),
    }


def excavator_inputs(rows) -> np.ndarray:
    return np.array([(r.exc_x, r.exc_y) for r in rows], dtype=float).reshape(len(rows), 2)


def fit_moment_models(ds: MomentDataset, restarts: int = 8, seed: int = 0) -> MomentModels:
    train = ds.train()
    if len(train) < 3:
        raise TooFewPoints(f"need >= 3 training clusters, got {len(train)}")
    X = excavator_inputs(train)
    models, lml = {}, {}
    for name, y in moment_targets(train).items():
        p = optimize_hyperparams(X, y, restarts, stage_seed(seed, name))
        models[name] = fit(X, y, p)
        lml[name] = log_marginal_likelihood(X, y, p)[0]
    return MomentModels(models, lml)


def predict_moments(mm: MomentModels, rows) -> list[ClusterMoments]:
    """Inferred moments for each row from its excavator feature alone."""
    rows = list(rows)
    if not rows:
        return []
    X = excavator_inputs(rows)
    pred = {t: predict(m, X).mean for t, m in mm.models.items()}
    std_x = np.maximum(np.exp(pred["log_std_x"]) - STD_OFFSET, MIN_STD)
    std_y = np.maximum(np.exp(pred["log_std_y"]) - STD_OFFSET, MIN_STD)
    return [
        ClusterMoments(
            r.cluster_id, r.n_points,
            float(pred["mean_x"][i]), float(pred["mean_y"][i]),
            float(std_x[i]), float(std_y[i]),
            r.t_mid, r.t_start, r.t_end, r.exc_x, r.exc_y, r.mean_z,
        )
        for i, r in enumerate(rows)
    ]


def write_hyperparams_json(path, mm: MomentModels) -> None:
    Path(path).write_text(json.dumps(mm.hyperparams(), indent=2) + "\n")

"""Gaussian-process surrogate for the objective surface over parameter space.

Exact GP regression with a squared-exponential kernel

    k(a, b) = signal_variance * exp(-1/2 * sum_i (a_i - b_i)^2 / l_i^2)

and a zero prior mean on standardized objective values. Objective values are
shifted/scaled to zero mean and unit variance before fitting (raw objective
magnitudes from the estimator are large and would force extreme signal
variances); posterior queries are de-standardized on the way out. Hyper-
parameters are selected by maximizing the marginal log-likelihood over a
log-space box.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from .errors import IllConditionedKernelError, InvalidArgumentError
from .models import Bounds, ThetaVector, as_bounds

# Factorization jitter escalates from BASE to CAP (times signal variance),
# doubling on each Cholesky failure.
_JITTER_BASE = 1e-8
_JITTER_CAP = 1e-2


@dataclass(frozen=True)
class GpHyperParams:
    """SE-kernel hyperparameters. ``noise_jitter`` is diagonal regularization
    in standardized units; it may be zero, the factorization floors it."""

    signal_variance: float
    length_scales: np.ndarray
    noise_jitter: float = 0.0

    def __post_init__(self):
        ls = np.asarray(self.length_scales, dtype=float).ravel()
        if self.signal_variance <= 0:
            raise InvalidArgumentError("signal_variance must be positive")
        if np.any(ls <= 0):
            raise InvalidArgumentError("length scales must be positive")
        if self.noise_jitter < 0:
            raise InvalidArgumentError("noise_jitter must be nonnegative")
        object.__setattr__(self, "length_scales", ls)

    @property
    def dim(self) -> int:
        return self.length_scales.shape[0]


@dataclass(frozen=True)
class Standardization:
    mean: float
    scale: float  # always > 0

    def forward(self, values):
        return (np.asarray(values, dtype=float) - self.mean) / self.scale

    def inverse_mean(self, standardized):
        return standardized * self.scale + self.mean

    def inverse_variance(self, standardized_var):
        return standardized_var * self.scale**2


@dataclass(frozen=True)
class GpDataset:
    """Observed (theta, objective) pairs plus the value standardization."""

    thetas: np.ndarray  # (n, d)
    values: np.ndarray  # (n,)
    bounds: Bounds
    standardization: Standardization

    def __post_init__(self):
        thetas = np.atleast_2d(np.asarray(self.thetas, dtype=float))
        values = np.asarray(self.values, dtype=float).ravel()
        if thetas.shape[0] != values.shape[0]:
            raise InvalidArgumentError("need one value per point")
        if self.standardization.scale <= 0:
            raise InvalidArgumentError("standardization scale must be positive")
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "bounds", as_bounds(self.bounds))

    @classmethod
    def from_observations(cls, points, values, bounds=None) -> "GpDataset":
        """Build a dataset, deriving the standardization from the values.

        ``points`` may be ThetaVectors (bounds are taken from the first one)
        or a plain array with ``bounds`` given explicitly.
        """
        if bounds is None:
            bounds = points[0].bounds
            points = np.array([p.values for p in points])
        points = np.atleast_2d(np.asarray(points, dtype=float))
        values = np.asarray(values, dtype=float).ravel()
        if values.size == 0:
            raise InvalidArgumentError("dataset needs at least one observation")
        mean = float(np.mean(values))
        scale = float(np.std(values))
        if not np.isfinite(scale) or scale < 1e-12:
            scale = 1.0
        return cls(points, values, as_bounds(bounds), Standardization(mean, scale))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.thetas.shape[1]

    @property
    def standardized_values(self) -> np.ndarray:
        return self.standardization.forward(self.values)


def _as_matrix(x, dim: int) -> np.ndarray:
    if isinstance(x, ThetaVector):
        x = x.values
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != dim:
        raise InvalidArgumentError(f"query has dimension {x.shape[1]}, expected {dim}")
    return x, single


def kernel_matrix(hyper: GpHyperParams, xa: np.ndarray, xb: np.ndarray) -> np.ndarray:
    """SE kernel between two point sets, shapes (m, d) and (n, d)."""
    sa = xa / hyper.length_scales
    sb = xb / hyper.length_scales
    sq = (
        np.sum(sa**2, axis=1)[:, None]
        + np.sum(sb**2, axis=1)[None, :]
        - 2.0 * (sa @ sb.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return hyper.signal_variance * np.exp(-0.5 * sq)


def kernel_eval(hyper: GpHyperParams, a, b) -> float:
    """SE kernel between two points; always in (0, signal_variance]."""
    a, _ = _as_matrix(a, hyper.dim)
    b, _ = _as_matrix(b, hyper.dim)
    return float(kernel_matrix(hyper, a, b)[0, 0])


def _factor(K: np.ndarray, hyper: GpHyperParams):
    """Cholesky of K + (noise_jitter + jitter) I with escalating jitter.

    Returns (L, effective_noise), the total diagonal addition actually used.
    """
    jitter = _JITTER_BASE * hyper.signal_variance
    cap = _JITTER_CAP * hyper.signal_variance
    while True:
        diag_add = hyper.noise_jitter + jitter
        try:
            L = cholesky(K + diag_add * np.eye(K.shape[0]), lower=True)
            return L, diag_add
        except np.linalg.LinAlgError:
            pass
        jitter *= 2.0
        if jitter > cap:
            raise IllConditionedKernelError(
                f"kernel matrix not factorable with jitter up to {cap:g}"
            )


@dataclass(frozen=True)
class GpModel:
    """A fitted surrogate: dataset, hyperparameters and the cached
    factorization L L^T = K + effective_noise I with its solved weights."""

    hyper: GpHyperParams
    data: GpDataset
    chol: np.ndarray
    weights: np.ndarray  # (K + effective_noise I)^{-1} y_standardized
    effective_noise: float

    def posterior(self, query):
        """Posterior mean and variance at one or many query points, in the
        raw (de-standardized) units of the observed values."""
        mean_s, var_s = self.posterior_standardized(query)
        st = self.data.standardization
        return st.inverse_mean(mean_s), st.inverse_variance(var_s)

    def posterior_standardized(self, query):
        """Posterior mean/variance on the standardized value scale.

        Variance is clamped at zero from below. Scalars come back for a
        single 1-d query, arrays for a batch.
        """
        x, single = _as_matrix(query, self.data.dim)
        k_star = kernel_matrix(self.hyper, self.data.thetas, x)  # (n, m)
        mean = k_star.T @ self.weights
        v = solve_triangular(self.chol, k_star, lower=True)
        var = self.hyper.signal_variance - np.sum(v**2, axis=0)
        np.maximum(var, 0.0, out=var)
        if single:
            return float(mean[0]), float(var[0])
        return mean, var


def fit(data: GpDataset, hyper: GpHyperParams) -> GpModel:
    """Condition the GP on the dataset, caching the kernel factorization."""
    if hyper.dim != data.dim:
        raise InvalidArgumentError(
            f"hyperparameters have dimension {hyper.dim}, data {data.dim}"
        )
    K = kernel_matrix(hyper, data.thetas, data.thetas)
    L, effective_noise = _factor(K, hyper)
    y = data.standardized_values
    weights = cho_solve((L, True), y)
    return GpModel(hyper=hyper, data=data, chol=L, weights=weights,
                   effective_noise=effective_noise)


def posterior(model: GpModel, query):
    return model.posterior(query)


def log_marginal_likelihood(data: GpDataset, hyper: GpHyperParams) -> float:
    """Gaussian log-density of the standardized values under the kernel:
    -1/2 y^T K_n^{-1} y - 1/2 log|K_n| - n/2 log(2 pi), with K_n the
    jittered kernel matrix used by ``fit``."""
    model = fit(data, hyper)
    y = data.standardized_values
    n = data.n
    log_det_half = float(np.sum(np.log(np.diag(model.chol))))
    return float(-0.5 * y @ model.weights - log_det_half - 0.5 * n * np.log(2.0 * np.pi))


def _hyper_log_bounds(data: GpDataset) -> np.ndarray:
    """Box for the log-space hyperparameter search: signal variance in
    [1e-4, 1e4], length scales in [1e-3, 1e3] x bound width, noise in
    [1e-8, 1] (standardized units)."""
    widths = data.bounds[:, 1] - data.bounds[:, 0]
    widths = np.where(widths > 0, widths, 1.0)
    lo = np.concatenate(([1e-4], 1e-3 * widths, [1e-8]))
    hi = np.concatenate(([1e4], 1e3 * widths, [1e0]))
    return np.log(np.column_stack([lo, hi]))


def _pack(hyper: GpHyperParams) -> np.ndarray:
    return np.log(np.concatenate(
        ([hyper.signal_variance], hyper.length_scales, [max(hyper.noise_jitter, 1e-12)])
    ))


def _unpack(z: np.ndarray) -> GpHyperParams:
    v = np.exp(z)
    return GpHyperParams(signal_variance=float(v[0]), length_scales=v[1:-1],
                         noise_jitter=float(v[-1]))


def optimize_hyperparams(
    data: GpDataset,
    init: GpHyperParams,
    restarts: int = 4,
    seed: int = 0,
) -> GpHyperParams:
    """Maximize the marginal log-likelihood over the log-space box.

    Runs L-BFGS-B from ``init`` and from ``restarts`` additional starts drawn
    log-uniformly in the box (seeded). Never returns hyperparameters whose
    likelihood is below that of ``init`` or of any start point.
    """
    from scipy.optimize import minimize

    if restarts < 1:
        raise InvalidArgumentError("restarts must be at least 1")
    log_bounds = _hyper_log_bounds(data)

    def negative_lml(z):
        try:
            return -log_marginal_likelihood(data, _unpack(z))
        except IllConditionedKernelError:
            return 1e15

    rng = np.random.default_rng(seed)
    init_neg = negative_lml(_pack(init))
    z_init = np.clip(_pack(init), log_bounds[:, 0], log_bounds[:, 1])
    starts = [z_init]
    for _ in range(restarts):
        starts.append(rng.uniform(log_bounds[:, 0], log_bounds[:, 1]))

    candidates = [(negative_lml(z), z) for z in starts]
    for z0 in starts:
        result = minimize(
            negative_lml, z0, method="L-BFGS-B", bounds=log_bounds,
            options={"maxiter": 200},
        )
        if np.isfinite(result.fun):
            candidates.append((float(result.fun), result.x))

    best_neg, best_z = min(candidates, key=lambda c: c[0])
    if best_neg >= init_neg:  # nothing beat the init point itself
        return init
    return _unpack(best_z)

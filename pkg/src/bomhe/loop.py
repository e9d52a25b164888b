"""Outer learning loop: surrogate-guided search for the dynamics parameters.

Bootstrap the dataset with seeded uniform draws from the box, then iterate:
fit the GP to the standardized objective values, propose the next parameter
vector by expected improvement, run the full moving-horizon sweep to score
it, and append the new observation. Every evaluation is a complete pass of
the estimator over the measurement record, so one observation per iteration.

Failed evaluations (numeric divergence or singular windows) are kept in the
dataset with a large sentinel objective so the surrogate stays finite while
the acquisition is repelled from the region.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import gp
from .acquisition import AcquisitionConfig, propose_next
from .errors import BomheError, InvalidArgumentError
from .mhe import MheConfig, run_trajectory
from .models import Bounds, ParamTemplate, ThetaVector, as_bounds, instantiate
from .rng import SeedStreams, spawn_ints

_FIRST_FAILURE_SENTINEL = 1e12
_FAILURE_FACTOR = 10.0


@dataclass(frozen=True)
class BomheConfig:
    """Knobs of the outer loop."""

    max_iter: int
    bounds: Bounds
    n_init: int = 5
    seed: int = 0
    gp_refit_period: int = 10
    gp_restarts: int = 4
    acquisition: AcquisitionConfig = field(default_factory=AcquisitionConfig)

    def __post_init__(self):
        if self.max_iter < 1 or self.n_init < 1:
            raise InvalidArgumentError("max_iter and n_init must be positive")
        if self.gp_refit_period < 1 or self.gp_restarts < 1:
            raise InvalidArgumentError("gp_refit_period and gp_restarts must be positive")
        object.__setattr__(self, "bounds", as_bounds(self.bounds))


@dataclass(frozen=True)
class RunRecord:
    """One evaluated parameter vector. ``iteration`` 0 marks bootstrap points.

    ``mae`` is filled only when true states were supplied for diagnostics;
    ``wall_time`` is excluded from serialized output (it is never
    reproducible)."""

    iteration: int
    theta: np.ndarray
    J: float
    best_so_far_J: float
    mae: float | None = None
    fallback: bool = False
    wall_time: float = 0.0


@dataclass(frozen=True)
class BomheResult:
    records: tuple[RunRecord, ...]
    best_theta: ThetaVector
    best_model: object  # LinearModel
    best_estimates: np.ndarray
    best_J: float

    def to_dict(self) -> dict:
        """Deterministic serialization; wall time deliberately left out."""
        return {
            "records": [
                {
                    "iteration": r.iteration,
                    "theta": list(map(float, r.theta)),
                    "J": r.J,
                    "best_so_far_J": r.best_so_far_J,
                    "mae": r.mae,
                    "fallback": r.fallback,
                }
                for r in self.records
            ],
            "best_theta": list(map(float, self.best_theta.values)),
            "best_J": self.best_J,
        }


def evaluate_theta(
    theta: ThetaVector,
    template: ParamTemplate,
    measurements: np.ndarray,
    inputs: np.ndarray,
    mhe_cfg: MheConfig,
) -> tuple[float, np.ndarray]:
    """Instantiate the model at ``theta`` and score it with a full sweep."""
    model = instantiate(template, theta)
    estimates, total_cost = run_trajectory(model, measurements, inputs, mhe_cfg)
    return total_cost, estimates


def mae(true_states, estimates, monitored_components=None) -> float:
    """Mean absolute estimation error over the monitored state components,
    averaged over steps 1..T (the known initial state is not scored)."""
    x = np.atleast_2d(np.asarray(true_states, dtype=float))
    xh = np.atleast_2d(np.asarray(estimates, dtype=float))
    if x.shape != xh.shape:
        raise InvalidArgumentError(f"shape mismatch: {x.shape} vs {xh.shape}")
    if monitored_components is None:
        monitored = np.arange(x.shape[1])
    else:
        monitored = np.asarray(list(monitored_components), dtype=int)
        if monitored.size == 0:
            raise InvalidArgumentError("monitored component set is empty")
        if np.any(monitored < 0) or np.any(monitored >= x.shape[1]):
            raise InvalidArgumentError("monitored component index out of range")
    diff = np.abs(x[1:, monitored] - xh[1:, monitored])
    return float(np.mean(diff))


def optimize(
    measurements: np.ndarray,
    inputs: np.ndarray,
    template: ParamTemplate,
    mhe_cfg: MheConfig,
    cfg: BomheConfig,
    true_states: np.ndarray | None = None,
    monitored_components=None,
) -> BomheResult:
    """Run the full learning loop and return the best parameters found.

    ``true_states`` is optional diagnostic ground truth; when given, each
    record carries the estimation error of its candidate. The loop itself
    never uses it.
    """
    if template.n_free != cfg.bounds.shape[0]:
        raise InvalidArgumentError(
            f"bounds dimension {cfg.bounds.shape[0]} != template free count {template.n_free}"
        )
    streams = SeedStreams(cfg.seed)
    rng = streams.optimizer_rng()
    acq_seeds = spawn_ints(streams.optimizer, cfg.max_iter)
    refit_seeds = spawn_ints(streams.optimizer, cfg.max_iter)

    thetas: list[np.ndarray] = []
    values: list[float] = []
    records: list[RunRecord] = []
    worst_finite = None
    best = {"J": np.inf, "theta": None, "estimates": None}

    def score(theta: ThetaVector) -> tuple[float, np.ndarray | None, float]:
        nonlocal worst_finite
        start = time.perf_counter()
        try:
            value, estimates = evaluate_theta(theta, template, measurements, inputs, mhe_cfg)
            if not np.isfinite(value):
                raise BomheError("non-finite objective")
            worst_finite = value if worst_finite is None else max(worst_finite, value)
        except BomheError:
            value = (
                _FAILURE_FACTOR * worst_finite
                if worst_finite is not None
                else _FIRST_FAILURE_SENTINEL
            )
            estimates = None
        return value, estimates, time.perf_counter() - start

    def record(iteration: int, theta: ThetaVector, value, estimates, elapsed, fallback=False):
        thetas.append(theta.values)
        values.append(value)
        if value < best["J"]:
            best.update(J=value, theta=theta, estimates=estimates)
        diag = None
        if true_states is not None and estimates is not None:
            diag = mae(true_states, estimates, monitored_components)
        records.append(
            RunRecord(
                iteration=iteration,
                theta=theta.values.copy(),
                J=float(value),
                best_so_far_J=float(best["J"]),
                mae=diag,
                fallback=fallback,
                wall_time=elapsed,
            )
        )

    for _ in range(cfg.n_init):
        theta = ThetaVector(rng.uniform(cfg.bounds[:, 0], cfg.bounds[:, 1]), cfg.bounds)
        record(0, theta, *score(theta))

    hyper = _default_hyper(cfg.bounds)
    last_refit_count = 0
    for i in range(1, cfg.max_iter + 1):
        data = gp.GpDataset.from_observations(
            np.array(thetas), np.array(values), bounds=cfg.bounds
        )
        if last_refit_count == 0 or data.n - last_refit_count >= cfg.gp_refit_period:
            hyper = gp.optimize_hyperparams(
                data, hyper, restarts=cfg.gp_restarts, seed=refit_seeds[i - 1]
            )
            last_refit_count = data.n
        model = gp.fit(data, hyper)
        incumbent = float(np.min(data.standardized_values))
        proposal = propose_next(
            model, cfg.bounds, cfg.acquisition, incumbent, acq_seeds[i - 1]
        )
        value, estimates, elapsed = score(proposal.theta)
        record(i, proposal.theta, value, estimates, elapsed, fallback=proposal.fallback)

    best_theta = best["theta"]
    return BomheResult(
        records=tuple(records),
        best_theta=best_theta,
        best_model=instantiate(template, best_theta),
        best_estimates=best["estimates"],
        best_J=float(best["J"]),
    )


def _default_hyper(bounds: Bounds) -> gp.GpHyperParams:
    widths = bounds[:, 1] - bounds[:, 0]
    widths = np.where(widths > 0, widths, 1.0)
    return gp.GpHyperParams(
        signal_variance=1.0, length_scales=0.5 * widths, noise_jitter=1e-6
    )

"""Benchmark plants: five-state leak detection, third-order heat transfer,
and a generic linear system, all with seeded Gaussian noise.

The leak plant is a discrete linear system whose process noise enters
through a fixed input matrix G; only two state components are disturbed.
The heat plant is a continuous-time affine ODE discretized by forward Euler
with step ``dt``; its second state integrates time exactly. Measurement
noise is additive on the observed components in both cases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, NumericDivergenceError
from .models import LinearModel
from .rng import SeedStreams

LEAK_A = np.array(
    [
        [0.89168, 0.0, 0.0, 0.0, 1.0],
        [0.10832, 0.90518, 0.0, 0.04306, 0.0],
        [0.0, 0.09482, 0.89524, 0.0, 0.0],
        [0.0, 0.0, 0.10476, 0.89235, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0],
    ]
)

LEAK_G = np.diag([-1.0, -1.0, -1.0, -1.0, 1.0])

LEAK_Q_W = np.array([0.0, 0.0, 5.0, 0.0, 15.0])
LEAK_R_V = np.array([8.0, 8.0, 8.0, 8.0, 4.0])


@dataclass(frozen=True)
class HeatConstants:
    """Coefficients of the heat-transfer ODE. Defaults are documented
    placeholders, overridable from the experiment config."""

    k1: float = 0.1
    k2: float = 0.05
    k3: float = 0.01
    k_u: float = 1.0
    t_env: float = 25.0
    u: float = 0.0


@dataclass(frozen=True)
class SystemSim:
    """A simulatable plant: deterministic dynamics plus diagonal noise model.

    ``q_w`` and ``r_v`` are the diagonals of the process / measurement noise
    covariances. For the leak plant process noise enters as G @ w; for the
    heat plant and custom linear plants it is added to the state directly.
    """

    kind: str  # "leak", "heat" or "custom-linear"
    n_x: int
    n_u: int
    n_y: int
    q_w: np.ndarray
    r_v: np.ndarray
    x0: np.ndarray
    dt: float = 1.0
    heat: HeatConstants | None = None
    linear: LinearModel | None = None  # leak and custom-linear dynamics
    G: np.ndarray | None = None  # leak process-noise input matrix

    def __post_init__(self):
        q_w = np.asarray(self.q_w, dtype=float).ravel()
        r_v = np.asarray(self.r_v, dtype=float).ravel()
        x0 = np.asarray(self.x0, dtype=float).ravel()
        if np.any(q_w < 0) or np.any(r_v < 0):
            raise InvalidArgumentError("noise covariance diagonals must be nonnegative")
        if q_w.shape[0] != self.n_x or x0.shape[0] != self.n_x:
            raise InvalidArgumentError("q_w and x0 must have dimension n_x")
        if r_v.shape[0] != self.n_y:
            raise InvalidArgumentError("r_v must have dimension n_y")
        if self.kind == "heat" and self.dt <= 0:
            raise InvalidArgumentError("dt must be positive for the heat system")
        object.__setattr__(self, "q_w", q_w)
        object.__setattr__(self, "r_v", r_v)
        object.__setattr__(self, "x0", x0)

    # Deterministic part of the dynamics, one discrete step.
    def step(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        if self.kind in ("leak", "custom-linear"):
            m = self.linear
            return m.A @ x + (m.B @ u if m.n_u else 0.0)
        if self.kind == "heat":
            return x + self.dt * self._heat_ode(x, u)
        raise InvalidArgumentError(f"unknown system kind {self.kind!r}")

    def observe(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "heat":
            return HEAT_C @ x
        return self.linear.C @ x

    def _heat_ode(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        c = self.heat
        u_val = u[0] if len(u) else c.u
        return np.array(
            [
                -c.k1 * (x[0] - c.t_env) + c.k2 * x[2] + c.k_u * u_val,
                1.0,
                -c.k3 * (x[0] - c.t_env),
            ]
        )


HEAT_C = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])  # observe temperature and energy


def leak_system(q_w=LEAK_Q_W, r_v=LEAK_R_V, x0=None) -> SystemSim:
    """The five-state leak-detection plant with identity observation."""
    x0 = np.zeros(5) if x0 is None else x0
    model = LinearModel(LEAK_A, np.zeros((5, 0)), np.eye(5))
    return SystemSim(
        kind="leak", n_x=5, n_u=0, n_y=5, q_w=q_w, r_v=r_v, x0=x0,
        linear=model, G=LEAK_G,
    )


def heat_system(
    constants: HeatConstants | None = None,
    q_w=(1.0, 1.0, 1.0),
    r_v=(5.0, 5.0),
    x0=(50.0, 0.0, 100.0),
    dt: float = 0.1,
) -> SystemSim:
    """The third-order heat-transfer plant, forward-Euler discretized."""
    return SystemSim(
        kind="heat", n_x=3, n_u=1, n_y=2, q_w=q_w, r_v=r_v, x0=x0,
        dt=dt, heat=constants or HeatConstants(),
    )


def custom_linear_system(model: LinearModel, q_w, r_v, x0) -> SystemSim:
    """A user-supplied linear plant with additive process noise."""
    return SystemSim(
        kind="custom-linear", n_x=model.n_x, n_u=model.n_u, n_y=model.n_y,
        q_w=q_w, r_v=r_v, x0=x0, linear=model,
    )


@dataclass(frozen=True)
class Trajectory:
    """One simulated run: states x_0..x_T, inputs u_0..u_{T-1}, measurements y_0..y_T."""

    states: np.ndarray  # (T+1, n_x)
    inputs: np.ndarray  # (T, n_u)
    measurements: np.ndarray  # (T+1, n_y)
    seed: int

    def __post_init__(self):
        if self.measurements.shape[0] != self.states.shape[0]:
            raise InvalidArgumentError("need one measurement per state")
        if self.inputs.shape[0] != self.states.shape[0] - 1:
            raise InvalidArgumentError("need T inputs for T+1 states")

    @property
    def horizon(self) -> int:
        return self.states.shape[0] - 1


def _input_sequence(sys: SystemSim, horizon: int) -> np.ndarray:
    if sys.kind == "heat":
        return np.full((horizon, 1), sys.heat.u)
    return np.zeros((horizon, sys.n_u))


def simulate(sys: SystemSim, horizon: int, seed: int) -> Trajectory:
    """Roll the plant forward ``horizon`` steps under seeded noise.

    Process and measurement noise come from separate streams of the seed, so
    trajectories with equal (sys, horizon, seed) are bit-identical and
    changing one covariance leaves the other stream untouched.
    """
    if horizon < 1:
        raise InvalidArgumentError("horizon must be at least 1")
    streams = SeedStreams(seed)
    w = streams.process_rng().normal(size=(horizon, sys.n_x)) * np.sqrt(sys.q_w)
    v = streams.measurement_rng().normal(size=(horizon + 1, sys.n_y)) * np.sqrt(sys.r_v)

    us = _input_sequence(sys, horizon)
    xs = np.empty((horizon + 1, sys.n_x))
    ys = np.empty((horizon + 1, sys.n_y))
    xs[0] = sys.x0
    for k in range(horizon):
        noise = sys.G @ w[k] if sys.kind == "leak" else w[k]
        xs[k + 1] = sys.step(xs[k], us[k]) + noise
        if not np.all(np.isfinite(xs[k + 1])):
            raise NumericDivergenceError("state became non-finite", step=k + 1)
    for k in range(horizon + 1):
        ys[k] = sys.observe(xs[k]) + v[k]
    return Trajectory(states=xs, inputs=us, measurements=ys, seed=int(seed))


def jacobian_linearize(sys: SystemSim, operating_point) -> LinearModel:
    """Discrete-time linearization of the heat plant at a state.

    Returns (I + dt * df/dx, dt * df/du, C) with the partials taken
    analytically. The heat dynamics are affine in the state, so the result
    does not depend on the operating point; the argument is kept for the
    estimator interface, which linearizes wherever its current guess sits.
    """
    if sys.kind != "heat":
        raise InvalidArgumentError("jacobian_linearize is defined for the heat system only")
    op = np.asarray(operating_point, dtype=float).ravel()
    if op.shape[0] != sys.n_x:
        raise InvalidArgumentError(f"operating point has dimension {op.shape[0]}, expected {sys.n_x}")
    c = sys.heat
    jac_x = np.array(
        [
            [-c.k1, 0.0, c.k2],
            [0.0, 0.0, 0.0],
            [-c.k3, 0.0, 0.0],
        ]
    )
    jac_u = np.array([[c.k_u], [0.0], [0.0]])
    return LinearModel(np.eye(3) + sys.dt * jac_x, sys.dt * jac_u, HEAT_C.copy())

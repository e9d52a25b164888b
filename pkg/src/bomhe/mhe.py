"""Moving-horizon estimation over a linear model.

Each window minimizes

    sum_{k=t-N}^{t}   || y_k - C x_k ||^2_R
  + sum_{k=t-N}^{t-1} || x_{k+1} - A x_k - B u_k ||^2_Q
  + || x_{t-N} - x_bar ||^2_W,        W = P^{-1}

over the N+1 window states. All residuals are stacked into one linear
least-squares system and solved by a QR factorization, so the window solve
is the exact global minimizer of the convex quadratic. Between windows the
prior mean advances through the model and the covariance P through the
Kalman-filter covariance recursion (its inverse is the arrival weight, i.e.
confidence in the prior).

Weight matrices Q and R are diagonal and used directly as penalties; the
same Q and R drive the covariance recursion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, lstsq, solve_triangular

from .errors import InvalidArgumentError, SingularInnovationError, SingularWindowError
from .models import LinearModel


@dataclass(frozen=True)
class MheConfig:
    """Horizon length, stage weights, and the initial prior."""

    N: int
    Q: np.ndarray  # (n_x, n_x) diagonal positive definite
    R: np.ndarray  # (n_y, n_y) diagonal positive definite
    P0: np.ndarray  # (n_x, n_x) positive definite
    x0_guess: np.ndarray

    def __post_init__(self):
        if self.N < 1:
            raise InvalidArgumentError("horizon N must be at least 1")
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        P0 = np.atleast_2d(np.asarray(self.P0, dtype=float))
        for name, M in (("Q", Q), ("R", R), ("P0", P0)):
            if M.shape[0] != M.shape[1]:
                raise InvalidArgumentError(f"{name} must be square")
            if np.any(np.linalg.eigvalsh((M + M.T) / 2) <= 0):
                raise InvalidArgumentError(f"{name} must be positive definite")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "P0", P0)
        object.__setattr__(self, "x0_guess", np.asarray(self.x0_guess, dtype=float).ravel())


@dataclass(frozen=True)
class ArrivalState:
    """Prior mean and covariance for the oldest state in the window."""

    x_bar: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        object.__setattr__(self, "x_bar", np.asarray(self.x_bar, dtype=float).ravel())
        object.__setattr__(self, "P", (P + P.T) / 2)


@dataclass(frozen=True)
class WindowSolution:
    estimates: np.ndarray  # (N+1, n_x)
    stage_cost: float


def _sqrt_weight(M: np.ndarray) -> np.ndarray:
    """S with S^T S = M for a diagonal positive-definite weight."""
    return np.diag(np.sqrt(np.diag(M)))


def _arrival_sqrt_weight(P: np.ndarray) -> np.ndarray:
    """S with S^T S = P^{-1}: the inverse of P's lower Cholesky factor."""
    L = cholesky(P, lower=True)
    return solve_triangular(L, np.eye(P.shape[0]), lower=True)


def solve_window(
    model: LinearModel,
    ys: np.ndarray,
    us: np.ndarray,
    arrival: ArrivalState,
    cfg: MheConfig,
) -> WindowSolution:
    """Exact minimizer of one window's quadratic cost.

    ``ys`` holds the N+1 window measurements, ``us`` the N inputs inside the
    window (shape (N, 0) for input-free systems).
    """
    N = cfg.N
    n_x, n_y = model.n_x, model.n_y
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    us = np.asarray(us, dtype=float).reshape(N, model.n_u) if model.n_u else np.zeros((N, 0))
    if ys.shape != (N + 1, n_y):
        raise InvalidArgumentError(f"expected {N + 1} measurements of dimension {n_y}")

    R_s = _sqrt_weight(cfg.R)
    Q_s = _sqrt_weight(cfg.Q)
    try:
        W_s = _arrival_sqrt_weight(arrival.P)
    except np.linalg.LinAlgError as exc:
        raise SingularWindowError(f"arrival covariance not positive definite: {exc}")

    n_var = (N + 1) * n_x
    n_rows = n_x + (N + 1) * n_y + N * n_x
    M = np.zeros((n_rows, n_var))
    b = np.zeros(n_rows)

    # Arrival block: W_s (x_0 - x_bar).
    M[:n_x, :n_x] = W_s
    b[:n_x] = W_s @ arrival.x_bar

    # Measurement blocks: R_s (y_k - C x_k) for k = 0..N.
    RC = R_s @ model.C
    for k in range(N + 1):
        r0 = n_x + k * n_y
        M[r0 : r0 + n_y, k * n_x : (k + 1) * n_x] = RC
        b[r0 : r0 + n_y] = R_s @ ys[k]

    # Dynamics blocks: Q_s (x_{k+1} - A x_k - B u_k) for k = 0..N-1.
    QA = Q_s @ model.A
    row0 = n_x + (N + 1) * n_y
    for k in range(N):
        r0 = row0 + k * n_x
        M[r0 : r0 + n_x, k * n_x : (k + 1) * n_x] = -QA
        M[r0 : r0 + n_x, (k + 1) * n_x : (k + 2) * n_x] = Q_s
        if model.n_u:
            b[r0 : r0 + n_x] = Q_s @ (model.B @ us[k])

    z, _, rank, _ = lstsq(M, b, lapack_driver="gelsy")
    if rank < n_var:
        raise SingularWindowError(f"stacked system rank {rank} < {n_var}")
    residual = M @ z - b
    return WindowSolution(
        estimates=z.reshape(N + 1, n_x), stage_cost=float(residual @ residual)
    )


def riccati_update(
    model: LinearModel, P: np.ndarray, Q_cov: np.ndarray, R_cov: np.ndarray
) -> np.ndarray:
    """One covariance step of the Kalman-filter recursion:

        A P A^T - A P C^T (C P C^T + R)^{-1} C P A^T + Q

    symmetrized as (M + M^T)/2.
    """
    A, C = model.A, model.C
    P = np.atleast_2d(np.asarray(P, dtype=float))
    innovation = C @ P @ C.T + R_cov
    APC = A @ P @ C.T
    try:
        gain = np.linalg.solve(innovation, APC.T)
    except np.linalg.LinAlgError as exc:
        raise SingularInnovationError(f"innovation matrix singular: {exc}")
    out = A @ P @ A.T - APC @ gain + Q_cov
    return (out + out.T) / 2


def run_trajectory(
    model: LinearModel,
    measurements: np.ndarray,
    inputs: np.ndarray,
    cfg: MheConfig,
) -> tuple[np.ndarray, float]:
    """Sweep the estimator across a full measurement record.

    Windows slide over t = N..T. The first window supplies the estimates for
    indices 0..N; each later window commits the newest state. After each
    solve the arrival prior advances: the mean by propagating the window's
    oldest estimate through the model, the covariance by one recursion step.
    Returns the committed estimates for 0..T and the accumulated window
    costs.
    """
    ys = np.atleast_2d(np.asarray(measurements, dtype=float))
    T = ys.shape[0] - 1
    N = cfg.N
    if T < N:
        raise InvalidArgumentError(f"record length {T} is shorter than the horizon {N}")
    us = (
        np.asarray(inputs, dtype=float).reshape(T, model.n_u)
        if model.n_u
        else np.zeros((T, 0))
    )

    estimates = np.zeros((T + 1, model.n_x))
    arrival = ArrivalState(cfg.x0_guess, cfg.P0)
    total_cost = 0.0
    for t in range(N, T + 1):
        try:
            sol = solve_window(model, ys[t - N : t + 1], us[t - N : t], arrival, cfg)
        except SingularWindowError as exc:
            raise SingularWindowError(str(exc), window=t) from exc
        total_cost += sol.stage_cost
        if t == N:
            estimates[: N + 1] = sol.estimates
        else:
            estimates[t] = sol.estimates[-1]
        oldest = sol.estimates[0]
        u_oldest = us[t - N] if model.n_u else np.zeros(0)
        x_bar = model.A @ oldest + (model.B @ u_oldest if model.n_u else 0.0)
        try:
            P_next = riccati_update(model, arrival.P, cfg.Q, cfg.R)
        except SingularInnovationError as exc:
            raise SingularInnovationError(str(exc), window=t) from exc
        arrival = ArrivalState(x_bar, P_next)
    return estimates, float(total_cost)

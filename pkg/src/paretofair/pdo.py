"""Bilevel Pareto descent.

Each outer step solves the inner min-norm problem over the simplex for the
current gradient matrix, takes the resulting convex combination ``d = G alpha``
as a common descent direction and moves ``w <- w - eta * d``.  A zero ``d``
certifies Pareto stationarity.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, UsageError
from .objectives import (
    GradientMatrix,
    ObjectiveBundle,
    as_parameter_vector,
    evaluate,
    evaluate_with_gradients,
)
from .simplex import solve_inner

log = logging.getLogger(__name__)


@dataclass
class PdoConfig:
    eta: float = 0.1
    rho: float | str = "auto"
    K: int = 100
    T: int = 1000
    stationarity_tol: float = 1e-6
    normalize_gradients: bool = True
    warm_start_alpha: bool = True
    record_every: int = 1
    backtrack: bool = False
    inner_tol: float = 1e-12
    inner_early_exit: bool = True

    def __post_init__(self):
        if not self.eta > 0:
            raise UsageError(f"eta must be positive, got {self.eta}")
        if self.rho != "auto" and not float(self.rho) > 0:
            raise UsageError(f"rho must be positive or 'auto', got {self.rho}")
        for name in ("K", "T", "record_every"):
            if int(getattr(self, name)) < 1:
                raise UsageError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.stationarity_tol < 0:
            raise UsageError("stationarity_tol must be nonnegative")


@dataclass
class TrajectoryPoint:
    iteration: int
    w: np.ndarray
    objective_values: np.ndarray
    alpha: np.ndarray | None
    direction_norm: float
    mode: str = "main"
    kl_value: float | None = None


@dataclass
class RunResult:
    w: np.ndarray
    trajectory: list[TrajectoryPoint] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def psi(values, alpha) -> float:
    """Weighted objective sum, sum_i alpha_i h_i."""
    values = np.asarray(values, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if values.shape != alpha.shape:
        raise UsageError(f"values {values.shape} and weights {alpha.shape} differ in shape")
    return float(values @ alpha)


def descent_direction(G, alpha) -> np.ndarray:
    cols = G.columns if isinstance(G, GradientMatrix) else np.asarray(G, dtype=float)
    return cols @ np.asarray(alpha, dtype=float)


def is_pareto_stationary(G, tol: float = 1e-6, K: int = 2000, rho="auto") -> tuple[bool, float]:
    """Whether some simplex combination of the columns has norm <= tol.

    Returns the flag and the achieved minimum norm found by the inner solver.
    """
    if tol < 0:
        raise UsageError("tol must be nonnegative")
    report = solve_inner(G, None, rho=rho, K=K)
    achieved = float(np.sqrt(report.phi_value))
    return achieved <= tol, achieved


def _inner(cols: np.ndarray, alpha: np.ndarray | None, config: PdoConfig):
    return solve_inner(
        cols,
        alpha,
        rho=config.rho,
        K=config.K,
        tol=config.inner_tol,
        early_exit=config.inner_early_exit,
    )


def _backtracked_step(bundle, w, d, h, eta, max_halvings=30):
    """Halve eta until no objective increases; returns the accepted point."""
    for _ in range(max_halvings):
        w_new = w - eta * d
        if np.all(evaluate(bundle, w_new) <= h):
            return w_new
        eta *= 0.5
    return w - eta * d


def run_pdo(bundle: ObjectiveBundle, w0, config: PdoConfig | None = None) -> RunResult:
    config = config or PdoConfig()
    w = as_parameter_vector(w0, bundle.d).copy()
    alpha = None
    result = RunResult(w=w)

    for t in range(config.T + 1):
        try:
            h, G, _ = evaluate_with_gradients(bundle, w, config.normalize_gradients)
        except NumericError as exc:
            raise NumericError(f"iteration {t}: {exc}") from exc

        start = alpha if config.warm_start_alpha else None
        alpha = _inner(G.columns, start, config).weights
        d = G.columns @ alpha
        dnorm = float(np.linalg.norm(d))
        stationary = dnorm <= config.stationarity_tol

        if t % config.record_every == 0 or stationary or t == config.T:
            result.trajectory.append(TrajectoryPoint(t, w.copy(), h, alpha.copy(), dnorm))
        result.iterations = t
        if stationary:
            result.converged = True
            break
        if t == config.T:
            break

        if config.backtrack:
            w = _backtracked_step(bundle, w, d, h, config.eta)
        else:
            w = w - config.eta * d

    result.w = w
    log.debug("pdo finished after %d iterations (converged=%s)", result.iterations, result.converged)
    return result

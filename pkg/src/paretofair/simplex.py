"""Min-norm weights over the probability simplex.

The inner problem is ``min_{alpha in simplex} Phi(alpha) = |G alpha|^2`` and is
solved by projected gradient descent, one Euclidean projection per step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, UsageError
from .objectives import GradientMatrix

_CLAMP = 1e-12


def _columns(G) -> np.ndarray:
    if isinstance(G, GradientMatrix):
        return G.columns
    G = np.asarray(G, dtype=float)
    if G.ndim != 2:
        raise UsageError(f"gradient matrix must be 2-D, got shape {G.shape}")
    return G


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto {x : x >= 0, sum(x) = 1}.

    Sort-and-threshold: find the largest k with u_k > (sum_{j<=k} u_j - 1) / k
    over the descending sort u, then shift and clip.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise UsageError("cannot project an empty vector onto the simplex")
    if not np.all(np.isfinite(v)):
        raise NumericError("simplex projection received non-finite entries")
    if np.all(v >= 0) and abs(v.sum() - 1.0) <= _CLAMP:
        return v.copy()
    # The projection ignores a common shift; centering keeps the threshold exact.
    v = v - v.max()
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    r = np.flatnonzero(u - css / k > 0)[-1]
    x = np.maximum(v - css[r] / (r + 1), 0.0)
    x[x < _CLAMP] = 0.0
    return x


def phi(G, alpha) -> float:
    d = _columns(G) @ np.asarray(alpha, dtype=float)
    return float(d @ d)


def auto_step(G) -> float:
    """Inner step 1 / (2 |G|_F^2 + eps); |G|_F^2 bounds the top eigenvalue of G^T G."""
    cols = _columns(G)
    return 1.0 / (2.0 * float(np.sum(cols * cols)) + 1e-12)


@dataclass
class InnerSolveReport:
    weights: np.ndarray
    phi_value: float
    iterations_run: int
    phi_trace: list[float] = field(default_factory=list)


def solve_inner(
    G,
    alpha0=None,
    rho: float | str = "auto",
    K: int = 100,
    tol: float = 1e-12,
    min_improvement: float = 1e-14,
    early_exit: bool = True,
) -> InnerSolveReport:
    """Run K projected-gradient steps alpha <- P(alpha - rho * 2 G^T G alpha).

    With ``early_exit`` the loop stops once Phi <= tol or a step improves Phi
    by less than ``min_improvement``; ``iterations_run`` records where.
    """
    cols = _columns(G)
    m = cols.shape[1]
    if K < 1:
        raise UsageError(f"inner iteration count K must be >= 1, got {K}")
    if rho == "auto":
        rho = auto_step(cols)
    rho = float(rho)
    if not rho > 0:
        raise UsageError(f"inner step size must be positive, got {rho}")

    alpha = np.full(m, 1.0 / m) if alpha0 is None else project_simplex(alpha0)
    if alpha.size != m:
        raise UsageError(f"alpha0 has length {alpha.size}, gradient matrix has {m} columns")

    with np.errstate(over="ignore", invalid="ignore"):
        Q = cols.T @ cols
        cur = float(alpha @ Q @ alpha)
    if not np.isfinite(cur):
        raise NumericError("inner objective is non-finite at the start; rescale G or try a smaller rho")
    trace = [cur]
    k = 0
    if not (early_exit and cur <= tol):
        for k in range(1, K + 1):
            with np.errstate(over="ignore", invalid="ignore"):
                step = alpha - rho * 2.0 * (Q @ alpha)
            if not np.all(np.isfinite(step)):
                raise NumericError(f"inner step became non-finite at step {k}; try a smaller rho")
            alpha = project_simplex(step)
            with np.errstate(over="ignore", invalid="ignore"):
                nxt = float(alpha @ Q @ alpha)
            if not np.isfinite(nxt):
                raise NumericError(f"inner objective became non-finite at step {k}; try a smaller rho")
            trace.append(nxt)
            improvement = cur - nxt
            cur = nxt
            if early_exit and (cur <= tol or 0 <= improvement < min_improvement):
                break
    return InnerSolveReport(weights=alpha, phi_value=max(cur, 0.0), iterations_run=k, phi_trace=trace)

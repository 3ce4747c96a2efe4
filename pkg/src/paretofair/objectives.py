"""Objective vectors h(w) = [h_1(w), ..., h_m(w)] and their gradient matrices.

An :class:`ObjectiveBundle` is an ordered, immutable collection of scalar
objectives over a shared parameter vector ``w`` of length ``d``.  The
optimizers only ever talk to a bundle through :meth:`ObjectiveBundle.values`
and :meth:`ObjectiveBundle.values_and_jacobian`; bundles whose objectives share
work (the fairness bundles) override the latter to compute everything in one
pass over the data.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import numpy as np

from .errors import NumericError, UsageError


class Objective(Protocol):
    name: str

    def value(self, w: np.ndarray) -> float: ...

    def grad(self, w: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class FunctionObjective:
    """Wrap a pair of plain callables as an :class:`Objective`."""

    value_fn: Callable[[np.ndarray], float]
    grad_fn: Callable[[np.ndarray], np.ndarray]
    name: str = "objective"

    def value(self, w):
        return float(self.value_fn(w))

    def grad(self, w):
        return np.asarray(self.grad_fn(w), dtype=float)


@dataclass(frozen=True)
class GradientMatrix:
    """d x m matrix whose column i is the gradient of objective i.

    When ``normalized`` is set, every nonzero column has unit Euclidean norm
    and zero columns are left at zero.
    """

    columns: np.ndarray
    normalized: bool = False

    @property
    def d(self) -> int:
        return self.columns.shape[0]

    @property
    def m(self) -> int:
        return self.columns.shape[1]


def normalize_columns(G: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(G, axis=0)
    scale = np.where(norms > 0, norms, 1.0)
    return G / scale


class ObjectiveBundle:
    """Ordered collection of ``m`` objectives over ``d`` parameters."""

    def __init__(self, objectives: Sequence[Objective], dim: int):
        if len(objectives) < 1:
            raise UsageError("an objective bundle needs at least one objective")
        if dim < 1:
            raise UsageError(f"parameter dimension must be >= 1, got {dim}")
        self._objectives = tuple(objectives)
        self._dim = int(dim)

    @property
    def m(self) -> int:
        return len(self._objectives)

    @property
    def d(self) -> int:
        return self._dim

    @property
    def names(self) -> list[str]:
        return [obj.name for obj in self._objectives]

    def __len__(self):
        return self.m

    def __getitem__(self, i: int) -> Objective:
        return self._objectives[i]

    def values(self, w: np.ndarray) -> np.ndarray:
        return np.array([obj.value(w) for obj in self._objectives], dtype=float)

    def values_and_jacobian(self, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(h(w), G)`` with ``G`` the raw d x m gradient matrix."""
        G = np.empty((self._dim, self.m))
        for i, obj in enumerate(self._objectives):
            G[:, i] = obj.grad(w)
        return self.values(w), G


def as_parameter_vector(w, d: int | None = None) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size < 1:
        raise UsageError(f"parameter vector must be 1-D and non-empty, got shape {w.shape}")
    if d is not None and w.size != d:
        raise UsageError(f"parameter vector has length {w.size}, bundle expects {d}")
    if not np.all(np.isfinite(w)):
        raise UsageError("parameter vector contains non-finite entries")
    return w


def _check_values(h: np.ndarray) -> None:
    bad = np.flatnonzero(~np.isfinite(h))
    if bad.size:
        raise NumericError(f"objective {bad[0]} returned a non-finite value ({h[bad[0]]})")


def _check_gradients(G: np.ndarray) -> None:
    bad = np.flatnonzero(~np.all(np.isfinite(G), axis=0))
    if bad.size:
        raise NumericError(f"objective {bad[0]} returned a non-finite gradient entry")


def evaluate(bundle: ObjectiveBundle, w) -> np.ndarray:
    """Objective values h(w) as a length-m vector."""
    w = as_parameter_vector(w, bundle.d)
    h = np.asarray(bundle.values(w), dtype=float)
    _check_values(h)
    return h


def gradient_matrix(bundle: ObjectiveBundle, w, normalize: bool = True) -> GradientMatrix:
    return evaluate_with_gradients(bundle, w, normalize)[1]


def evaluate_with_gradients(
    bundle: ObjectiveBundle, w, normalize: bool = True
) -> tuple[np.ndarray, GradientMatrix, np.ndarray]:
    """Values, (optionally normalized) gradient matrix and the raw matrix in one call."""
    w = as_parameter_vector(w, bundle.d)
    h, G = bundle.values_and_jacobian(w)
    h = np.asarray(h, dtype=float)
    _check_values(h)
    _check_gradients(G)
    cols = normalize_columns(G) if normalize else G
    return h, GradientMatrix(cols, normalized=normalize), G


def finite_difference_check(objective: Objective, w, step: float = 1e-6) -> float:
    """Max over coordinates of |central difference - analytic| / max(1, |analytic|)."""
    if step <= 0:
        raise UsageError("finite-difference step must be positive")
    w = np.array(w, dtype=float)
    g = np.asarray(objective.grad(w), dtype=float)
    worst = 0.0
    for j in range(w.size):
        wp = w.copy()
        wm = w.copy()
        wp[j] += step
        wm[j] -= step
        fd = (objective.value(wp) - objective.value(wm)) / (2 * step)
        worst = max(worst, abs(fd - g[j]) / max(1.0, abs(g[j])))
    return worst


# --- synthetic benchmark -----------------------------------------------------


@dataclass(frozen=True)
class GaussianPairParams:
    nu: np.ndarray
    s: float

    def __post_init__(self):
        nu = np.asarray(self.nu, dtype=float)
        if nu.ndim != 1 or not np.all(np.isfinite(nu)):
            raise UsageError("nu must be a finite 1-D vector")
        if not self.s > 0:
            raise UsageError(f"spread s must be positive, got {self.s}")
        object.__setattr__(self, "nu", nu)


@dataclass(frozen=True)
class _GaussianWell:
    center: np.ndarray
    s: float
    name: str

    def value(self, w):
        r = np.asarray(w, dtype=float) - self.center
        return float(1.0 - np.exp(-(r @ r) / self.s**2))

    def grad(self, w):
        r = np.asarray(w, dtype=float) - self.center
        return (2.0 / self.s**2) * r * np.exp(-(r @ r) / self.s**2)


def make_gaussian_pair(params: GaussianPairParams) -> ObjectiveBundle:
    """Two inverted Gaussian wells centred at +nu and -nu.

    h_1(w) = 1 - exp(-|w - nu|^2 / s^2),  h_2(w) = 1 - exp(-|w + nu|^2 / s^2).
    Its Pareto set is the segment {t * nu : t in [-1, 1]}.
    """
    return ObjectiveBundle(
        [
            _GaussianWell(params.nu, params.s, "h1"),
            _GaussianWell(-params.nu, params.s, "h2"),
        ],
        dim=params.nu.size,
    )

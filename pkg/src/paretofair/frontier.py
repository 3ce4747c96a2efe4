"""Dominance, non-dominated filtering and merging of optimizer trajectories."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DataError, UsageError
from .pdo import RunResult, TrajectoryPoint


def _finite_pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise UsageError(f"cannot compare vectors of shapes {a.shape} and {b.shape}")
    if np.isnan(a).any() or np.isnan(b).any():
        raise DataError("dominance test received NaN entries")
    return a, b


def dominates(a, b) -> bool:
    """a <= b everywhere and a < b somewhere (minimization)."""
    a, b = _finite_pair(a, b)
    return bool(np.all(a <= b) and np.any(a < b))


def non_dominated_filter(points) -> np.ndarray:
    """Indices (ascending) of points no other point dominates.

    Exact duplicates collapse to their first occurrence.  Points are visited in
    lexicographic order, so a point can only be dominated by one already
    visited; each candidate is checked against the current front only.
    """
    P = np.asarray(points, dtype=float)
    if P.size == 0:
        return np.empty(0, dtype=int)
    if P.ndim != 2:
        raise UsageError(f"points must form an n x m array, got shape {P.shape}")
    if np.isnan(P).any():
        raise DataError("non-dominated filter received NaN entries")

    # Stable lexsort keeps the first of any group of identical rows first.
    order = np.lexsort(P.T[::-1])
    front = np.empty(P.shape[0], dtype=int)
    front_vals = np.empty_like(P)
    k = 0
    for i in order:
        p = P[i]
        # A front member <= p either dominates p or is an earlier duplicate of it.
        if k and np.any(np.all(front_vals[:k] <= p, axis=1)):
            continue
        front[k] = i
        front_vals[k] = p
        k += 1
    return np.sort(front[:k])


@dataclass(frozen=True)
class FrontierPoint:
    values: np.ndarray
    run: str
    iteration: int
    w: np.ndarray | None = None
    mode: str | None = None


@dataclass
class FrontierSet:
    points: list[FrontierPoint] = field(default_factory=list)
    objective_dim: int = 0

    def __len__(self):
        return len(self.points)

    def values(self) -> np.ndarray:
        if not self.points:
            return np.empty((0, self.objective_dim))
        return np.vstack([p.values for p in self.points])

    def filtered(self) -> "FrontierSet":
        keep = non_dominated_filter(self.values()) if self.points else []
        return FrontierSet([self.points[i] for i in keep], self.objective_dim)

    def sorted(self) -> "FrontierSet":
        """Canonical order: lexicographic in the objectives, then by source tag."""
        key = lambda p: (tuple(p.values), p.run, p.iteration)
        return FrontierSet(sorted(self.points, key=key), self.objective_dim)


def merge_runs(runs: Sequence[RunResult | Sequence[TrajectoryPoint]], tags: Sequence[str] | None = None) -> FrontierSet:
    """Pool every recorded point of every run and keep the non-dominated ones."""
    tags = list(tags) if tags is not None else [f"run{i}" for i in range(len(runs))]
    if len(tags) != len(runs):
        raise UsageError(f"{len(tags)} tags for {len(runs)} runs")
    pool: list[FrontierPoint] = []
    dim = None
    for tag, run in zip(tags, runs):
        trajectory = run.trajectory if isinstance(run, RunResult) else run
        for point in trajectory:
            values = np.asarray(point.objective_values, dtype=float)
            if dim is None:
                dim = values.size
            elif values.size != dim:
                raise UsageError(f"run {tag!r} has {values.size} objectives, expected {dim}")
            pool.append(FrontierPoint(values, tag, point.iteration, point.w, point.mode))
    # Pool in tag order so a duplicate shared by several runs keeps the same tag
    # whatever order the runs arrive in.
    pool.sort(key=lambda p: (p.run, p.iteration))
    return FrontierSet(pool, dim or 0).filtered()

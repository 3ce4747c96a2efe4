"""Linear classifiers and fairness notions expressed as objective vectors.

A fairness notion becomes a bundle whose first objective is the total
empirical loss and whose remaining objectives penalize, for every pair of
groups, the gap between the two groups' losses on a chosen subset:

* ``eo``  (equality of opportunity): positives of each group;
* ``eod`` (equalized odds): positives, then negatives, of each group;
* ``dm``  (disparate mistreatment): all samples of each group.

All objectives share one pass over the data.  Each per-sample loss derivative
is scattered into the subsets with a dense weight matrix, so the whole
Jacobian costs two matrix products.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .data_io import GroupedDataset
from .errors import ConfigurationError, UsageError
from .objectives import ObjectiveBundle, as_parameter_vector

MODEL_KINDS = ("logistic", "smooth-hinge")
NOTIONS = ("eo", "eod", "dm")
PENALTIES = ("squared", "abs")


# --- linear models -----------------------------------------------------------


@dataclass(frozen=True)
class LinearModelSpec:
    """``fit_intercept`` marks the last feature column as an unpenalized intercept."""

    kind: str = "smooth-hinge"
    smoothing: float = 0.5
    fit_intercept: bool = True
    l2: float = 1e-4

    def __post_init__(self):
        if self.kind == "svm":
            object.__setattr__(self, "kind", "smooth-hinge")
        if self.kind not in MODEL_KINDS:
            raise UsageError(f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}")
        if self.kind == "smooth-hinge" and not self.smoothing > 0:
            raise UsageError(f"smooth-hinge needs a positive smoothing width, got {self.smoothing}")
        if self.l2 < 0:
            raise UsageError(f"l2 must be nonnegative, got {self.l2}")

    def ridge_mask(self, d: int) -> np.ndarray:
        mask = np.ones(d)
        if self.fit_intercept:
            mask[-1] = 0.0
        return mask


def margin_loss(kind: str, z, smoothing: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample loss of the margin z = y * w.x and its derivative in z.

    The smooth hinge is 1 - z below 1 - delta, zero above 1 + delta, and the
    quadratic (1 + delta - z)^2 / (4 delta) in between.
    """
    z = np.asarray(z, dtype=float)
    if kind == "logistic":
        loss = np.logaddexp(0.0, -z)
        # d/dz log(1 + e^{-z}) = -sigmoid(-z), computed stably.
        return loss, -np.exp(-np.logaddexp(0.0, z))
    if kind in ("smooth-hinge", "svm"):
        delta = smoothing
        gap = 1.0 + delta - z
        quad = np.abs(1.0 - z) < delta
        loss = np.where(z >= 1.0 + delta, 0.0, np.where(quad, gap * gap / (4 * delta), 1.0 - z))
        dloss = np.where(z >= 1.0 + delta, 0.0, np.where(quad, -gap / (2 * delta), -1.0))
        return loss, dloss
    raise UsageError(f"unknown model kind {kind!r}")


def _ridge(spec: LinearModelSpec, w: np.ndarray) -> tuple[float, np.ndarray]:
    masked = spec.ridge_mask(w.size) * w
    return 0.5 * spec.l2 * float(masked @ masked), spec.l2 * masked


def model_loss_grad(spec: LinearModelSpec, w, dataset: GroupedDataset, subset=None) -> tuple[float, np.ndarray]:
    """Mean loss over ``subset`` (all rows when None) plus the ridge term."""
    w = as_parameter_vector(w, dataset.d)
    idx = np.arange(dataset.n) if subset is None else np.asarray(subset)
    if idx.size == 0:
        raise UsageError("cannot evaluate the loss on an empty subset")
    X = dataset.X[idx]
    y = dataset.y[idx]
    loss, dloss = margin_loss(spec.kind, y * (X @ w), spec.smoothing)
    r_val, r_grad = _ridge(spec, w)
    return float(loss.mean()) + r_val, X.T @ (dloss * y) / idx.size + r_grad


# --- group partition ---------------------------------------------------------


@dataclass(frozen=True)
class GroupPartition:
    names: tuple[str, ...]
    groups: tuple[np.ndarray, ...]
    positives: tuple[np.ndarray, ...]
    negatives: tuple[np.ndarray, ...]

    @property
    def c(self) -> int:
        return len(self.names)

    def subsets(self, notion: str) -> list[tuple[str, tuple[np.ndarray, ...]]]:
        """The (sign tag, per-group index sets) families a notion compares."""
        if notion == "eo":
            return [("+", self.positives)]
        if notion == "eod":
            return [("+", self.positives), ("-", self.negatives)]
        if notion == "dm":
            return [("", self.groups)]
        raise UsageError(f"unknown fairness notion {notion!r}; expected one of {NOTIONS}")


def partition_groups(dataset: GroupedDataset, notion: str | None = None) -> GroupPartition:
    """Index sets per group and label sign, in ascending row order.

    With a ``notion`` every subset it needs is checked to be non-empty.
    """
    groups, pos, neg = [], [], []
    for k in range(dataset.c):
        members = np.flatnonzero(dataset.groups == k)
        groups.append(members)
        pos.append(members[dataset.y[members] > 0])
        neg.append(members[dataset.y[members] < 0])
    part = GroupPartition(dataset.group_names, tuple(groups), tuple(pos), tuple(neg))
    if notion is not None:
        for sign, family in part.subsets(notion):
            for name, members in zip(part.names, family):
                if members.size == 0:
                    label = {"+": "positive", "-": "negative", "": "any"}[sign]
                    raise ConfigurationError(
                        f"notion {notion!r} needs {label} samples in group {name!r}, but there are none"
                    )
    return part


# --- objective bundles -------------------------------------------------------


def _penalty(kind: str, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if kind == "squared":
        return 0.5 * z * z, z
    if kind == "abs":
        return np.abs(z), np.sign(z)
    raise UsageError(f"unknown penalty {kind!r}; expected one of {PENALTIES}")


@dataclass(frozen=True)
class _Member:
    """Single objective view into a jointly evaluated bundle."""

    bundle: ObjectiveBundle
    index: int
    name: str

    def value(self, w):
        return float(self.bundle.values(w)[self.index])

    def grad(self, w):
        return self.bundle.values_and_jacobian(w)[1][:, self.index]


class FairnessBundle(ObjectiveBundle):
    """Total loss followed by pairwise penalized group-loss gaps."""

    def __init__(self, notion: str, spec: LinearModelSpec, dataset: GroupedDataset, penalty: str = "squared"):
        if penalty not in PENALTIES:
            raise UsageError(f"unknown penalty {penalty!r}; expected one of {PENALTIES}")
        part = partition_groups(dataset, notion)
        self.notion = notion
        self.spec = spec
        self.penalty = penalty
        self.dataset = dataset
        self.partition = part

        # Column 0 is the whole sample; the rest are the per-group subsets.
        subsets = [np.arange(dataset.n)]
        pairs, names = [], ["loss"]
        for sign, family in part.subsets(notion):
            base = len(subsets)
            subsets.extend(family)
            for i, j in combinations(range(part.c), 2):
                pairs.append((base + i, base + j))
                names.append(f"{notion}{sign}[{part.names[i]},{part.names[j]}]")
        weights = np.zeros((dataset.n, len(subsets)))
        for s, members in enumerate(subsets):
            weights[members, s] = 1.0 / members.size
        self._weights = weights
        self._pairs = np.array(pairs, dtype=int).reshape(-1, 2)
        super().__init__([_Member(self, i, name) for i, name in enumerate(names)], dataset.d)

    def subset_losses(self, w) -> tuple[np.ndarray, np.ndarray]:
        """Mean loss of every subset (without ridge) and the d x k gradient matrix."""
        X, y = self.dataset.X, self.dataset.y
        loss, dloss = margin_loss(self.spec.kind, y * (X @ w), self.spec.smoothing)
        values = self._weights.T @ loss
        grads = X.T @ (self._weights * (dloss * y)[:, None])
        return values, grads

    def values_and_jacobian(self, w):
        w = np.asarray(w, dtype=float)
        values, grads = self.subset_losses(w)
        r_val, r_grad = _ridge(self.spec, w)
        a, b = self._pairs[:, 0], self._pairs[:, 1]
        # The ridge term is shared by every subset loss and cancels in the gaps.
        pen, dpen = _penalty(self.penalty, values[a] - values[b])
        h = np.concatenate([[values[0] + r_val], pen])
        G = np.column_stack([grads[:, 0] + r_grad, (grads[:, a] - grads[:, b]) * dpen])
        return h, G

    def values(self, w):
        return self.values_and_jacobian(w)[0]


def build_objectives(notion: str, spec: LinearModelSpec, dataset: GroupedDataset,
                     penalty: str = "squared") -> FairnessBundle:
    if notion not in NOTIONS:
        raise UsageError(f"unknown fairness notion {notion!r}; expected one of {NOTIONS}")
    return FairnessBundle(notion, spec, dataset, penalty)


class LossBundle(ObjectiveBundle):
    """The total loss alone, for an unconstrained baseline."""

    def __init__(self, spec: LinearModelSpec, dataset: GroupedDataset):
        self.spec = spec
        self.dataset = dataset
        super().__init__([_Member(self, 0, "loss")], dataset.d)

    def values_and_jacobian(self, w):
        value, grad = model_loss_grad(self.spec, w, self.dataset)
        return np.array([value]), grad[:, None]

    def values(self, w):
        return self.values_and_jacobian(w)[0]


# --- metrics -----------------------------------------------------------------


def predict(w, X) -> np.ndarray:
    """sign(X w) with sign(0) = +1."""
    return np.where(np.asarray(X, dtype=float) @ np.asarray(w, dtype=float) >= 0, 1.0, -1.0)


@dataclass
class FairnessMetrics:
    """Per-group rates; NaN marks a rate whose denominator is empty."""

    group_names: tuple[str, ...]
    accuracy: float
    deo: float
    group_accuracy: np.ndarray
    group_tpr: np.ndarray
    group_fpr: np.ndarray
    group_support: np.ndarray
    group_positives: np.ndarray
    undefined: list[str] = field(default_factory=list)

    @property
    def error(self) -> float:
        return 1.0 - self.accuracy

    def to_dict(self) -> dict:
        nan_to_none = lambda a: [None if np.isnan(v) else float(v) for v in a]
        return {
            "accuracy": self.accuracy,
            "error": self.error,
            "deo": self.deo,
            "groups": {
                name: {
                    "accuracy": nan_to_none([self.group_accuracy[k]])[0],
                    "tpr": nan_to_none([self.group_tpr[k]])[0],
                    "fpr": nan_to_none([self.group_fpr[k]])[0],
                    "support": int(self.group_support[k]),
                    "positives": int(self.group_positives[k]),
                }
                for k, name in enumerate(self.group_names)
            },
            "undefined": list(self.undefined),
        }


def _rate(hits: int, total: int) -> float:
    return hits / total if total else float("nan")


def evaluate_metrics(w, dataset: GroupedDataset) -> FairnessMetrics:
    w = as_parameter_vector(w, dataset.d)
    pred = predict(w, dataset.X)
    y = dataset.y
    c = dataset.c
    acc, tpr, fpr = np.empty(c), np.empty(c), np.empty(c)
    support, positives = np.zeros(c, dtype=int), np.zeros(c, dtype=int)
    undefined = []
    for k, name in enumerate(dataset.group_names):
        mask = dataset.groups == k
        pos = mask & (y > 0)
        neg = mask & (y < 0)
        support[k], positives[k] = mask.sum(), pos.sum()
        acc[k] = _rate(int(np.sum(pred[mask] == y[mask])), int(mask.sum()))
        tpr[k] = _rate(int(np.sum(pred[pos] > 0)), int(pos.sum()))
        fpr[k] = _rate(int(np.sum(pred[neg] > 0)), int(neg.sum()))
        if np.isnan(tpr[k]):
            undefined.append(f"tpr[{name}]")
        if np.isnan(fpr[k]):
            undefined.append(f"fpr[{name}]")
    defined = tpr[~np.isnan(tpr)]
    deo = float(defined.max() - defined.min()) if defined.size >= 2 else 0.0
    return FairnessMetrics(
        dataset.group_names, float(np.mean(pred == y)), deo, acc, tpr, fpr, support, positives, undefined
    )

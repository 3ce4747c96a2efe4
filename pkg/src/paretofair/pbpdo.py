"""Preference-based Pareto descent: steer toward pi_1 h_1 = ... = pi_m h_m.

The mismatch from the preference line is measured by the KL divergence between
``softmax(pi * h)`` and the uniform distribution.  Its gradient is a linear
combination of the objective gradients, so it can be appended to the bundle as
one more objective.  Each iteration picks the descent source:

* ``main``: the KL gradient is already small, descend the original bundle;
* ``preference``: descend the bundle augmented with the KL objective;
* ``kl-only``: the chosen direction is negligible next to the KL gradient
  (the iterate sits on the frontier short of the target), so step along the
  KL gradient alone.  Successive kl-only steps slide along the frontier.

With ``guard_stalls`` (default) the kl-only switch is only taken when the
original objectives are themselves stationary.  If the augmented bundle is
stationary only because the KL gradient opposes every objective gradient,
the run descends the original objectives instead; stepping along the KL
gradient there moves away from the frontier.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import NumericError, UsageError
from .objectives import ObjectiveBundle, as_parameter_vector, normalize_columns
from .pdo import PdoConfig, RunResult, TrajectoryPoint, _inner

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PreferenceVector:
    pi: np.ndarray

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        if pi.ndim != 1 or pi.size < 1:
            raise UsageError("preference vector must be a non-empty 1-D vector")
        if not np.all(np.isfinite(pi)) or np.any(pi <= 0):
            raise UsageError(f"preference entries must be finite and strictly positive, got {pi.tolist()}")
        object.__setattr__(self, "pi", pi)

    @property
    def p(self) -> np.ndarray:
        """Direction of the preference line in objective space."""
        return 1.0 / self.pi

    @property
    def m(self) -> int:
        return self.pi.size

    @classmethod
    def parse(cls, text: str) -> "PreferenceVector":
        try:
            values = [float(tok) for tok in text.split(",")]
        except ValueError as exc:
            raise UsageError(f"cannot parse preference vector {text!r}") from exc
        return cls(np.array(values))


@dataclass
class PreferenceState:
    sigma: np.ndarray
    kl_value: float
    lam: np.ndarray
    kl_gradient: np.ndarray


def _log_softmax(values, pref: PreferenceVector) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape != pref.pi.shape:
        raise UsageError(f"{values.size} objective values for a preference of length {pref.m}")
    z = pref.pi * values
    z = z - z.max()
    return z - np.log(np.exp(z).sum())


def softmax_scores(values, pref: PreferenceVector) -> np.ndarray:
    return np.exp(_log_softmax(values, pref))


def _kl(logsig: np.ndarray) -> float:
    sigma = np.exp(logsig)
    return max(float(sigma @ (logsig + np.log(sigma.size))), 0.0)


def kl_objective(values, pref: PreferenceVector) -> float:
    """KL(softmax(pi * h) || uniform) = sum_i sigma_i log(m sigma_i)."""
    return _kl(_log_softmax(values, pref))


def kl_gradient(values, G, pref: PreferenceVector) -> PreferenceState:
    """Chain rule through the softmax: grad = sum_i lam_i g_i with
    lam_i = pi_i sigma_i (log(m sigma_i) - KL).

    ``G`` must hold the raw gradients of the same objectives, in the same
    order, as ``values``.
    """
    G = np.asarray(G, dtype=float)
    logsig = _log_softmax(values, pref)
    if G.ndim != 2 or G.shape[1] != pref.m:
        raise UsageError(f"gradient matrix shape {G.shape} does not match {pref.m} objectives")
    sigma = np.exp(logsig)
    kl = _kl(logsig)
    lam = pref.pi * sigma * (logsig + np.log(pref.m) - kl)
    return PreferenceState(sigma=sigma, kl_value=kl, lam=lam, kl_gradient=G @ lam)


@dataclass(frozen=True)
class KLObjective:
    """The KL steering objective as a standalone function of w."""

    bundle: ObjectiveBundle
    pref: PreferenceVector
    name: str = "kl"

    def value(self, w):
        return kl_objective(self.bundle.values(w), self.pref)

    def grad(self, w):
        h, G = self.bundle.values_and_jacobian(w)
        return kl_gradient(h, G, self.pref).kl_gradient


class AugmentedBundle(ObjectiveBundle):
    """The original bundle with the KL objective appended at index m."""

    def __init__(self, base: ObjectiveBundle, pref: PreferenceVector):
        if pref.m != base.m:
            raise UsageError(f"preference has length {pref.m}, bundle has {base.m} objectives")
        self.base = base
        self.pref = pref
        super().__init__([*(base[i] for i in range(base.m)), KLObjective(base, pref)], base.d)

    def values(self, w):
        h = self.base.values(w)
        return np.append(h, kl_objective(h, self.pref))

    def values_and_jacobian(self, w):
        h, G = self.base.values_and_jacobian(w)
        state = kl_gradient(h, G, self.pref)
        return np.append(h, state.kl_value), np.column_stack([G, state.kl_gradient])


def augmented_bundle(bundle: ObjectiveBundle, pref: PreferenceVector) -> AugmentedBundle:
    return AugmentedBundle(bundle, pref)


@dataclass
class PbpdoConfig(PdoConfig):
    eps1: float = 1e-2
    eps2: float = 1e-2
    kl_tol: float = 1e-6
    guard_stalls: bool = True

    def __post_init__(self):
        super().__post_init__()
        if not (self.eps1 > 0 and self.eps2 > 0):
            raise UsageError(f"eps1 and eps2 must be positive, got {self.eps1}, {self.eps2}")
        if self.kl_tol < 0:
            raise UsageError("kl_tol must be nonnegative")


def run_pbpdo(bundle: ObjectiveBundle, pref: PreferenceVector, w0, config: PbpdoConfig | None = None) -> RunResult:
    config = config or PbpdoConfig()
    if pref.m != bundle.m:
        raise UsageError(f"preference has length {pref.m}, bundle has {bundle.m} objectives")
    w = as_parameter_vector(w0, bundle.d).copy()
    alpha = None
    result = RunResult(w=w)

    for t in range(config.T + 1):
        h, G = bundle.values_and_jacobian(w)
        if not (np.all(np.isfinite(h)) and np.all(np.isfinite(G))):
            raise NumericError(f"iteration {t}: non-finite objective value or gradient")
        state = kl_gradient(h, G, pref)
        g_kl = state.kl_gradient
        kl_norm = float(np.linalg.norm(g_kl))

        if kl_norm <= config.eps1:
            mode = "main"
            cols = G
        else:
            mode = "preference"
            cols = np.column_stack([G, g_kl])
        if config.normalize_gradients:
            cols = normalize_columns(cols)

        start = alpha if (config.warm_start_alpha and alpha is not None and alpha.size == cols.shape[1]) else None
        alpha = _inner(cols, start, config).weights
        d = cols @ alpha
        dnorm = float(np.linalg.norm(d))
        step_alpha = alpha.copy()
        # Compare against the KL column as the inner solver saw it.
        unit_kl = config.normalize_gradients and mode == "preference"
        kl_scale = 1.0 if unit_kl else kl_norm
        # Written as a product so a zero KL gradient never divides.
        if dnorm <= config.eps2 * kl_scale:
            d_main = None
            if config.guard_stalls and mode == "preference":
                main_cols = normalize_columns(G) if config.normalize_gradients else G
                alpha_main = _inner(main_cols, None, config).weights
                d_main = main_cols @ alpha_main
            if d_main is not None and np.linalg.norm(d_main) > config.eps2 * kl_scale:
                mode = "main"
                alpha = alpha_main
                step_alpha = alpha.copy()
                d = d_main
                dnorm = float(np.linalg.norm(d))
            else:
                mode = "kl-only"
                d = g_kl
                dnorm = float(np.linalg.norm(d))
                step_alpha = None

        done = dnorm <= config.stationarity_tol and (
            state.kl_value <= config.kl_tol or kl_norm <= config.stationarity_tol
        )
        if t % config.record_every == 0 or done or t == config.T:
            result.trajectory.append(
                TrajectoryPoint(t, w.copy(), h, step_alpha, dnorm, mode=mode, kl_value=state.kl_value)
            )
        result.iterations = t
        if done:
            result.converged = True
            break
        if t == config.T:
            break
        w = w - config.eta * d

    result.w = w
    log.debug("pb-pdo finished after %d iterations (converged=%s)", result.iterations, result.converged)
    return result

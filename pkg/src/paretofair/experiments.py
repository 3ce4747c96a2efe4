"""Experiment orchestration shared by the command line and the acceptance suite.

A :class:`RunConfig` holds everything a run depends on; the functions here turn
it into datasets, objective bundles and optimizer runs.  Nothing in this module
writes files.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .data_io import GroupedDataset, load_split, load_train_test, resolve_schema
from .errors import UsageError
from .fairness import LinearModelSpec, LossBundle, build_objectives, evaluate_metrics
from .objectives import GaussianPairParams, ObjectiveBundle, make_gaussian_pair
from .pbpdo import PbpdoConfig, PreferenceVector, run_pbpdo
from .pdo import PdoConfig, RunResult, run_pdo

SYNTHETIC_NU = (1.0, 1.0)
SYNTHETIC_SPREAD = 1.5


@dataclass
class RunConfig:
    """Resolved settings of one run or sweep; round-trips through a plain dict."""

    data: str | None = None
    test: str | None = None
    schema: str = "adult_gender"
    notion: str = "eo"
    model: str = "svm"
    penalty: str = "squared"
    l2: float = 1e-4
    smoothing: float = 0.5
    prefs: list[str] = field(default_factory=list)
    eta: float = 0.05
    rho: Any = "auto"
    inner_steps: int = 100
    iters: int = 1000
    eps1: float = 1e-2
    eps2: float = 1e-2
    seed: int = 0
    out: str = "runs"
    synthetic: bool = False
    normalize_gradients: bool = True
    test_fraction: float = 0.3
    record_every: int = 1
    init_scale: float = 0.01
    workers: int = 1

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise UsageError(f"unknown config keys: {unknown}")
        return cls(**raw)

    def preferences(self) -> list[PreferenceVector]:
        return [PreferenceVector.parse(p) for p in self.prefs]

    def model_spec(self) -> LinearModelSpec:
        return LinearModelSpec(self.model, smoothing=self.smoothing, l2=self.l2)

    def pdo_config(self) -> PdoConfig:
        return PdoConfig(
            eta=self.eta, rho=self.rho, K=self.inner_steps, T=self.iters,
            normalize_gradients=self.normalize_gradients, record_every=self.record_every,
        )

    def pbpdo_config(self) -> PbpdoConfig:
        return PbpdoConfig(
            eta=self.eta, rho=self.rho, K=self.inner_steps, T=self.iters,
            normalize_gradients=self.normalize_gradients, record_every=self.record_every,
            eps1=self.eps1, eps2=self.eps2,
        )


@dataclass
class Outcome:
    """A finished run together with what is needed to interpret it."""

    result: RunResult
    bundle: ObjectiveBundle
    train: GroupedDataset | None = None
    test: GroupedDataset | None = None
    pref: PreferenceVector | None = None
    tag: str = "run"

    def metrics(self) -> dict:
        if self.train is None:
            return {}
        out = {"train": evaluate_metrics(self.result.w, self.train).to_dict()}
        if self.test is not None:
            out["test"] = evaluate_metrics(self.result.w, self.test).to_dict()
        return out


def initial_weights(d: int, seed: int, scale: float = 0.01) -> np.ndarray:
    """Small seeded Gaussian start; the exact origin equalizes every group loss."""
    return np.random.default_rng(seed).normal(0.0, scale, d)


def load_datasets(cfg: RunConfig) -> tuple[GroupedDataset, GroupedDataset]:
    if cfg.data is None:
        raise UsageError("no data file given (use --data, or --synthetic)")
    schema = resolve_schema(cfg.schema)
    if cfg.test is not None:
        return load_train_test(cfg.data, cfg.test, schema)
    return load_split(cfg.data, schema, cfg.test_fraction, cfg.seed)


def synthetic_bundle() -> ObjectiveBundle:
    return make_gaussian_pair(GaussianPairParams(np.array(SYNTHETIC_NU), SYNTHETIC_SPREAD))


def synthetic_start() -> np.ndarray:
    return 2.0 * np.array(SYNTHETIC_NU)


def _problem(cfg: RunConfig, data=None):
    if cfg.synthetic:
        return synthetic_bundle(), synthetic_start(), None, None
    train, test = data if data is not None else load_datasets(cfg)
    bundle = build_objectives(cfg.notion, cfg.model_spec(), train, cfg.penalty)
    return bundle, initial_weights(train.d, cfg.seed, cfg.init_scale), train, test


def run_train(cfg: RunConfig, data=None) -> Outcome:
    """Pareto descent on the fairness bundle (or the synthetic pair)."""
    bundle, w0, train, test = _problem(cfg, data)
    return Outcome(run_pdo(bundle, w0, cfg.pdo_config()), bundle, train, test)


def run_trace(cfg: RunConfig, pref: PreferenceVector | None = None, data=None, tag: str = "run") -> Outcome:
    """Preference-steered descent toward one ratio of objective values."""
    if pref is None:
        prefs = cfg.preferences()
        if len(prefs) != 1:
            raise UsageError(f"trace needs exactly one preference vector, got {len(prefs)}")
        pref = prefs[0]
    bundle, w0, train, test = _problem(cfg, data)
    if pref.m != bundle.m:
        raise UsageError(f"preference has length {pref.m} but the bundle has {bundle.m} objectives")
    result = run_pbpdo(bundle, pref, w0, cfg.pbpdo_config())
    return Outcome(result, bundle, train, test, pref, tag)


def run_baseline(train: GroupedDataset, spec: LinearModelSpec, seed: int = 0,
                 eta: float = 0.5, iters: int = 2000, test: GroupedDataset | None = None) -> Outcome:
    """Fairness-unaware model: plain gradient descent on the total loss."""
    bundle = LossBundle(spec, train)
    config = PdoConfig(eta=eta, T=iters, normalize_gradients=False, record_every=iters)
    return Outcome(run_pdo(bundle, initial_weights(train.d, seed), config), bundle, train, test)


def pref_tag(pref: PreferenceVector) -> str:
    return "pref_" + "_".join(f"{v:g}" for v in pref.pi)


def run_sweep(cfg: RunConfig, data=None) -> list[Outcome]:
    """One preference-steered run per preference vector, in input order.

    Runs share the loaded data and may execute on worker threads; each run is
    deterministic, so the result does not depend on scheduling.
    """
    prefs = cfg.preferences()
    if not prefs:
        raise UsageError("a frontier sweep needs at least one preference vector")
    tags = [pref_tag(p) for p in prefs]
    if len(set(tags)) != len(tags):
        raise UsageError("duplicate preference vectors in the sweep")
    if data is None and not cfg.synthetic:
        data = load_datasets(cfg)
    jobs = [(p, t) for p, t in zip(prefs, tags)]
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            return list(pool.map(lambda job: run_trace(cfg, job[0], data, job[1]), jobs))
    return [run_trace(cfg, p, data, t) for p, t in jobs]

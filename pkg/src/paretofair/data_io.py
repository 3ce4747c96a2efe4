"""CSV ingestion for grouped binary classification data.

A YAML schema names the role of every column: the label, the sensitive
attribute, continuous and categorical features, and columns to drop.  It also
pins row filters and the group order.  Loading reads the raw table, applies the
filters, drops rows with missing values in used columns, then encodes the
features with a :class:`FeatureEncoder` fitted on training rows only.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
import yaml

from .errors import ConfigurationError, DataError, UsageError

log = logging.getLogger(__name__)

INTERCEPT = "intercept"
_FILTER_OPS = ("eq", "ne", "in", "between")


# --- schema ------------------------------------------------------------------


@dataclass(frozen=True)
class RowFilter:
    column: str
    op: str
    value: Any

    def __post_init__(self):
        if self.op not in _FILTER_OPS:
            raise ConfigurationError(f"unknown filter op {self.op!r}; expected one of {_FILTER_OPS}")

    def mask(self, df: pd.DataFrame) -> pd.Series:
        col = df[self.column]
        if self.op == "between":
            lo, hi = self.value
            num = pd.to_numeric(col, errors="coerce")
            return (num >= lo) & (num <= hi)
        if self.op == "in":
            return col.astype(str).isin([str(v) for v in self.value])
        same = col.astype(str) == str(self.value)
        return same if self.op == "eq" else ~same


@dataclass(frozen=True)
class DatasetSchema:
    """Column roles and value mappings for one dataset/sensitive-attribute pair.

    ``groups`` lists group names in id order; each maps to the raw values that
    belong to it.  ``columns`` is only needed for files without a header row.
    """

    name: str
    label: str
    positive: tuple[str, ...]
    negative: tuple[str, ...]
    sensitive: str
    groups: dict[str, tuple[str, ...]]
    continuous: tuple[str, ...] = ()
    categorical: tuple[str, ...] = ()
    drop: tuple[str, ...] = ()
    columns: tuple[str, ...] | None = None
    na_values: tuple[str, ...] = ("?",)
    comment: str | None = None
    filters: tuple[RowFilter, ...] = ()
    include_sensitive: bool = False
    train_rows: int | None = None
    source: str = field(default="", compare=False, repr=False)

    def __post_init__(self):
        if len(self.groups) < 2:
            raise ConfigurationError(f"schema {self.name!r} needs at least 2 groups, got {len(self.groups)}")
        if not self.positive or not self.negative:
            raise ConfigurationError(f"schema {self.name!r} must map label values to both classes")
        roles = [self.label, self.sensitive, *self.continuous, *self.categorical]
        if len(set(roles)) != len(roles):
            raise ConfigurationError(f"schema {self.name!r} assigns a column more than one role")
        if self.sensitive in self.drop or self.label in self.drop:
            raise ConfigurationError("label and sensitive columns cannot be dropped")

    @property
    def group_names(self) -> tuple[str, ...]:
        return tuple(self.groups)

    @property
    def used_columns(self) -> list[str]:
        return [self.label, self.sensitive, *self.continuous, *self.categorical]

    @property
    def feature_categorical(self) -> tuple[str, ...]:
        if self.include_sensitive:
            return (*self.categorical, self.sensitive)
        return self.categorical

    @classmethod
    def from_dict(cls, raw: dict, source: str = "") -> "DatasetSchema":
        try:
            label = raw["label"]
            sens = raw["sensitive"]
            groups = sens["groups"]
            if isinstance(groups, list):
                groups = {str(g): [g] for g in groups}
            return cls(
                name=str(raw.get("name", "dataset")),
                label=str(label["column"]),
                positive=tuple(str(v) for v in label["positive"]),
                negative=tuple(str(v) for v in label["negative"]),
                sensitive=str(sens["column"]),
                groups={str(k): tuple(str(v) for v in vals) for k, vals in groups.items()},
                continuous=tuple(raw.get("continuous", ())),
                categorical=tuple(raw.get("categorical", ())),
                drop=tuple(raw.get("drop", ())),
                columns=tuple(raw["columns"]) if raw.get("columns") else None,
                na_values=tuple(str(v) for v in raw.get("na_values", ["?"])),
                comment=raw.get("comment"),
                filters=tuple(RowFilter(f["column"], f["op"], f["value"]) for f in raw.get("filters", ())),
                include_sensitive=bool(sens.get("include_as_feature", False)),
                train_rows=raw.get("train_rows"),
                source=source,
            )
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"malformed schema {source or raw!r}: missing or invalid {exc}") from exc

    @classmethod
    def from_yaml(cls, path) -> "DatasetSchema":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise DataError(f"cannot read schema {path}: {exc}") from exc
        return cls.from_dict(yaml.safe_load(text), source=str(path))

    def digest(self) -> str:
        return hashlib.sha256(repr(self).encode()).hexdigest()[:16]


BUNDLED_SCHEMAS = ("adult_gender", "adult_race", "compas_sex", "compas_race")


def bundled_schema(name: str) -> DatasetSchema:
    """Load one of the schemas shipped with the package by short name."""
    if name not in BUNDLED_SCHEMAS:
        raise UsageError(f"unknown bundled schema {name!r}; choose from {BUNDLED_SCHEMAS}")
    ref = resources.files("paretofair") / "schemas" / f"{name}.yaml"
    return DatasetSchema.from_dict(yaml.safe_load(ref.read_text()), source=f"bundled:{name}")


def resolve_schema(ref) -> DatasetSchema:
    """Accept a bundled schema name or a path to a YAML file."""
    if isinstance(ref, DatasetSchema):
        return ref
    if str(ref) in BUNDLED_SCHEMAS:
        return bundled_schema(str(ref))
    return DatasetSchema.from_yaml(ref)


# --- encoder -----------------------------------------------------------------


@dataclass
class FeatureEncoder:
    """One-hot for categoricals, z-scores for continuous columns, intercept last.

    Category order is first appearance in the fitting frame.  Standard
    deviations use ddof=0; a constant column keeps scale 1.
    """

    continuous: list[str]
    categorical: list[str]
    categories: dict[str, list[str]] = field(default_factory=dict)
    means: dict[str, float] = field(default_factory=dict)
    scales: dict[str, float] = field(default_factory=dict)
    intercept: bool = True

    @classmethod
    def fit(cls, df: pd.DataFrame, continuous, categorical, intercept: bool = True) -> "FeatureEncoder":
        enc = cls(list(continuous), list(categorical), intercept=intercept)
        for col in enc.continuous:
            values = df[col].to_numpy(dtype=float)
            enc.means[col] = float(values.mean())
            std = float(values.std())
            enc.scales[col] = std if std > 0 else 1.0
        for col in enc.categorical:
            enc.categories[col] = list(pd.unique(df[col].astype(str)))
        return enc

    @property
    def feature_names(self) -> list[str]:
        names = list(self.continuous)
        for col in self.categorical:
            names += [f"{col}={cat}" for cat in self.categories[col]]
        if self.intercept:
            names.append(INTERCEPT)
        return names

    def transform(self, df: pd.DataFrame) -> np.ndarray:
        blocks = []
        for col in self.continuous:
            values = df[col].to_numpy(dtype=float)
            blocks.append(((values - self.means[col]) / self.scales[col])[:, None])
        for col in self.categorical:
            raw = df[col].astype(str).to_numpy()
            cats = np.array(self.categories[col], dtype=object)
            onehot = (raw[:, None] == cats[None, :]).astype(float)
            unseen = sorted(set(raw) - set(self.categories[col]))
            if unseen:
                log.warning("column %s: %d unseen categories encoded as all zeros: %s", col, len(unseen), unseen[:5])
            blocks.append(onehot)
        if self.intercept:
            blocks.append(np.ones((len(df), 1)))
        return np.hstack(blocks) if blocks else np.empty((len(df), 0))

    def to_dict(self) -> dict:
        return {
            "continuous": self.continuous,
            "categorical": self.categorical,
            "categories": self.categories,
            "means": self.means,
            "scales": self.scales,
            "intercept": self.intercept,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "FeatureEncoder":
        try:
            return cls(
                continuous=list(raw["continuous"]),
                categorical=list(raw["categorical"]),
                categories={k: list(v) for k, v in raw["categories"].items()},
                means={k: float(v) for k, v in raw["means"].items()},
                scales={k: float(v) for k, v in raw["scales"].items()},
                intercept=bool(raw.get("intercept", True)),
            )
        except (KeyError, TypeError, AttributeError) as exc:
            raise DataError(f"malformed encoder record: {exc}") from exc


# --- dataset -----------------------------------------------------------------


@dataclass(frozen=True)
class GroupedDataset:
    """Encoded features, +/-1 labels and 0-based group ids.

    When an intercept is present it is the last feature column.
    """

    X: np.ndarray
    y: np.ndarray
    groups: np.ndarray
    group_names: tuple[str, ...]
    feature_names: tuple[str, ...] = ()
    provenance: dict = field(default_factory=dict, compare=False)
    encoder: FeatureEncoder | None = field(default=None, compare=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        groups = np.asarray(self.groups, dtype=int)
        if X.ndim != 2 or y.shape != (X.shape[0],) or groups.shape != y.shape:
            raise DataError(f"inconsistent shapes X{X.shape}, y{y.shape}, groups{groups.shape}")
        if X.shape[0] == 0:
            raise DataError("dataset is empty")
        if not np.all(np.isfinite(X)):
            raise DataError("feature matrix contains NaN or infinite entries")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise DataError("labels must be -1 or +1")
        c = len(self.group_names)
        if groups.min() < 0 or groups.max() >= c:
            raise DataError(f"group ids must lie in 0..{c - 1}")
        if self.feature_names and len(self.feature_names) != X.shape[1]:
            raise DataError(f"{len(self.feature_names)} feature names for {X.shape[1]} columns")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "group_names", tuple(self.group_names))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def c(self) -> int:
        return len(self.group_names)

    @property
    def has_intercept(self) -> bool:
        return bool(self.feature_names) and self.feature_names[-1] == INTERCEPT

    def subset(self, idx) -> "GroupedDataset":
        idx = np.asarray(idx)
        return GroupedDataset(
            self.X[idx], self.y[idx], self.groups[idx], self.group_names,
            self.feature_names, dict(self.provenance, rows=int(idx.size)), self.encoder,
        )

    def group_table(self) -> dict[str, dict[str, int]]:
        """Counts per group: positives, negatives and total."""
        table = {}
        for k, name in enumerate(self.group_names):
            mask = self.groups == k
            pos = int(np.sum(mask & (self.y > 0)))
            table[name] = {"+1": pos, "-1": int(mask.sum()) - pos, "total": int(mask.sum())}
        return table


# --- loading -----------------------------------------------------------------


def read_frame(path, schema: DatasetSchema) -> pd.DataFrame:
    """Read a raw CSV as strings, apply the schema filters and drop incomplete rows."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"data file not found: {path}")
    try:
        df = pd.read_csv(
            path,
            header=None if schema.columns else "infer",
            names=list(schema.columns) if schema.columns else None,
            dtype=str,
            skipinitialspace=True,
            keep_default_na=False,
            na_values=["", *schema.na_values],
            comment=schema.comment,
        )
    except (pd.errors.ParserError, UnicodeDecodeError, ValueError) as exc:
        raise DataError(f"cannot parse {path}: {exc}") from exc
    missing = [c for c in schema.used_columns + [f.column for f in schema.filters] if c not in df.columns]
    if missing:
        raise DataError(f"{path}: columns {missing} required by schema {schema.name!r} are absent")

    n_raw = len(df)
    for flt in schema.filters:
        df = df[flt.mask(df)]
    n_filtered = len(df)
    df = df.dropna(subset=schema.used_columns)
    dropped = n_filtered - len(df)
    if dropped:
        log.info("%s: dropped %d rows with missing values", path.name, dropped)
    if df.empty:
        raise DataError(f"{path}: no rows left after filtering")
    df = df.reset_index(drop=True)
    df.attrs.update(source=str(path), raw_rows=n_raw, filtered_rows=n_filtered, dropped_missing=dropped)
    return df


def _map_labels(df: pd.DataFrame, schema: DatasetSchema) -> tuple[np.ndarray, np.ndarray]:
    raw_y = df[schema.label].astype(str)
    y = np.where(raw_y.isin(schema.positive), 1.0, np.where(raw_y.isin(schema.negative), -1.0, np.nan))
    bad = np.flatnonzero(np.isnan(y))
    if bad.size:
        raise DataError(f"row {bad[0]}: label value {raw_y.iloc[bad[0]]!r} is not mapped by schema {schema.name!r}")

    raw_g = df[schema.sensitive].astype(str).to_numpy()
    groups = np.full(len(df), -1)
    for k, values in enumerate(schema.groups.values()):
        groups[np.isin(raw_g, values)] = k
    bad = np.flatnonzero(groups < 0)
    if bad.size:
        raise DataError(
            f"row {bad[0]}: sensitive value {raw_g[bad[0]]!r} is not mapped by schema {schema.name!r}"
        )
    return y, groups


def encode_frame(df: pd.DataFrame, schema: DatasetSchema, encoder: FeatureEncoder) -> GroupedDataset:
    y, groups = _map_labels(df, schema)
    absent = [schema.group_names[k] for k in range(len(schema.groups)) if not np.any(groups == k)]
    if absent:
        raise DataError(f"groups {absent} have no rows in {df.attrs.get('source', 'data')}")
    provenance = {
        "source": df.attrs.get("source", ""),
        "schema": schema.name,
        "schema_digest": schema.digest(),
        "rows": len(df),
        "dropped_missing": df.attrs.get("dropped_missing", 0),
    }
    return GroupedDataset(encoder.transform(df), y, groups, schema.group_names,
                          encoder.feature_names, provenance, encoder)


def fit_encoder(df: pd.DataFrame, schema: DatasetSchema) -> FeatureEncoder:
    for col in schema.continuous:
        if pd.to_numeric(df[col], errors="coerce").isna().any():
            raise DataError(f"continuous column {col!r} has non-numeric entries")
    return FeatureEncoder.fit(df, schema.continuous, schema.feature_categorical)


def load_csv(path, schema) -> GroupedDataset:
    """Load a single file and fit the encoder on it."""
    schema = resolve_schema(schema)
    df = read_frame(path, schema)
    return encode_frame(df, schema, fit_encoder(df, schema))


def apply_schema_to_test(path, encoder: FeatureEncoder, schema) -> GroupedDataset:
    """Load a file with an encoder fitted elsewhere (no refitting)."""
    schema = resolve_schema(schema)
    return encode_frame(read_frame(path, schema), schema, encoder)


def load_train_test(train_path, test_path, schema) -> tuple[GroupedDataset, GroupedDataset]:
    """Load a train/test pair with the encoder fitted on the training rows.

    If the schema sets ``train_rows``, both files are cleaned, pooled in order,
    and re-cut so that the first ``train_rows`` rows form the training set.
    """
    schema = resolve_schema(schema)
    train_df = read_frame(train_path, schema)
    test_df = read_frame(test_path, schema)
    if schema.train_rows is not None:
        pooled = pd.concat([train_df, test_df], ignore_index=True)
        cut = int(schema.train_rows)
        if not 0 < cut < len(pooled):
            raise DataError(f"train_rows={cut} is outside the pooled row count {len(pooled)}")
        source = f"{train_path}+{test_path}"
        train_df = pooled.iloc[:cut].reset_index(drop=True)
        test_df = pooled.iloc[cut:].reset_index(drop=True)
        train_df.attrs.update(source=source)
        test_df.attrs.update(source=source)
    encoder = fit_encoder(train_df, schema)
    return encode_frame(train_df, schema, encoder), encode_frame(test_df, schema, encoder)


def split_indices(y, groups, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Stratified split on (label, group) cells; single-member cells stay in train."""
    if not 0 < test_fraction < 1:
        raise UsageError(f"test_fraction must lie strictly between 0 and 1, got {test_fraction}")
    y = np.asarray(y)
    groups = np.asarray(groups)
    rng = np.random.default_rng(seed)
    train, test = [], []
    for label in np.unique(y):
        for g in np.unique(groups):
            cell = np.flatnonzero((y == label) & (groups == g))
            if cell.size == 0:
                continue
            if cell.size == 1:
                log.warning("cell (label=%s, group=%s) has one member; kept in train", label, g)
                train.append(cell)
                continue
            cell = rng.permutation(cell)
            n_test = min(max(int(round(test_fraction * cell.size)), 1), cell.size - 1)
            test.append(cell[:n_test])
            train.append(cell[n_test:])
    cat = lambda parts: np.sort(np.concatenate(parts)) if parts else np.empty(0, dtype=int)
    return cat(train), cat(test)


def split(dataset: GroupedDataset, test_fraction: float, seed: int) -> tuple[GroupedDataset, GroupedDataset]:
    """Stratified split of an already encoded dataset."""
    train, test = split_indices(dataset.y, dataset.groups, test_fraction, seed)
    return dataset.subset(train), dataset.subset(test)


def load_split(path, schema, test_fraction: float, seed: int) -> tuple[GroupedDataset, GroupedDataset]:
    """Split raw rows first, then fit the encoder on the training part only."""
    schema = resolve_schema(schema)
    df = read_frame(path, schema)
    y, groups = _map_labels(df, schema)
    train, test = split_indices(y, groups, test_fraction, seed)
    train_df = df.iloc[train].reset_index(drop=True)
    test_df = df.iloc[test].reset_index(drop=True)
    for part in (train_df, test_df):
        part.attrs.update(df.attrs)
    encoder = fit_encoder(train_df, schema)
    return encode_frame(train_df, schema, encoder), encode_frame(test_df, schema, encoder)

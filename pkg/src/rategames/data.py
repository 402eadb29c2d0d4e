"""Datasets, linear/stochastic models, and classification-rate evaluation.

A "rate" is the fraction of a selected subpopulation whose prediction sign
matches a target (the example's label, always-positive, or always-negative).
Rates of a stochastic model are weight-linear in its atoms.

Tie rule used everywhere: sign(0) := +1.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

from .exceptions import DataError, EmptySelectionError


@dataclass(frozen=True)
class Example:
    """One labeled, group-annotated instance."""

    features: np.ndarray
    label: int
    group: int = 0

    def __post_init__(self):
        if self.label not in (-1, 1):
            raise DataError(f"label must be -1 or +1, got {self.label}")
        if self.group < 0:
            raise DataError(f"group id must be >= 0, got {self.group}")


class Dataset:
    """Column-array container for a fixed-dimension binary dataset.

    Immutable after construction; safe to share across threads.  Optional
    ``ref_predictions`` holds a legacy model's +-1 predictions for churn-style
    rate definitions.
    """

    def __init__(self, features, labels, groups=None, name: str = "dataset",
                 ref_predictions=None):
        self.features = np.ascontiguousarray(features, dtype=float)
        self.labels = np.asarray(labels, dtype=int)
        if self.features.ndim != 2:
            raise DataError("features must be a 2-d array")
        n = self.features.shape[0]
        if n == 0:
            raise DataError("dataset is empty")
        if self.labels.shape != (n,):
            raise DataError("labels length does not match features")
        if not np.all(np.isin(self.labels, (-1, 1))):
            raise DataError("labels must be in {-1, +1}")
        if groups is None:
            groups = np.zeros(n, dtype=int)
        self.groups = np.asarray(groups, dtype=int)
        if self.groups.shape != (n,):
            raise DataError("groups length does not match features")
        if self.groups.min() < 0:
            raise DataError("group ids must be >= 0")
        self.name = name
        if ref_predictions is not None:
            ref_predictions = np.asarray(ref_predictions, dtype=int)
            if ref_predictions.shape != (n,):
                raise DataError("ref_predictions length does not match features")
        self.ref_predictions = ref_predictions
        self.features.setflags(write=False)
        self.labels.setflags(write=False)
        self.groups.setflags(write=False)

    @classmethod
    def from_examples(cls, examples, name: str = "dataset") -> "Dataset":
        if not examples:
            raise DataError("dataset is empty")
        feats = np.stack([np.asarray(e.features, dtype=float) for e in examples])
        labels = np.array([e.label for e in examples])
        groups = np.array([e.group for e in examples])
        return cls(feats, labels, groups, name=name)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def p(self) -> float:
        """Empirical fraction of +1 labels."""
        return float(np.mean(self.labels == 1))

    @property
    def group_ids(self) -> np.ndarray:
        return np.unique(self.groups)

    def example(self, i: int) -> Example:
        return Example(self.features[i], int(self.labels[i]), int(self.groups[i]))

    def subset(self, idx, name: str | None = None) -> "Dataset":
        idx = np.asarray(idx)
        ref = None if self.ref_predictions is None else self.ref_predictions[idx]
        return Dataset(self.features[idx], self.labels[idx], self.groups[idx],
                       name=name or self.name, ref_predictions=ref)

    def with_ref_predictions(self, preds) -> "Dataset":
        return Dataset(self.features, self.labels, self.groups, name=self.name,
                       ref_predictions=preds)


# --------------------------------------------------------------------------
# rate definitions


@dataclass(frozen=True)
class RateDefinition:
    """Selector plus prediction target defining one rate in [0, 1].

    ``group``/``label`` filter the subpopulation (None = any); ``ref`` filters
    on a legacy model's stored prediction when the dataset carries one.
    ``target`` is what the prediction sign is compared against;
    ``sense`` records whether downstream metrics are monotonically
    non-decreasing ("increasing") or non-increasing ("decreasing") in this
    rate, which fixes the surrogate bound side and multiplier signs.
    """

    target: str = "agree"  # "agree" | "predict-positive" | "predict-negative"
    group: int | None = None
    label: int | None = None
    ref: int | None = None
    sense: str = "increasing"
    name: str = ""

    def __post_init__(self):
        if self.target not in ("agree", "predict-positive", "predict-negative"):
            raise DataError(f"unknown target {self.target!r}")
        if self.label not in (None, -1, 1):
            raise DataError(f"label filter must be None, -1 or +1, got {self.label}")
        if self.ref not in (None, -1, 1):
            raise DataError(f"ref filter must be None, -1 or +1, got {self.ref}")
        if self.sense not in ("increasing", "decreasing"):
            raise DataError(f"unknown sense {self.sense!r}")

    @property
    def sign(self) -> int:
        """+1 for increasing sense, -1 for decreasing."""
        return 1 if self.sense == "increasing" else -1

    def describe(self) -> str:
        parts = [f"target={self.target}"]
        if self.group is not None:
            parts.append(f"group={self.group}")
        if self.label is not None:
            parts.append(f"label={self.label:+d}")
        if self.ref is not None:
            parts.append(f"ref={self.ref:+d}")
        label = self.name or "rate"
        return f"{label}({', '.join(parts)})"

    def selector_mask(self, ds: Dataset) -> np.ndarray:
        mask = np.ones(len(ds), dtype=bool)
        if self.group is not None:
            mask &= ds.groups == self.group
        if self.label is not None:
            mask &= ds.labels == self.label
        if self.ref is not None:
            if ds.ref_predictions is None:
                raise DataError(
                    f"{self.describe()} needs reference predictions, "
                    f"but dataset {ds.name!r} carries none")
            mask &= ds.ref_predictions == self.ref
        return mask

    def target_signs(self, labels: np.ndarray) -> np.ndarray:
        if self.target == "agree":
            return labels
        if self.target == "predict-positive":
            return np.ones_like(labels)
        return -np.ones_like(labels)


def predictions_from_scores(scores: np.ndarray) -> np.ndarray:
    """sign with the 0 -> +1 tie rule."""
    return np.where(np.asarray(scores) >= 0, 1, -1)


# --------------------------------------------------------------------------
# models


@dataclass
class LinearModel:
    """Linear scorer f(x) = w.x + b with an l2 norm bound on (w, b)."""

    weights: np.ndarray
    bias: float = 0.0
    norm_bound: float = np.inf

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.bias = float(self.bias)
        if self.norm_bound <= 0:
            raise DataError("norm_bound must be positive")

    @property
    def dim(self) -> int:
        return self.weights.size

    def param_vector(self) -> np.ndarray:
        return np.append(self.weights, self.bias)

    @classmethod
    def from_param_vector(cls, theta: np.ndarray, norm_bound: float = np.inf) -> "LinearModel":
        theta = np.asarray(theta, dtype=float)
        return cls(theta[:-1].copy(), float(theta[-1]), norm_bound)

    def param_norm(self) -> float:
        return float(np.linalg.norm(self.param_vector()))

    def scores(self, ds: Dataset) -> np.ndarray:
        return ds.features @ self.weights + self.bias

    def predictions(self, ds: Dataset) -> np.ndarray:
        return predictions_from_scores(self.scores(ds))


@dataclass
class GroupwiseModel:
    """Linear scorer with a per-group sign flip and score shift.

    Used for plug-in and post-shift classifiers: group g gets score
    scale[g] * (w.x + b) + shift[g], with scale in {-1, +1}.
    """

    base: LinearModel
    shifts: dict[int, float] = field(default_factory=dict)
    scales: dict[int, float] = field(default_factory=dict)

    def scores(self, ds: Dataset) -> np.ndarray:
        raw = self.base.scores(ds)
        scale = np.ones(len(ds))
        shift = np.zeros(len(ds))
        for g, s in self.scales.items():
            scale[ds.groups == g] = s
        for g, s in self.shifts.items():
            shift[ds.groups == g] = s
        return scale * raw + shift

    def predictions(self, ds: Dataset) -> np.ndarray:
        return predictions_from_scores(self.scores(ds))


@dataclass
class StochasticModel:
    """Finite mixture of deterministic models; rates are weight-linear."""

    atoms: list[tuple[object, float]]

    def __post_init__(self):
        if not self.atoms:
            raise DataError("stochastic model needs at least one atom")
        weights = np.array([w for _, w in self.atoms], dtype=float)
        if np.any(weights < 0):
            raise DataError("atom weights must be nonnegative")
        if abs(weights.sum() - 1.0) > 1e-9:
            raise DataError(f"atom weights must sum to 1, got {weights.sum()}")

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.atoms])

    @property
    def support_size(self) -> int:
        return sum(1 for _, w in self.atoms if w > 0)

    @classmethod
    def point_mass(cls, model) -> "StochasticModel":
        return cls([(model, 1.0)])


# --------------------------------------------------------------------------
# rate evaluation


def evaluate_rate(model, rdef: RateDefinition, ds: Dataset) -> float:
    """Fraction of selected examples whose prediction sign matches the target."""
    mask = rdef.selector_mask(ds)
    if not mask.any():
        raise EmptySelectionError(
            f"{rdef.describe()} selects no examples in dataset {ds.name!r}")
    preds = model.predictions(ds)
    tsign = rdef.target_signs(ds.labels)
    return float(np.mean(preds[mask] == tsign[mask]))


def evaluate_rate_vector(model, rdefs, ds: Dataset) -> np.ndarray:
    return np.array([evaluate_rate(model, r, ds) for r in rdefs])


def stochastic_rates(sm: StochasticModel, rdefs, ds: Dataset) -> np.ndarray:
    """Weighted sum of atom rate vectors: R(mu) = sum_t w_t R(theta_t)."""
    out = np.zeros(len(rdefs))
    for model, w in sm.atoms:
        if w == 0.0:
            continue
        out += w * evaluate_rate_vector(model, rdefs, ds)
    return out


def minibatch_rate_estimate(model, rdefs, ds: Dataset, batch_idx) -> tuple[np.ndarray, np.ndarray]:
    """Rate estimates on a sampled batch.

    Returns (values, present): coordinates whose selector intersects the batch
    nowhere are flagged absent (value nan) so callers can skip their update
    for this step.
    """
    batch = ds.subset(np.asarray(batch_idx), name=f"{ds.name}[batch]")
    values = np.full(len(rdefs), np.nan)
    present = np.zeros(len(rdefs), dtype=bool)
    preds = model.predictions(batch)
    for i, rdef in enumerate(rdefs):
        mask = rdef.selector_mask(batch)
        if mask.any():
            tsign = rdef.target_signs(batch.labels)
            values[i] = float(np.mean(preds[mask] == tsign[mask]))
            present[i] = True
    return values, present


class RateEvaluator:
    """Precomputed selector masks for fast repeated rate evaluation.

    Bound to one dataset; raises on construction if any selector is empty.
    """

    def __init__(self, rdefs, ds: Dataset):
        self.rdefs = list(rdefs)
        self.ds = ds
        self.masks = []
        self.tsigns = []
        for rdef in self.rdefs:
            mask = rdef.selector_mask(ds)
            if not mask.any():
                raise EmptySelectionError(
                    f"{rdef.describe()} selects no examples in dataset {ds.name!r}")
            self.masks.append(mask)
            self.tsigns.append(rdef.target_signs(ds.labels))

    def rates_from_scores(self, scores: np.ndarray) -> np.ndarray:
        preds = predictions_from_scores(scores)
        return np.array([
            float(np.mean(preds[m] == t[m]))
            for m, t in zip(self.masks, self.tsigns)
        ])

    def rates(self, model) -> np.ndarray:
        return self.rates_from_scores(model.scores(self.ds))


# --------------------------------------------------------------------------
# loading and splitting


@dataclass
class ColumnSchema:
    """Column mapping for a delimited text file.

    ``features=None`` uses every column except the label and group columns.
    Columns listed in ``categorical`` are one-hot encoded; all other feature
    columns must be numeric.  ``include_group_as_feature`` appends the
    integer-coded group so per-group score shifts are learnable.
    """

    label: str
    group: str
    positive_label: object = None
    features: list[str] | None = None
    categorical: list[str] = field(default_factory=list)
    delimiter: str = ","
    include_group_as_feature: bool = True


def load_tabular_dataset(path, schema: ColumnSchema, name: str | None = None) -> Dataset:
    """Load a delimited text file into an (unstandardized) Dataset.

    Standardization is deferred to :func:`standardize_splits` so that the
    statistics come from the training portion only.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    try:
        frame = pd.read_csv(path, delimiter=schema.delimiter)
    except pd.errors.EmptyDataError:
        raise DataError(f"dataset file is empty: {path}") from None
    if frame.empty:
        raise DataError(f"dataset file has no rows: {path}")

    for col in (schema.label, schema.group):
        if col not in frame.columns:
            raise DataError(f"column {col!r} not found in {path}")

    labels = _map_labels(frame[schema.label], schema.positive_label)
    groups, _ = _map_groups(frame[schema.group])

    feature_cols = schema.features
    if feature_cols is None:
        feature_cols = [c for c in frame.columns if c not in (schema.label, schema.group)]
    blocks = []
    for col in feature_cols:
        if col not in frame.columns:
            raise DataError(f"column {col!r} not found in {path}")
        series = frame[col]
        if col in schema.categorical:
            onehot = pd.get_dummies(series, prefix=col)
            blocks.append(onehot.to_numpy(dtype=float))
        else:
            values = pd.to_numeric(series, errors="coerce")
            if values.isna().any():
                row = int(values.isna().idxmax())
                raise DataError(
                    f"non-numeric value {series.iloc[row]!r} in column {col!r} "
                    f"(row {row}) of {path}")
            blocks.append(values.to_numpy(dtype=float).reshape(-1, 1))
    if schema.include_group_as_feature:
        blocks.append(groups.reshape(-1, 1).astype(float))
    if not blocks:
        raise DataError("schema selects no feature columns")
    features = np.hstack(blocks)

    ds = Dataset(features, labels, groups, name=name or path.stem)
    if ds.p in (0.0, 1.0):
        raise DataError(f"dataset {ds.name!r} contains a single label class")
    return ds


def _map_labels(series: pd.Series, positive_label) -> np.ndarray:
    if positive_label is not None:
        return np.where(series.astype(type(positive_label)) == positive_label, 1, -1)
    values = pd.to_numeric(series, errors="coerce")
    if values.isna().any():
        raise DataError(
            f"label column has non-numeric values; set positive_label in the schema")
    uniq = set(np.unique(values))
    if uniq <= {-1, 1}:
        return values.to_numpy(dtype=int)
    if uniq <= {0, 1}:
        return np.where(values.to_numpy() == 1, 1, -1)
    raise DataError(f"cannot map label values {sorted(uniq)} to -1/+1")


def _map_groups(series: pd.Series) -> tuple[np.ndarray, list]:
    levels = sorted(series.unique(), key=str)
    mapping = {v: i for i, v in enumerate(levels)}
    return series.map(mapping).to_numpy(dtype=int), levels


def split_dataset(ds: Dataset, seed: int) -> tuple[Dataset, Dataset, Dataset]:
    """Random 4/9 : 2/9 : remainder partition, deterministic per seed."""
    n = len(ds)
    if n < 9:
        raise DataError(f"dataset too small to split: {n} < 9")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_train = (4 * n) // 9
    n_val = (2 * n) // 9
    train = ds.subset(perm[:n_train], name=f"{ds.name}/train")
    val = ds.subset(perm[n_train:n_train + n_val], name=f"{ds.name}/val")
    test = ds.subset(perm[n_train + n_val:], name=f"{ds.name}/test")
    return train, val, test


def standardize_splits(train: Dataset, *others: Dataset) -> tuple[Dataset, ...]:
    """Zero-mean/unit-variance features using training-split statistics only."""
    mean = train.features.mean(axis=0)
    std = train.features.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)

    def apply(ds: Dataset) -> Dataset:
        return Dataset((ds.features - mean) / std, ds.labels, ds.groups,
                       name=ds.name, ref_predictions=ds.ref_predictions)

    return tuple(apply(d) for d in (train, *others))

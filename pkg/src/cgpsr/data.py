"""Tabular data handling: CSV ingestion, scaling, metrics, linear baseline.

CSV conventions: UTF-8, mandatory header row, comma separator, decimal
point, scientific notation accepted.  Column roles and scaling are given
explicitly by the caller (run config), never inferred from the file.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Optional, Sequence

import numpy as np


class DataError(ValueError):
    """Malformed or unusable input data."""


class NumericalError(RuntimeError):
    """A numerical procedure failed (singular system, divergence)."""


ROLES = ("feature", "target", "lower_bound", "upper_bound", "ignored")
SCALINGS = ("none", "standardize", "std_divide")


@dataclass(frozen=True)
class ColumnSpec:
    """Role and scaling of one CSV column."""

    name: str
    role: str = "feature"
    scaling: str = "none"

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}; expected one of {ROLES}")
        if self.scaling not in SCALINGS:
            raise ValueError(
                f"unknown scaling {self.scaling!r}; expected one of {SCALINGS}"
            )
        if self.scaling != "none" and self.role != "feature":
            raise ValueError(f"column {self.name!r}: only features can be scaled")


@dataclass(frozen=True)
class ColumnScaling:
    kind: str  # standardize | std_divide
    mean: float
    std: float


@dataclass(frozen=True)
class ScalingState:
    """Per-feature scaling parameters, fitted on training data only."""

    columns: dict[str, ColumnScaling] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            name: {"kind": s.kind, "mean": s.mean, "std": s.std}
            for name, s in self.columns.items()
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScalingState":
        return cls(
            {
                name: ColumnScaling(v["kind"], float(v["mean"]), float(v["std"]))
                for name, v in d.items()
            }
        )


@dataclass(frozen=True)
class Dataset:
    """Labelled samples with optional per-row target bounds."""

    features: np.ndarray  # (N, n)
    targets: np.ndarray  # (N,)
    feature_names: tuple[str, ...] = ()
    lower_bounds: Optional[np.ndarray] = None
    upper_bounds: Optional[np.ndarray] = None
    scaling_state: Optional[ScalingState] = None

    def __post_init__(self) -> None:
        features = np.asarray(self.features, dtype=float)
        targets = np.asarray(self.targets, dtype=float)
        if features.ndim != 2:
            raise DataError("features must be a 2-d matrix")
        if targets.shape != (features.shape[0],):
            raise DataError("targets length must match the number of rows")
        if features.shape[0] < 1:
            raise DataError("dataset is empty")
        if not np.all(np.isfinite(features)) or not np.all(np.isfinite(targets)):
            raise DataError("non-finite entries in features or targets")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "targets", targets)
        names = self.feature_names or tuple(f"x{i}" for i in range(features.shape[1]))
        if len(names) != features.shape[1]:
            raise DataError("one feature name per column required")
        object.__setattr__(self, "feature_names", tuple(names))
        if (self.lower_bounds is None) != (self.upper_bounds is None):
            raise DataError("bounds must be given both or not at all")
        if self.lower_bounds is not None:
            lo = np.asarray(self.lower_bounds, dtype=float)
            hi = np.asarray(self.upper_bounds, dtype=float)
            if lo.shape != targets.shape or hi.shape != targets.shape:
                raise DataError("bounds length must match the number of rows")
            if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
                raise DataError("non-finite entries in bounds")
            bad = np.flatnonzero(~((lo <= targets) & (targets <= hi)))
            if bad.size:
                raise DataError(
                    f"row {bad[0] + 1}: target outside its [lower, upper] bounds"
                )
            object.__setattr__(self, "lower_bounds", lo)
            object.__setattr__(self, "upper_bounds", hi)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @cached_property
    def feature_columns(self) -> tuple[np.ndarray, ...]:
        """Contiguous per-feature columns, ready for vectorized evaluation."""
        return tuple(np.ascontiguousarray(self.features[:, i]) for i in range(self.n_features))


def _check_specs(specs: Sequence[ColumnSpec]) -> None:
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise DataError("duplicate column names in specs")
    targets = [s for s in specs if s.role == "target"]
    if len(targets) != 1:
        raise DataError("exactly one target column required")
    lowers = [s for s in specs if s.role == "lower_bound"]
    uppers = [s for s in specs if s.role == "upper_bound"]
    if len(lowers) > 1 or len(uppers) > 1:
        raise DataError("at most one lower_bound and one upper_bound column")
    if bool(lowers) != bool(uppers):
        raise DataError("bounds columns must be given both or not at all")
    if not any(s.role == "feature" for s in specs):
        raise DataError("at least one feature column required")


def load_csv(path, specs: Sequence[ColumnSpec]) -> Dataset:
    """Read a CSV into a Dataset; rows are kept in file order.

    A non-numeric, missing or non-finite cell in a used column fails the
    load with an error naming the data row (1-based, header excluded) and
    the column.
    """
    _check_specs(specs)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open dataset {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        index = {}
        for spec in specs:
            if spec.role == "ignored":
                continue
            if spec.name not in header:
                raise DataError(f"{path}: missing column {spec.name!r}")
            index[spec.name] = header.index(spec.name)
        used = [s for s in specs if s.role != "ignored"]
        rows: list[list[float]] = []
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            values = []
            for spec in used:
                col = index[spec.name]
                cell = row[col].strip() if col < len(row) else ""
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: row {row_no}, column {spec.name!r}: "
                        f"unparseable value {cell!r}"
                    ) from None
                if not np.isfinite(v):
                    raise DataError(
                        f"{path}: row {row_no}, column {spec.name!r}: "
                        f"non-finite value {cell!r}"
                    )
                values.append(v)
            rows.append(values)
    if not rows:
        raise DataError(f"{path}: no data rows")
    table = np.asarray(rows, dtype=float)
    cols = {spec.name: table[:, i] for i, spec in enumerate(used)}
    feature_specs = [s for s in specs if s.role == "feature"]
    features = np.column_stack([cols[s.name] for s in feature_specs])
    target = next(s for s in specs if s.role == "target")
    lower = next((s for s in specs if s.role == "lower_bound"), None)
    upper = next((s for s in specs if s.role == "upper_bound"), None)
    return Dataset(
        features=features,
        targets=cols[target.name],
        feature_names=tuple(s.name for s in feature_specs),
        lower_bounds=cols[lower.name] if lower else None,
        upper_bounds=cols[upper.name] if upper else None,
    )


def write_csv(dataset: Dataset, path, target_name: str = "y") -> None:
    """Write a Dataset back out (fixtures, demos)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = list(dataset.feature_names) + [target_name]
        if dataset.lower_bounds is not None:
            header += ["lower", "upper"]
        writer.writerow(header)
        for i in range(dataset.n_rows):
            row = [repr(float(v)) for v in dataset.features[i]]
            row.append(repr(float(dataset.targets[i])))
            if dataset.lower_bounds is not None:
                row.append(repr(float(dataset.lower_bounds[i])))
                row.append(repr(float(dataset.upper_bounds[i])))
            writer.writerow(row)


def fit_scaling(train: Dataset, specs: Sequence[ColumnSpec]) -> ScalingState:
    """Scaling parameters from TRAINING data only (population std)."""
    state: dict[str, ColumnScaling] = {}
    by_name = {s.name: s for s in specs}
    for i, name in enumerate(train.feature_names):
        spec = by_name.get(name)
        if spec is None or spec.scaling == "none":
            continue
        col = train.features[:, i]
        std = float(np.std(col))
        if std == 0.0:
            raise DataError(f"column {name!r} has zero variance; cannot scale")
        state[name] = ColumnScaling(spec.scaling, float(np.mean(col)), std)
    return ScalingState(state)


def apply_scaling(data: Dataset, state: ScalingState) -> Dataset:
    """Apply previously fitted scaling; works on train and test alike."""
    features = data.features.copy()
    for name, scaling in state.columns.items():
        if name not in data.feature_names:
            raise DataError(f"scaled column {name!r} missing from dataset")
        i = data.feature_names.index(name)
        if scaling.kind == "standardize":
            features[:, i] = (features[:, i] - scaling.mean) / scaling.std
        elif scaling.kind == "std_divide":
            features[:, i] = features[:, i] / scaling.std
        else:
            raise DataError(f"unknown scaling kind {scaling.kind!r}")
    return replace(data, features=features, scaling_state=state)


def split_dataset(data: Dataset, test_fraction: float = 0.2, seed: int = 0):
    """Seeded random split; returns (train, test)."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(data.n_rows)
    n_test = max(1, int(round(data.n_rows * test_fraction)))
    if n_test >= data.n_rows:
        raise DataError("split leaves no training rows")
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])

    def take(idx):
        return replace(
            data,
            features=data.features[idx],
            targets=data.targets[idx],
            lower_bounds=None if data.lower_bounds is None else data.lower_bounds[idx],
            upper_bounds=None if data.upper_bounds is None else data.upper_bounds[idx],
        )

    return take(train_idx), take(test_idx)


@dataclass(frozen=True)
class LinearModel:
    """Ordinary-least-squares fit: prediction = features @ coefficients + intercept."""

    coefficients: np.ndarray
    intercept: float

    def __post_init__(self) -> None:
        coef = np.asarray(self.coefficients, dtype=float)
        if not np.all(np.isfinite(coef)) or not np.isfinite(self.intercept):
            raise NumericalError("linear model has non-finite parameters")
        object.__setattr__(self, "coefficients", coef)

    def predict(self, data: Dataset) -> np.ndarray:
        return data.features @ self.coefficients + self.intercept


def fit_linear(train: Dataset) -> LinearModel:
    """OLS via the normal equations on [features | 1]."""
    n = train.n_features
    if train.n_rows <= n + 1:
        raise DataError(f"need more than {n + 1} rows to fit {n} coefficients")
    X = np.column_stack([train.features, np.ones(train.n_rows)])
    gram = X.T @ X
    if np.linalg.matrix_rank(gram) < n + 1:
        raise NumericalError("design matrix is rank deficient")
    try:
        beta = np.linalg.solve(gram, X.T @ train.targets)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"normal equations unsolvable: {exc}") from exc
    return LinearModel(coefficients=beta[:-1], intercept=float(beta[-1]))


@dataclass(frozen=True)
class MetricReport:
    rmse: float
    mae: float
    avg_overestimate: float
    avg_underestimate: float
    precision: Optional[float] = None  # only with target bounds


def metrics(predictions: np.ndarray, data: Dataset) -> MetricReport:
    """Evaluation metrics of a prediction vector against the dataset.

    Residual r = prediction - target.  Over/underestimates are conditional
    means of |r| on the rows where the prediction is above/below the target
    (0 when no such row); precision is the fraction of predictions inside
    the per-row bounds, present only when the dataset carries bounds.
    """
    pred = np.asarray(predictions, dtype=float)
    if pred.shape != data.targets.shape:
        raise DataError(
            f"predictions shape {pred.shape} does not match targets {data.targets.shape}"
        )
    r = pred - data.targets
    rmse = float(np.sqrt(np.mean(r**2)))
    mae = float(np.mean(np.abs(r)))
    over = r[r > 0]
    under = r[r < 0]
    avg_over = float(np.mean(over)) if over.size else 0.0
    avg_under = float(np.mean(-under)) if under.size else 0.0
    precision = None
    if data.lower_bounds is not None:
        inside = (data.lower_bounds <= pred) & (pred <= data.upper_bounds)
        precision = float(np.mean(inside))
    return MetricReport(rmse, mae, avg_over, avg_under, precision)


def synthetic_dataset(
    n_rows: int, n_features: int, seed: int = 0, bounds: bool = False
) -> Dataset:
    """A reproducible nonlinear regression dataset for demos and smoke runs."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-2.0, 2.0, (n_rows, n_features))
    y = 3.0 * X[:, 0] + 10.0
    if n_features > 1:
        y = y - 1.5 * X[:, 1] * X[:, 0]
    if n_features > 2:
        y = y + np.sin(X[:, 2])
    y = y + rng.normal(0.0, 0.1, n_rows)
    lower = upper = None
    if bounds:
        lower = y - np.abs(rng.normal(1.0, 0.3, n_rows)) - 0.05
        upper = y + np.abs(rng.normal(1.0, 0.3, n_rows)) + 0.05
    return Dataset(features=X, targets=y, lower_bounds=lower, upper_bounds=upper)

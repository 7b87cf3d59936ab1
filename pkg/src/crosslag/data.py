"""Dataset loading, chronological splitting, normalization, timestamp
encoding and sliding-window sample construction for weekly series."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import ConfigError, DataError

WEEKS_PER_YEAR = 52


@dataclass
class ColumnSchema:
    """Names of the required CSV columns; remaining numeric columns are
    candidate exogenous features."""

    week: str = "week"
    year: str = "year"
    target: str = "cases"


@dataclass
class TimeSeriesDataset:
    """Aligned weekly multivariate series: timestamps, target and features."""

    week: np.ndarray
    year: np.ndarray
    target: np.ndarray
    feature_names: list[str]
    features: np.ndarray  # (T_total, F)
    target_name: str = "cases"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.week = np.asarray(self.week, dtype=np.int64)
        self.year = np.asarray(self.year, dtype=np.int64)
        self.target = np.asarray(self.target, dtype=np.float64)
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim == 1:
            self.features = self.features.reshape(len(self.target), -1)
        n = len(self.target)
        if not (len(self.week) == len(self.year) == n == self.features.shape[0]):
            raise DataError("dataset columns have differing lengths")
        if self.features.shape[1] != len(self.feature_names):
            raise DataError("feature matrix width does not match feature names")

    @property
    def n_rows(self) -> int:
        return len(self.target)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def validate(self) -> None:
        """Check chronology, week range and absence of missing values."""
        if self.n_rows == 0:
            raise DataError("dataset is empty")
        if np.any((self.week < 1) | (self.week > 53)):
            bad = int(np.argmax((self.week < 1) | (self.week > 53)))
            raise DataError(f"week out of range [1, 53] at row {bad}")
        stamps = self.year.astype(np.int64) * 64 + self.week
        if np.any(np.diff(stamps) <= 0):
            bad = int(np.argmax(np.diff(stamps) <= 0)) + 1
            raise DataError(f"non-chronological rows: row {bad} does not follow row {bad - 1}")
        for name, col in [("target", self.target), ("features", self.features)]:
            if not np.all(np.isfinite(col)):
                raise DataError(f"missing or non-finite values in {name}")

    def slice_rows(self, start: int, stop: int) -> "TimeSeriesDataset":
        return TimeSeriesDataset(
            week=self.week[start:stop],
            year=self.year[start:stop],
            target=self.target[start:stop],
            feature_names=list(self.feature_names),
            features=self.features[start:stop],
            target_name=self.target_name,
            metadata=dict(self.metadata),
        )

    def select_features(self, names: list[str]) -> "TimeSeriesDataset":
        missing = [n for n in names if n not in self.feature_names]
        if missing:
            raise ConfigError(f"unknown feature columns: {missing}")
        idx = [self.feature_names.index(n) for n in names]
        return TimeSeriesDataset(
            week=self.week,
            year=self.year,
            target=self.target,
            feature_names=list(names),
            features=self.features[:, idx],
            target_name=self.target_name,
            metadata=dict(self.metadata),
        )

    def to_frame(self) -> pd.DataFrame:
        cols = {"week": self.week, "year": self.year, self.target_name: self.target}
        for i, name in enumerate(self.feature_names):
            cols[name] = self.features[:, i]
        return pd.DataFrame(cols)


def load_dataset(path, schema: ColumnSchema | None = None) -> TimeSeriesDataset:
    """Load a CSV into a validated dataset.

    Required columns per the schema; every other column is kept as a
    candidate feature, in file order. Rejects missing values, non-numeric
    cells and non-chronological rows, naming the offending row/column.
    """
    schema = schema or ColumnSchema()
    try:
        frame = pd.read_csv(path)
    except FileNotFoundError:
        raise DataError(f"no such file: {path}") from None
    except Exception as exc:
        raise DataError(f"cannot parse CSV {path}: {exc}") from None

    for col in (schema.week, schema.year, schema.target):
        if col not in frame.columns:
            raise DataError(f"missing required column '{col}' in {path}")

    def numeric(col: str) -> np.ndarray:
        values = pd.to_numeric(frame[col], errors="coerce")
        bad = values.isna()
        if bad.any():
            row = int(np.argmax(bad.to_numpy()))
            raise DataError(f"non-numeric or missing value in column '{col}' at row {row}")
        return values.to_numpy(dtype=np.float64)

    week = numeric(schema.week)
    year = numeric(schema.year)
    if np.any(week != np.round(week)) or np.any(year != np.round(year)):
        raise DataError("week and year columns must hold integers")
    feature_names = [
        c for c in frame.columns if c not in (schema.week, schema.year, schema.target)
    ]
    ds = TimeSeriesDataset(
        week=week.astype(np.int64),
        year=year.astype(np.int64),
        target=numeric(schema.target),
        feature_names=feature_names,
        features=np.column_stack([numeric(c) for c in feature_names])
        if feature_names
        else np.zeros((len(week), 0)),
        target_name=schema.target,
    )
    ds.validate()
    return ds


def chronological_split(
    ds: TimeSeriesDataset, ratios: tuple[float, float, float] = (0.6, 0.2, 0.2)
) -> tuple[TimeSeriesDataset, TimeSeriesDataset, TimeSeriesDataset]:
    """Split rows into contiguous train/val/test blocks, in order.

    Val and test get floor(ratio * n) rows; the remainder stays with the
    training prefix so its concatenation with val and test reproduces the
    original sequence.
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ConfigError(f"ratios must be three positive numbers, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"ratios must sum to 1, got {sum(ratios)}")
    n = ds.n_rows
    n_val = int(np.floor(ratios[1] * n))
    n_test = int(np.floor(ratios[2] * n))
    n_train = n - n_val - n_test
    if min(n_train, n_val, n_test) <= 0:
        raise ConfigError(
            f"split of {n} rows at ratios {ratios} leaves an empty part "
            f"(train={n_train}, val={n_val}, test={n_test})"
        )
    return (
        ds.slice_rows(0, n_train),
        ds.slice_rows(n_train, n_train + n_val),
        ds.slice_rows(n_train + n_val, n),
    )


@dataclass
class NormStats:
    """Per-column mean/std fitted on the training split (population std)."""

    mean: dict[str, float]
    std: dict[str, float]

    def to_json_dict(self) -> dict:
        return {
            col: {"mean": self.mean[col], "std": self.std[col]} for col in self.mean
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "NormStats":
        return cls(
            mean={c: float(v["mean"]) for c, v in d.items()},
            std={c: float(v["std"]) for c, v in d.items()},
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path) -> "NormStats":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


def fit_normalizer(train: TimeSeriesDataset) -> NormStats:
    """Fit per-column mean and population std on the training split.

    Includes the target, every feature and the year column (the latter is
    used for timestamp standardization only).
    """
    if train.n_rows == 0:
        raise ConfigError("cannot fit normalizer on an empty split")
    mean: dict[str, float] = {}
    std: dict[str, float] = {}
    columns = [(train.target_name, train.target)]
    columns += [(n, train.features[:, i]) for i, n in enumerate(train.feature_names)]
    columns.append(("year", train.year.astype(np.float64)))
    for name, col in columns:
        m = float(np.mean(col))
        s = float(np.std(col))  # population (1/n) convention
        if s == 0.0:
            raise ConfigError(f"column '{name}' is constant on the training split")
        mean[name] = m
        std[name] = s
    return NormStats(mean=mean, std=std)


def apply_normalizer(ds: TimeSeriesDataset, stats: NormStats) -> TimeSeriesDataset:
    """Return a copy with target and features z-scored using fitted stats."""
    for name in [ds.target_name, *ds.feature_names]:
        if name not in stats.mean:
            raise ConfigError(f"normalizer has no stats for column '{name}'")
    target = (ds.target - stats.mean[ds.target_name]) / stats.std[ds.target_name]
    features = ds.features.copy()
    for i, name in enumerate(ds.feature_names):
        features[:, i] = (features[:, i] - stats.mean[name]) / stats.std[name]
    return TimeSeriesDataset(
        week=ds.week,
        year=ds.year,
        target=target,
        feature_names=list(ds.feature_names),
        features=features,
        target_name=ds.target_name,
        metadata=dict(ds.metadata),
    )


def denormalize_target(values: np.ndarray, stats: NormStats, target_name: str) -> np.ndarray:
    return np.asarray(values) * stats.std[target_name] + stats.mean[target_name]


@dataclass
class EncodedTimestamps:
    """Week stamps scaled uniformly into [-1/2, 1/2]; year stamps z-scored
    with training-split statistics."""

    w: np.ndarray
    y: np.ndarray


def encode_timestamps(ds: TimeSeriesDataset, stats: NormStats) -> EncodedTimestamps:
    """Map weeks to [-0.5, 0.5] and standardize years with train stats."""
    if np.any((ds.week < 1) | (ds.week > 53)):
        raise DataError("week out of range [1, 53]")
    # week 53 lands exactly on the 0.5 endpoint; clip guards rounding only
    w = np.clip((ds.week - 1) / WEEKS_PER_YEAR, 0.0, 1.0) - 0.5
    y = (ds.year.astype(np.float64) - stats.mean["year"]) / stats.std["year"]
    return EncodedTimestamps(w=w, y=y)


@dataclass
class WindowSample:
    """One supervised sample: an input window and the rows right after it."""

    x_hist: np.ndarray  # (seq_len,)
    z_hist: np.ndarray  # (seq_len, F)
    w_hist: np.ndarray  # (seq_len,)
    y_hist: np.ndarray  # (seq_len,)
    x_future: np.ndarray  # (pred_len,)
    start: int  # row index of the window's first input element
    label_len: int  # kept as metadata; the model consumes no decoder labels


def make_windows(
    ds: TimeSeriesDataset,
    enc: EncodedTimestamps,
    seq_len: int,
    label_len: int,
    pred_len: int,
    stride: int = 1,
) -> list[WindowSample]:
    """Slide a (seq_len history, pred_len future) window over one split.

    Windows never cross split boundaries; with stride 1 the count is
    n_rows - seq_len - pred_len + 1.
    """
    if seq_len < 1 or pred_len < 1 or stride < 1:
        raise ConfigError("seq_len, pred_len and stride must be >= 1")
    n = ds.n_rows
    needed = seq_len + pred_len
    if n < needed:
        raise ConfigError(
            f"split of {n} rows is too short for windows: needs at least {needed}"
        )
    samples = []
    for start in range(0, n - needed + 1, stride):
        mid = start + seq_len
        samples.append(
            WindowSample(
                x_hist=ds.target[start:mid],
                z_hist=ds.features[start:mid],
                w_hist=enc.w[start:mid],
                y_hist=enc.y[start:mid],
                x_future=ds.target[mid : mid + pred_len],
                start=start,
                label_len=label_len,
            )
        )
    return samples


def stack_windows(windows: list[WindowSample]) -> dict[str, np.ndarray]:
    """Stack samples into batched arrays keyed like WindowSample fields."""
    if not windows:
        raise ConfigError("cannot stack an empty window list")
    return {
        "x_hist": np.stack([s.x_hist for s in windows]),
        "z_hist": np.stack([s.z_hist for s in windows]),
        "w_hist": np.stack([s.w_hist for s in windows]),
        "y_hist": np.stack([s.y_hist for s in windows]),
        "x_future": np.stack([s.x_future for s in windows]),
    }


@dataclass
class PreparedData:
    """All artifacts of the standard preprocessing chain for one dataset."""

    stats: NormStats
    splits: dict[str, TimeSeriesDataset]  # normalized train/val/test
    windows: dict[str, list[WindowSample]]
    target_name: str


def prepare(
    ds: TimeSeriesDataset,
    seq_len: int,
    label_len: int,
    pred_len: int,
    ratios: tuple[float, float, float] = (0.6, 0.2, 0.2),
    stats: NormStats | None = None,
) -> PreparedData:
    """Split chronologically, normalize with train stats, window each split.

    Pass precomputed ``stats`` (e.g. from a checkpoint) to reuse them instead
    of refitting; they must cover all present columns.
    """
    train, val, test = chronological_split(ds, ratios)
    if stats is None:
        stats = fit_normalizer(train)
    splits = {}
    windows = {}
    for name, part in (("train", train), ("val", val), ("test", test)):
        normed = apply_normalizer(part, stats)
        enc = encode_timestamps(part, stats)
        splits[name] = normed
        windows[name] = make_windows(normed, enc, seq_len, label_len, pred_len)
    return PreparedData(
        stats=stats, splits=splits, windows=windows, target_name=ds.target_name
    )

"""k-nearest-neighbor mutual information estimation and MI-ranked feature
selection.

Uses the classic KSG estimator (variant 1): Chebyshev neighborhoods in the
joint space, strict-inequality neighbor counts in the marginals and

    MI = psi(k) + psi(n) - mean(psi(n_x + 1) + psi(n_y + 1))

clamped at 0 from below. A tiny deterministic jitter (1e-10 * std, seeded
from the sample bytes) breaks distance ties so results are reproducible and
exactly symmetric in the two arguments.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma

from .errors import ConfigError
from .data import TimeSeriesDataset

JITTER_SCALE = 1e-10


def _jitter(values: np.ndarray, seed: int) -> np.ndarray:
    """Add seeded tie-breaking noise derived from the sample's own bytes,
    so the same series always gets the same jitter regardless of pairing."""
    scale = float(np.std(values))
    if scale == 0.0:
        scale = 1.0
    digest = hashlib.blake2b(
        values.tobytes() + seed.to_bytes(8, "little", signed=True), digest_size=8
    ).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    return values + rng.standard_normal(values.shape) * (JITTER_SCALE * scale)


def _marginal_counts(values: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """Per point i: how many other points lie strictly within radii[i]."""
    order = np.argsort(values, kind="stable")
    sorted_vals = values[order]
    hi = np.searchsorted(sorted_vals, values + radii, side="left")
    lo = np.searchsorted(sorted_vals, values - radii, side="right")
    return hi - lo - 1  # excludes the point itself


def estimate_mi(x, y, k: int = 3, seed: int = 0) -> float:
    """Estimate the mutual information between two scalar series, in nats.

    Deterministic given (x, y, k, seed) and exactly symmetric in x and y.
    The raw estimate can dip slightly negative for independent data; the
    returned value is clamped to >= 0.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape != y.shape:
        raise ConfigError(f"series lengths differ: {x.size} vs {y.size}")
    n = x.size
    if k < 1:
        raise ConfigError(f"neighbor count must be >= 1, got {k}")
    if k >= n - 1 or n < k + 2:
        raise ConfigError(f"need at least k+2={k + 2} samples, got {n}")

    xj = _jitter(x, seed)
    yj = _jitter(y, seed)
    joint = np.column_stack([xj, yj])
    tree = cKDTree(joint)
    dist, _ = tree.query(joint, k=k + 1, p=np.inf)
    eps = dist[:, k]

    n_x = _marginal_counts(xj, eps)
    n_y = _marginal_counts(yj, eps)
    raw = digamma(k) + digamma(n) - float(np.mean(digamma(n_x + 1) + digamma(n_y + 1)))
    return max(0.0, raw)


@dataclass
class MIResult:
    """MI estimates for every candidate feature against the target."""

    mi: dict[str, float]
    rank: dict[str, int]  # 1 = highest MI; ties broken by column order
    k: int

    def ranked_names(self) -> list[str]:
        return sorted(self.rank, key=self.rank.get)

    def to_json_dict(self) -> dict:
        return {
            name: {"mi": self.mi[name], "rank": self.rank[name]} for name in self.mi
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)


def mi_table(
    ds: TimeSeriesDataset, k: int = 3, seed: int = 0
) -> MIResult:
    """Estimate MI of every feature column against the target column.

    Computed on raw (pre-normalization) values; MI is invariant under
    per-variable monotone rescaling, so this is a convention, fixed for
    reproducibility.
    """
    if ds.n_features == 0:
        raise ConfigError("dataset has no candidate feature columns")
    mi = {
        name: estimate_mi(ds.features[:, i], ds.target, k=k, seed=seed)
        for i, name in enumerate(ds.feature_names)
    }
    order = sorted(
        range(ds.n_features), key=lambda i: (-mi[ds.feature_names[i]], i)
    )
    rank = {ds.feature_names[i]: pos + 1 for pos, i in enumerate(order)}
    return MIResult(mi=mi, rank=rank, k=k)


def select_features(
    ds: TimeSeriesDataset,
    top_k: int | None = None,
    min_mi: float | None = None,
    pinned: tuple[str, ...] = (),
    k: int = 3,
    seed: int = 0,
) -> tuple[list[str], MIResult]:
    """Pick feature columns by MI against the target.

    Pinned columns are always kept and do not count against top_k. The
    returned list is ordered by MI descending with ties broken by original
    column order.
    """
    if (top_k is None) == (min_mi is None):
        raise ConfigError("specify exactly one of top_k or min_mi")
    unknown = [p for p in pinned if p not in ds.feature_names]
    if unknown:
        raise ConfigError(f"pinned columns not in dataset: {unknown}")
    result = mi_table(ds, k=k, seed=seed)
    candidates = [n for n in result.ranked_names() if n not in pinned]
    if top_k is not None:
        if top_k < 1:
            raise ConfigError(f"top_k must be >= 1, got {top_k}")
        if top_k > len(candidates):
            raise ConfigError(
                f"top_k={top_k} exceeds the {len(candidates)} unpinned candidates"
            )
        chosen = set(candidates[:top_k]) | set(pinned)
    else:
        chosen = {n for n in candidates if result.mi[n] >= min_mi} | set(pinned)
    selected = [n for n in result.ranked_names() if n in chosen]
    return selected, result

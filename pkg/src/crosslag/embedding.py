"""Per-timestep channel enrichment and projection into model width.

Each series is expanded into value, annual-drift, weekly-periodicity,
local-average, (endogenous only) residual and rate-of-change channels, then
linearly projected to d_model. Exogenous features are embedded one by one
with a shared projection, giving a (T, F, d_model) tensor that keeps the
per-feature identity needed by the lagged attention downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError
from .tensor import Tensor, as_tensor, concat, conv1d_causal, dropout

ENDO_CHANNELS = 9  # value, drift, 4 week channels, local avg, residual, delta
EXO_CHANNELS = 8  # as above minus the residual


@dataclass
class EmbeddingConfig:
    d_model: int = 128
    periodicity: float = 50.0
    local_window: int = 4
    dropout: float = 0.1

    def validate(self) -> None:
        if self.d_model < 1:
            raise ConfigError("d_model must be >= 1")
        if self.periodicity <= 0:
            raise ConfigError("periodicity must be > 0")
        if self.local_window < 1:
            raise ConfigError("local_window must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")


@dataclass
class EmbeddingParams:
    """Learnable pieces of both embeddings.

    The two projections are shared across time; the exogenous one is also
    shared across features. Separate smoothing weights cover the target
    series and the feature series.
    """

    year_scale: Tensor  # scalar
    year_shift: Tensor  # scalar
    endo_smooth: Tensor  # (local_window,)
    exo_smooth: Tensor  # (local_window,)
    endo_w: Tensor  # (9, d_model)
    endo_b: Tensor  # (d_model,)
    exo_w: Tensor  # (8, d_model)
    exo_b: Tensor  # (d_model,)


def week_periodicity(w, periodicity: float) -> Tensor:
    """Expand scaled week stamps into sin/cos channels at one and two times
    the base angle theta = 2*pi*w / periodicity.

    w: (..., T) in [-0.5, 0.5] -> (..., T, 4) ordered
    (sin t, cos t, sin 2t, cos 2t). Parameter-free, so computed in numpy.
    """
    w = np.asarray(w, dtype=np.float64)
    theta = 2.0 * math.pi * w / periodicity
    return as_tensor(
        np.stack(
            [np.sin(theta), np.cos(theta), np.sin(2 * theta), np.cos(2 * theta)],
            axis=-1,
        )
    )


def annual_drift(y, scale: Tensor, shift: Tensor) -> Tensor:
    """Learnable affine map of standardized year stamps: scale * y + shift."""
    return as_tensor(y) * scale + shift


def rate_of_change(x) -> Tensor:
    """First difference along the last axis, zero at the first element."""
    x = as_tensor(x)
    if x.shape[-1] == 1:
        return x * 0.0
    head = x[..., :1] * 0.0
    return concat([head, x[..., 1:] - x[..., :-1]], axis=-1)


def local_average(x, weights: Tensor) -> Tensor:
    """Learnable causal moving average over the previous local_window values."""
    return conv1d_causal(x, weights)


def _series_channels(
    x: Tensor, w_channels: Tensor, y_enc: Tensor, smooth: Tensor, with_residual: bool
) -> Tensor:
    """Stack per-timestep channels in the fixed contract order."""
    smoothed = local_average(x, smooth)
    cols = [x, y_enc]

    def last_axis(t: Tensor) -> Tensor:
        return t.reshape(t.shape + (1,))

    out = [last_axis(c) for c in cols] + [w_channels]
    out.append(last_axis(smoothed))
    if with_residual:
        out.append(last_axis(x - smoothed))
    out.append(last_axis(rate_of_change(x)))
    return concat(out, axis=-1)


def embed_endogenous(
    x,
    w,
    y,
    params: EmbeddingParams,
    config: EmbeddingConfig,
    rng: np.random.Generator | None = None,
    training: bool = False,
) -> Tensor:
    """Embed the target series: (..., T) -> (..., T, d_model).

    Channel order: value, annual drift, the four weekly channels, local
    average, residual (value minus local average), rate of change.
    """
    x = as_tensor(x)
    w = np.asarray(w, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != w.shape or x.shape != y.shape:
        raise DimensionError(
            f"series/timestamp shapes differ: {x.shape}, {w.shape}, {y.shape}"
        )
    channels = _series_channels(
        x,
        week_periodicity(w, config.periodicity),
        annual_drift(y, params.year_scale, params.year_shift),
        params.endo_smooth,
        with_residual=True,
    )
    out = channels @ params.endo_w + params.endo_b
    return dropout(out, config.dropout if training else 0.0, rng)


def embed_exogenous(
    z,
    w,
    y,
    params: EmbeddingParams,
    config: EmbeddingConfig,
    rng: np.random.Generator | None = None,
    training: bool = False,
) -> Tensor:
    """Embed each feature column independently: (..., T, F) -> (..., T, F, d_model).

    Same channels as the endogenous embedding minus the residual; one shared
    projection across features.
    """
    z = as_tensor(z)
    if z.ndim < 2:
        raise DimensionError(f"feature block must be (..., T, F), got {z.shape}")
    n_features = z.shape[-1]
    if n_features < 1:
        raise DimensionError("need at least one exogenous feature")
    w_channels = week_periodicity(w, config.periodicity)
    y_enc = annual_drift(y, params.year_scale, params.year_shift)
    per_feature = []
    for f in range(n_features):
        channels = _series_channels(
            z[..., f], w_channels, y_enc, params.exo_smooth, with_residual=False
        )
        emb = channels @ params.exo_w + params.exo_b
        per_feature.append(emb.reshape(emb.shape[:-1] + (1, emb.shape[-1])))
    out = concat(per_feature, axis=-2)
    return dropout(out, config.dropout if training else 0.0, rng)

"""Finite-difference verification of reverse-mode gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError
from .tensor import Tensor

DENOM_FLOOR = 1e-8


@dataclass
class GradReport:
    """Comparison of analytic vs central-difference gradients.

    rows: (param name, flat index, analytic, numeric) for every checked
    element. Relative differences use max(|analytic|, |numeric|, 1e-8) as
    the denominator.
    """

    max_abs_diff: float
    max_rel_diff: float
    rows: list[tuple[str, int, float, float]] = field(repr=False, default_factory=list)
    checked: int = 0
    total_elements: int = 0

    def worst(self, n: int = 5) -> list[tuple[str, int, float, float]]:
        def rel(row):
            _, _, a, num = row
            return abs(a - num) / max(abs(a), abs(num), DENOM_FLOOR)

        return sorted(self.rows, key=rel, reverse=True)[:n]


def check_gradients(
    loss_fn,
    params: dict[str, Tensor],
    eps: float = 1e-5,
    max_checks: int = 10_000,
    seed: int = 0,
) -> GradReport:
    """Compare loss_fn's reverse-mode gradients against central differences.

    loss_fn must be deterministic (dropout off or seed pinned) and close over
    the tensors in ``params``. Every parameter element is checked unless the
    total exceeds ``max_checks``, in which case a seeded random subsample of
    that size is used. Parameter data is perturbed in place and restored.
    """
    loss = loss_fn()
    if loss.data.size != 1 or not np.isfinite(loss.data):
        raise NumericError("loss_fn must return a finite scalar")
    for p in params.values():
        p.grad = None
    loss.backward()
    analytic = {
        name: (p.grad if p.grad is not None else np.zeros_like(p.data))
        for name, p in params.items()
    }

    coords = [
        (name, idx)
        for name, p in params.items()
        for idx in range(p.data.size)
    ]
    total = len(coords)
    if total > max_checks:
        picks = np.random.default_rng(seed).choice(total, size=max_checks, replace=False)
        coords = [coords[i] for i in sorted(picks)]

    rows = []
    max_abs = 0.0
    max_rel = 0.0
    for name, idx in coords:
        p = params[name]
        flat = p.data.reshape(-1)
        orig = flat[idx]
        flat[idx] = orig + eps
        f_plus = float(loss_fn().data)
        flat[idx] = orig - eps
        f_minus = float(loss_fn().data)
        flat[idx] = orig
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NumericError(f"non-finite loss while perturbing {name}[{idx}]")
        numeric = (f_plus - f_minus) / (2.0 * eps)
        a = float(analytic[name].reshape(-1)[idx])
        rows.append((name, idx, a, numeric))
        diff = abs(a - numeric)
        max_abs = max(max_abs, diff)
        max_rel = max(max_rel, diff / max(abs(a), abs(numeric), DENOM_FLOOR))

    return GradReport(
        max_abs_diff=max_abs,
        max_rel_diff=max_rel,
        rows=rows,
        checked=len(coords),
        total_elements=total,
    )

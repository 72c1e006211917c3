"""Euclidean projection onto the l1-ball ``{z : ||z||_1 <= L}``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ValidationError

__all__ = ["ProjectionResult", "project_l1"]


@dataclass(frozen=True)
class ProjectionResult:
    z: np.ndarray
    threshold: float
    active: bool


def project_l1(h, radius):
    """Project ``h`` onto the l1-ball of the given radius.

    Points already inside the ball are returned unchanged with threshold 0.
    Otherwise the magnitudes are sorted in decreasing order, the pivot count
    is the largest ``j`` with ``b_(j) > (sum_{i<=j} b_(i) - L) / j``, and every
    entry is soft-thresholded by ``theta = (sum_{i<=pivot} b_(i) - L) / pivot``.
    """
    h = np.asarray(h, dtype=float)
    if h.ndim != 1:
        h = h.ravel()
    radius = float(radius)
    if not radius > 0 or not np.isfinite(radius):
        raise ValidationError(f"radius must be positive, got {radius}")
    if not np.all(np.isfinite(h)):
        raise ValidationError("cannot project a vector with non-finite entries")

    mag = np.abs(h)
    if mag.sum() <= radius:
        return ProjectionResult(h.copy(), 0.0, False)

    b = np.sort(mag)[::-1]
    excess = np.cumsum(b) - radius
    j = np.arange(1, b.size + 1)
    pivot_count = int(np.flatnonzero(b - excess / j > 0)[-1]) + 1
    theta = excess[pivot_count - 1] / pivot_count
    z = np.sign(h) * np.maximum(mag - theta, 0.0)
    return ProjectionResult(z, float(theta), True)

"""Objective ``F(w) = U(w) + mu V(w)`` of the mean-reverting portfolio problem.

``U`` is a weighted sum of ratios of quadratic forms ``w'M_i w / w'M_0 w``
(scale-invariant in ``w``); ``V = 1 / w'M_0 w`` rewards spread variance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateDenominatorError, ValidationError

__all__ = [
    "PortfolioWeights",
    "ObjectiveValue",
    "Ratios",
    "ratios",
    "eval_U",
    "eval_V",
    "eval_F",
    "grad_F",
    "portfolio_variance",
]

# Relative threshold on w'M0w, scaled by ||w||^2 ||M0||.
DEGENERACY_RTOL = 1e-12


@dataclass(frozen=True)
class PortfolioWeights:
    """Spread weights ``w`` and, when a basis is known, asset weights ``B w``."""

    w: np.ndarray
    w_p: np.ndarray | None = None

    def __post_init__(self):
        w = np.array(self.w, dtype=float).ravel()
        if not np.all(np.isfinite(w)):
            raise ValidationError("weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        if self.w_p is not None:
            wp = np.array(self.w_p, dtype=float).ravel()
            wp.setflags(write=False)
            object.__setattr__(self, "w_p", wp)

    @classmethod
    def from_basis(cls, w, basis):
        w = np.asarray(w, dtype=float).ravel()
        return cls(w, basis.asset_weights(w))


@dataclass(frozen=True)
class ObjectiveValue:
    u: float
    v: float
    f: float
    mu: float


@dataclass(frozen=True)
class Ratios:
    """Quadratic forms at one point, reused by the objective, gradient and surrogate."""

    q0: float
    m0w: np.ndarray
    hw: np.ndarray
    r_h: float
    miw: tuple
    r: tuple  # r[i] = w'M_i w / q0 for i = 0..p (r[0] == 1)


def _as_vector(w):
    if isinstance(w, PortfolioWeights):
        return w.w
    return np.asarray(w, dtype=float).ravel()


def _checked_q0(w, m0):
    m0w = m0 @ w
    q0 = float(w @ m0w)
    scale = float(w @ w) * np.linalg.norm(m0, 2)
    if not q0 > DEGENERACY_RTOL * scale:
        raise DegenerateDenominatorError(
            f"w'M0w = {q0:.3e} is degenerate (w lies in the null space of M0)"
        )
    return q0, m0w


def portfolio_variance(w, moments):
    w = _as_vector(w)
    return float(w @ moments[0] @ w)


def ratios(w, spec, moments):
    """Ratios ``r_h`` and ``r_i = w'M_i w / w'M_0 w`` at ``w``."""
    w = _as_vector(w)
    if w.shape[0] != moments.n_spreads:
        raise ValidationError(f"w has length {w.shape[0]}, expected {moments.n_spreads}")
    q0, m0w = _checked_q0(w, moments[0])
    hw = spec.h_matrix @ w
    miw = [m0w]
    r = [1.0]
    for i in range(1, moments.lag_order + 1):
        v = moments[i] @ w
        miw.append(v)
        r.append(float(w @ v) / q0)
    return Ratios(q0, m0w, hw, float(w @ hw) / q0, tuple(miw), tuple(r))


def _u_from_ratios(rt, spec):
    u = spec.xi * rt.r_h
    if spec.zeta:
        u += spec.zeta * rt.r[1] ** 2
    if spec.eta:
        u += spec.eta * sum(x * x for x in rt.r[2:])
    return u


def eval_U(w, spec, moments):
    """Mean-reversion criterion ``U(w)``."""
    return _u_from_ratios(ratios(w, spec, moments), spec)


def eval_V(w, moments):
    """Reciprocal portfolio variance ``1 / w'M_0 w``."""
    w = _as_vector(w)
    q0, _ = _checked_q0(w, moments[0])
    return 1.0 / q0


def eval_F(w, spec, moments, mu):
    mu = float(mu)
    if not mu >= 0:
        raise ValidationError(f"mu must be >= 0, got {mu}")
    rt = ratios(w, spec, moments)
    u = _u_from_ratios(rt, spec)
    v = 1.0 / rt.q0
    return ObjectiveValue(u, v, u + mu * v, mu)


def _ratio_grad(mw, r, rt):
    # d/dw (w'Mw / w'M0w) = 2 (Mw - r M0w) / q0
    return 2.0 * (mw - r * rt.m0w) / rt.q0


def grad_F(w, spec, moments, mu):
    """Analytical gradient of ``U + mu V``."""
    rt = ratios(w, spec, moments)
    g = spec.xi * _ratio_grad(rt.hw, rt.r_h, rt)
    if spec.zeta:
        g = g + spec.zeta * 2.0 * rt.r[1] * _ratio_grad(rt.miw[1], rt.r[1], rt)
    if spec.eta:
        for i in range(2, moments.lag_order + 1):
            g = g + spec.eta * 2.0 * rt.r[i] * _ratio_grad(rt.miw[i], rt.r[i], rt)
    g = g - float(mu) * 2.0 * rt.m0w / rt.q0**2
    return g

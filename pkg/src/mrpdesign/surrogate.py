"""Strongly convex quadratic surrogate of the objective at an anchor point.

Each ratio ``r(w) = w'Mw / w'M0w`` is linearized at the anchor ``w_k``::

    r(w) ~ r_k + 2 (d_0 - d_r)'(w - w_k),   d_0 = M w_k / q0,  d_r = r_k M0 w_k / q0

with ``q0 = w_k'M0 w_k``. Because ``(d_0 - d_r)'w_k = 0`` the linearization
reduces to ``r_k + 2 c'w``. Squared ratios become convex quadratics, the
``xi`` term and ``V`` are linearized, and a proximal term ``tau ||w - w_k||^2``
makes the model strongly convex. Constants are dropped, leaving
``w'Aw + b'w``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .criteria import ratios
from .exceptions import ProximalWarning, ValidationError

__all__ = ["QuadraticModel", "build_surrogate", "eval_surrogate", "default_tau"]


@dataclass(frozen=True)
class QuadraticModel:
    a: np.ndarray
    b: np.ndarray
    tau: float
    anchor: np.ndarray
    a_u: np.ndarray
    offset: float = 0.0  # constant dropped from the model; F_tilde = w'Aw + b'w + offset

    def gradient(self, w):
        return 2.0 * self.a @ w + self.b


def default_tau(moments, anchor, mu=0.0):
    """Proximal weight ``(1 + mu V) * (trace(M0) / N) / (w'M0w)`` at ``anchor``.

    The ratios in ``U`` have curvature of order ``||M||/w'M0w`` and ``mu V``
    adds ``mu V`` times that, so this keeps the proximal term on the scale of
    the objective whatever the price units or the leverage budget.
    """
    m0 = moments[0]
    w = np.asarray(getattr(anchor, "w", anchor), dtype=float).ravel()
    q0 = float(w @ m0 @ w)
    return (1.0 + float(mu) / q0) * float(np.trace(m0)) / m0.shape[0] / q0


def build_surrogate(anchor, spec, moments, mu, tau=None):
    """Quadratic model ``w'Aw + b'w`` matching ``grad F`` at ``anchor``."""
    wk = np.array(getattr(anchor, "w", anchor), dtype=float).ravel()
    rt = ratios(wk, spec, moments)
    if tau is None:
        tau = (1.0 + float(mu) / rt.q0) * float(np.trace(moments[0])) / wk.shape[0] / rt.q0
    tau = float(tau)
    if not tau >= 0:
        raise ValidationError(f"tau must be >= 0, got {tau}")
    if tau == 0:
        warnings.warn("tau = 0: surrogate is only convex, not strongly convex", ProximalWarning, stacklevel=2)
    mu = float(mu)

    n = wk.shape[0]
    q0 = rt.q0

    def direction(mw, r):
        return (mw - r * rt.m0w) / q0

    a_u = np.zeros((n, n))
    b_u = 2.0 * spec.xi * direction(rt.hw, rt.r_h)
    # F_tilde(w_k) = F(w_k): xi term contributes r_h - 2 c_h'w_k = r_h (c_h'w_k = 0)
    const = spec.xi * rt.r_h + mu / q0

    squared = []
    if spec.zeta:
        squared.append((spec.zeta, 1))
    if spec.eta:
        squared.extend((spec.eta, i) for i in range(2, moments.lag_order + 1))
    for weight, i in squared:
        c = direction(rt.miw[i], rt.r[i])
        # weight * (r_i + 2 c'w)^2 = 4 w'cc'w + 4 r_i c'w + r_i^2
        a_u += 4.0 * weight * np.outer(c, c)
        b_u += 4.0 * weight * rt.r[i] * c
        const += weight * rt.r[i] ** 2

    b_v = -2.0 * rt.m0w / q0**2
    a = a_u + tau * np.eye(n)
    b = b_u + mu * b_v - 2.0 * tau * wk
    # V linearized as 1/q0 + b_v'(w - w_k); proximal adds tau w_k'w_k
    offset = const - mu * float(b_v @ wk) + tau * float(wk @ wk)
    a = 0.5 * (a + a.T)
    a_u = 0.5 * (a_u + a_u.T)
    for arr in (a, b, a_u, wk):
        arr.setflags(write=False)
    return QuadraticModel(a, b, tau, wk, a_u, offset)


def eval_surrogate(model, w):
    w = np.asarray(w, dtype=float).ravel()
    if w.shape[0] != model.b.shape[0]:
        raise ValidationError(f"w has length {w.shape[0]}, model has dimension {model.b.shape[0]}")
    return float(w @ model.a @ w + model.b @ w)

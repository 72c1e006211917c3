"""ADMM for ``min w'Aw + b'w  s.t.  ||B w||_1 <= L``.

The constraint is split as ``z = B w`` with ``z`` in the l1-ball. Each sweep
solves a fixed linear system for ``w`` (factored once), projects
``B w + u`` onto the ball for ``z``, and updates the scaled dual ``u``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .exceptions import NumericalError, ValidationError
from .market_data import SpreadBasis
from .projection import project_l1

__all__ = ["AdmmConfig", "AdmmState", "solve_subproblem", "subproblem_objective"]


@dataclass(frozen=True)
class AdmmConfig:
    """Penalty and stopping parameters.

    ``primal_tol``/``dual_tol`` default to ``1e-8 * sqrt(N)`` when left as None.
    ``adaptive`` turns on residual balancing (double/halve ``rho`` when one
    residual exceeds the other by ``10x``).
    """

    rho: float = 1.0
    max_iters: int = 20000
    primal_tol: float | None = None
    dual_tol: float | None = None
    adaptive: bool = False

    def __post_init__(self):
        if not (self.rho > 0 and math.isfinite(self.rho)):
            raise ValidationError(f"rho must be positive, got {self.rho}")
        if int(self.max_iters) < 1:
            raise ValidationError(f"max_iters must be positive, got {self.max_iters}")
        for name in ("primal_tol", "dual_tol"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValidationError(f"{name} must be positive, got {v}")

    def tolerances(self, n):
        default = 1e-8 * math.sqrt(n)
        return (self.primal_tol if self.primal_tol is not None else default,
                self.dual_tol if self.dual_tol is not None else default)


@dataclass
class AdmmState:
    w: np.ndarray
    z: np.ndarray
    u: np.ndarray
    rho: float
    primal_residuals: list = field(default_factory=list)
    dual_residuals: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False

    @property
    def y(self):
        """Unscaled dual variable ``rho * u``."""
        return self.rho * self.u


def subproblem_objective(a, b, w):
    return float(w @ a @ w + b @ w)


def _factor(a, B, rho):
    K = 2.0 * a + rho * (B.T @ B)
    try:
        return linalg.cho_factor(K, lower=True, check_finite=False)
    except linalg.LinAlgError:
        lam = float(linalg.eigvalsh(0.5 * (K + K.T))[0])
        raise NumericalError(
            f"ADMM system 2A + rho B'B is not positive definite (lambda_min = {lam:.3e}); "
            "use tau > 0 or a full-column-rank basis"
        ) from None


def solve_subproblem(a, b, basis, cfg=None, warm=None):
    """Run ADMM on the constrained quadratic and return ``(w, state)``.

    ``basis`` carries both ``B`` and the radius ``L``. A previous
    :class:`AdmmState` may be supplied to warm-start ``w``, ``z`` and ``u``.
    Hitting ``max_iters`` is not an error; check ``state.converged``. The
    returned ``w`` is always feasible: if ``||B w||_1`` overshoots ``L`` by the
    residual, ``w`` is rescaled onto the boundary.
    """
    cfg = cfg or AdmmConfig()
    if not isinstance(basis, SpreadBasis):
        raise ValidationError("basis must be a SpreadBasis (matrix plus leverage budget)")
    B = basis.basis
    L = basis.leverage_budget
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float).ravel()
    n = b.shape[0]
    if a.shape != (n, n) or B.shape[1] != n:
        raise ValidationError(f"shape mismatch: a {a.shape}, b {b.shape}, B {B.shape}")
    ptol, dtol = cfg.tolerances(n)

    rho = cfg.rho
    if warm is not None:
        w = np.array(warm.w, dtype=float)
        z = np.array(warm.z, dtype=float)
        u = np.array(warm.u, dtype=float) * (warm.rho / rho)
    else:
        w = np.zeros(n)
        z = B @ w
        u = np.zeros(B.shape[0])
    factor = _factor(a, B, rho)
    state = AdmmState(w, z, u, rho)

    for it in range(1, int(cfg.max_iters) + 1):
        w = linalg.cho_solve(factor, -(b + rho * (B.T @ (u - z))), check_finite=False)
        Bw = B @ w
        z_old = z
        z = project_l1(Bw + u, L).z
        r = Bw - z
        u = u + r
        primal = float(np.linalg.norm(r))
        dual = rho * float(np.linalg.norm(B.T @ (z - z_old)))
        state.primal_residuals.append(primal)
        state.dual_residuals.append(dual)
        if primal <= ptol and dual <= dtol:
            state.converged = True
            break
        if cfg.adaptive:
            if primal > 10.0 * dual:
                rho *= 2.0
                u = u / 2.0
                factor = _factor(a, B, rho)
            elif dual > 10.0 * primal:
                rho /= 2.0
                u = u * 2.0
                factor = _factor(a, B, rho)

    state.w, state.z, state.u, state.rho = w, z, u, rho
    state.iterations = it
    # B w only reaches the ball up to the primal tolerance; shrinking w toward
    # the origin (always feasible) returns a point that satisfies the
    # constraint exactly while state.w keeps the raw iterate for warm starts.
    lev = float(np.abs(B @ w).sum())
    if lev > L:
        w = w * (L / lev)
    return w, state

"""Lagged autocovariance estimation and criterion assembly."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import linalg

from .exceptions import NumericalError, SingularMomentWarning, ValidationError
from .market_data import SpreadSeries

__all__ = [
    "CriterionKind",
    "LaggedMoments",
    "CriterionSpec",
    "estimate_moments",
    "build_criterion",
    "dump_moments",
    "load_moments",
    "MAX_CONDITION",
]

# Largest condition number of M0 accepted when inverting it for predictability.
MAX_CONDITION = 1e12


class CriterionKind(str, Enum):
    PREDICTABILITY = "predictability"
    PORTMANTEAU = "portmanteau"
    CROSSING = "crossing"
    PENALIZED_CROSSING = "penalized_crossing"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"pre": cls.PREDICTABILITY, "por": cls.PORTMANTEAU,
                   "cro": cls.CROSSING, "pcro": cls.PENALIZED_CROSSING}
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise ValidationError(
                f"unknown criterion {value!r}; expected one of pre, por, cro, pcro"
            ) from None

    @property
    def short(self):
        return {"predictability": "pre", "portmanteau": "por",
                "crossing": "cro", "penalized_crossing": "pcro"}[self.value]


def _symmetrize(a):
    return 0.5 * (a + a.T)


def _readonly(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LaggedMoments:
    """Symmetrized autocovariances ``M_0 .. M_p`` of an N-dimensional series.

    ``warnings`` lists conditions noticed during estimation (e.g. a zero-variance
    column making ``M_0`` singular).
    """

    m: tuple
    warnings: tuple = field(default=())

    def __post_init__(self):
        mats = tuple(_readonly(_symmetrize(np.atleast_2d(np.asarray(x, dtype=float)))) for x in self.m)
        if len(mats) < 2:
            raise ValidationError("need at least M_0 and M_1 (lag_order >= 1)")
        n = mats[0].shape[0]
        for i, a in enumerate(mats):
            if a.shape != (n, n):
                raise ValidationError(f"M_{i} has shape {a.shape}, expected {(n, n)}")
            if not np.all(np.isfinite(a)):
                raise ValidationError(f"M_{i} has non-finite entries")
        object.__setattr__(self, "m", mats)
        object.__setattr__(self, "warnings", tuple(self.warnings))

    @property
    def lag_order(self):
        return len(self.m) - 1

    @property
    def n_spreads(self):
        return self.m[0].shape[0]

    @property
    def m0(self):
        return self.m[0]

    def __getitem__(self, i):
        return self.m[i]


@dataclass(frozen=True)
class CriterionSpec:
    """Weights ``(xi, zeta, eta)`` and matrix ``H`` of the mean-reversion criterion."""

    kind: CriterionKind
    xi: float
    zeta: float
    eta: float
    h_matrix: np.ndarray
    lag_order: int

    def __post_init__(self):
        object.__setattr__(self, "kind", CriterionKind.parse(self.kind))
        for name in ("xi", "zeta", "eta"):
            v = float(getattr(self, name))
            if not v >= 0:
                raise ValidationError(f"{name} must be >= 0, got {v}")
            object.__setattr__(self, name, v)
        H = np.asarray(self.h_matrix, dtype=float)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise ValidationError(f"h_matrix must be square, got shape {H.shape}")
        if not np.allclose(H, H.T, rtol=0, atol=1e-12 * max(1.0, np.abs(H).max(initial=0))):
            raise ValidationError("h_matrix must be symmetric")
        object.__setattr__(self, "h_matrix", _readonly(_symmetrize(H)))
        if int(self.lag_order) < 1:
            raise ValidationError(f"lag_order must be >= 1, got {self.lag_order}")
        object.__setattr__(self, "lag_order", int(self.lag_order))


def estimate_moments(spreads, lag_order):
    """Sample autocovariances with a global mean and ``1/(T-i)`` normalization.

    Each raw estimate ``C_i`` is replaced by its symmetric part, since the
    criteria only ever use ``M_i`` inside quadratic forms.
    """
    s = spreads.values if isinstance(spreads, SpreadSeries) else np.asarray(spreads, dtype=float)
    if s.ndim == 1:
        s = s.reshape(-1, 1)
    p = int(lag_order)
    if p < 1:
        raise ValidationError(f"lag_order must be >= 1, got {lag_order}")
    T = s.shape[0]
    if T <= p + 1:
        raise ValidationError(f"need T > p + 1 observations, got T={T}, p={p}")

    x = s - s.mean(axis=0)
    flat = np.flatnonzero(np.all(s == s[0], axis=0))
    x[:, flat] = 0.0
    mats = [x[: T - i].T @ x[i:] / (T - i) for i in range(p + 1)]

    notes = []
    if flat.size:
        msg = f"spread column(s) {flat.tolist()} have zero variance; M_0 is singular"
        warnings.warn(msg, SingularMomentWarning, stacklevel=2)
        notes.append(msg)
    return LaggedMoments(tuple(mats), tuple(notes))


def _inverse_spd(m0):
    evals = linalg.eigvalsh(m0)
    lo, hi = evals[0], evals[-1]
    if not lo > 0 or hi / lo > MAX_CONDITION:
        cond = np.inf if lo <= 0 else hi / lo
        raise NumericalError(
            f"M_0 is numerically singular (condition number {cond:.3g} > {MAX_CONDITION:.0e}); "
            "regularize the moments or use the crossing criterion instead"
        )
    return linalg.cho_factor(m0, lower=True)


def build_criterion(moments, kind, eta=1.0):
    """Criterion weights and ``H`` for one of the four mean-reversion statistics.

    ``eta`` is only used by the penalized crossing statistic, where it must be
    positive.
    """
    kind = CriterionKind.parse(kind)
    n = moments.n_spreads
    p = moments.lag_order
    m0, m1 = moments[0], moments[1]
    if kind is CriterionKind.PREDICTABILITY:
        factor = _inverse_spd(m0)
        H = m1.T @ linalg.cho_solve(factor, m1)
        return CriterionSpec(kind, 1.0, 0.0, 0.0, _symmetrize(H), p)
    if kind is CriterionKind.PORTMANTEAU:
        return CriterionSpec(kind, 0.0, 1.0, 1.0, np.zeros((n, n)), p)
    if kind is CriterionKind.CROSSING:
        return CriterionSpec(kind, 1.0, 0.0, 0.0, m1, p)
    eta = float(eta)
    if not eta > 0:
        raise ValidationError(f"penalized crossing needs eta > 0, got {eta}")
    return CriterionSpec(kind, 1.0, 0.0, eta, m1, p)


def dump_moments(moments, path=None):
    """Serialize moments as JSON (``p`` plus row-major matrices)."""
    doc = {
        "lag_order": moments.lag_order,
        "n_spreads": moments.n_spreads,
        "matrices": [a.tolist() for a in moments.m],
        "warnings": list(moments.warnings),
    }
    text = json.dumps(doc, indent=2)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text


def load_moments(path):
    with open(path) as fh:
        doc = json.load(fh)
    mats = doc["matrices"]
    if len(mats) != doc["lag_order"] + 1:
        raise ValidationError(f"{path}: lag_order {doc['lag_order']} but {len(mats)} matrices")
    return LaggedMoments(tuple(np.array(a, dtype=float) for a in mats), tuple(doc.get("warnings", ())))

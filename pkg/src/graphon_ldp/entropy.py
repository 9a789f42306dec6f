"""Bernoulli relative entropy, the graphon rate functional and reference constants."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, ResolutionMismatch
from .graphon import GridGraphon, ReferenceGraphon, validate_reference
from .spectral import as_matrix, operator_norm


def bernoulli_relent(a: float, b: float) -> float:
    """R(a|b) = a log(a/b) + (1-a) log((1-a)/(1-b)), with 0 log 0 = 0."""
    a, b = float(a), float(b)
    if not (0.0 < b < 1.0):
        raise DomainError(f"reference probability must lie in (0, 1), got {b!r}")
    if not (0.0 <= a <= 1.0):
        raise DomainError(f"probability must lie in [0, 1], got {a!r}")
    if a == 0.0:
        return -math.log1p(-b)
    if a == 1.0:
        return -math.log(b)
    return a * math.log(a / b) + (1.0 - a) * math.log((1.0 - a) / (1.0 - b))


def relent(a, b) -> np.ndarray:
    """Entrywise R(a|b) for arrays; endpoints a in {0, 1} handled by branches."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any((b <= 0) | (b >= 1)):
        raise DomainError("reference probabilities must lie in (0, 1)")
    if np.any((a < 0) | (a > 1)):
        raise DomainError("probabilities must lie in [0, 1]")
    a, b = np.broadcast_arrays(a, b)
    out = np.empty(a.shape)
    lo, hi = a == 0.0, a == 1.0
    mid = ~(lo | hi)
    am, bm = a[mid], b[mid]
    out[mid] = am * np.log(am / bm) + (1.0 - am) * np.log((1.0 - am) / (1.0 - bm))
    out[lo] = -np.log1p(-b[lo])
    out[hi] = -np.log(b[hi])
    return out


def relent_derivative(a, b) -> np.ndarray:
    """dR(a|b)/da = log(a/(1-a)) - log(b/(1-b)) for a in (0, 1)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.log(a) - np.log1p(-a) - (np.log(b) - np.log1p(-b))


def rate_I(h, r) -> float:
    """I_r(h) = (1/N^2) sum_ij R(h_ij | r_ij)."""
    hv, rv = as_matrix(h), as_matrix(r)
    if hv.shape != rv.shape:
        raise ResolutionMismatch(f"resolutions differ: {hv.shape[0]} vs {rv.shape[0]}")
    return float(np.mean(relent(hv, rv)))


@dataclass(frozen=True)
class ReferenceConstants:
    C_r: float
    C0: float
    C1: float
    B_r: float
    N1: float
    N0: float
    K_r: Optional[float] = None
    m2: Optional[float] = None
    m3: Optional[float] = None
    m4: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


def reference_constants(r: ReferenceGraphon) -> ReferenceConstants:
    """All scaling constants of a reference graphon as block averages.

    K_r and the moments m_k of nu are only reported for rank-1 references.
    """
    v = r.grid.values
    c_r = operator_norm(v).norm
    consts = dict(
        C_r=c_r,
        C0=float(np.mean(-np.log1p(-v))),
        C1=float(np.mean(-np.log(v))),
        B_r=float(np.mean(v**3 * (1.0 - v))),
        N1=float(np.mean((1.0 - v) / v)),
        N0=float(np.mean(v / (1.0 - v))),
    )
    if r.structure == "rank1":
        nu = r.nu
        consts.update(
            K_r=c_r**2 / (2.0 * consts["B_r"]),
            m2=float(np.mean(nu**2)),
            m3=float(np.mean(nu**3)),
            m4=float(np.mean(nu**4)),
        )
    return ReferenceConstants(**consts)


def reflect(r: ReferenceGraphon) -> ReferenceGraphon:
    """The reflected reference 1 - r, with the same eta certificate."""
    return validate_reference(GridGraphon(1.0 - r.grid.values), r.eta)

"""Closed-form optimal perturbations and numerical probes of the three scaling regimes.

Near C_r (rank-1 references) psi_r(C_r + eps) ~ K_r eps^2 with minimiser
r + eps * (C_r/B_r) r^2 (1 - r).  Near the right end
C1 - psi_r(1 - eps) ~ eps [log(N1/eps) + 1] with minimiser 1 - eps (1-r)/(N1 r),
and the left end is the mirror image with N0 and r/(1-r).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .entropy import rate_I, reference_constants
from .errors import EmptyMask, NotConverged, RegimeUnavailable, ValidationError
from .graphon import ReferenceGraphon, block_average, validate_reference
from .optimizer import OptimizationResult, OptimizerOptions, minimize_rate_at_norm
from .spectral import operator_norm

REGIMES = ("center", "right_end", "left_end")


@dataclass(frozen=True)
class PerturbationField:
    regime: str
    delta: np.ndarray
    normalization_constant: float


def perturbation_shape(r: ReferenceGraphon, regime: str, c_r: Optional[float] = None) -> np.ndarray:
    """The optimal-perturbation formula for ``regime``, without the rank-1 check."""
    v = r.grid.values
    if regime == "center":
        if c_r is None:
            c_r = operator_norm(v).norm
        b_r = float(np.mean(v**3 * (1.0 - v)))
        return (c_r / b_r) * v**2 * (1.0 - v)
    if regime == "right_end":
        d = (1.0 - v) / v
    elif regime == "left_end":
        d = v / (1.0 - v)
    else:
        raise ValueError(f"unknown regime {regime!r}; expected one of {REGIMES}")
    return d / np.mean(d)


def optimal_perturbation(r: ReferenceGraphon, regime: str) -> PerturbationField:
    """Leading-order direction of the minimiser in ``regime``.

    The center field needs a rank-1 reference; for other references the
    curvature analysis behind it does not apply and RegimeUnavailable is raised.
    """
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}; expected one of {REGIMES}")
    if regime == "center" and r.structure != "rank1":
        raise RegimeUnavailable("center", "requires a rank-1 reference graphon")
    v = r.grid.values
    if regime == "center":
        const = float(np.mean(v**3 * (1.0 - v)))
    elif regime == "right_end":
        const = float(np.mean((1.0 - v) / v))
    else:
        const = float(np.mean(v / (1.0 - v)))
    delta = perturbation_shape(r, regime)
    delta.setflags(write=False)
    return PerturbationField(regime, delta, const)


@dataclass
class ScalingRow:
    epsilon: float
    empirical: float
    theory: float
    ratio: float
    minimizer_direction_err: float
    side: str
    beta: float
    psi: float
    converged: bool
    resolution: int
    lower_bound: float = math.nan
    result: Optional[OptimizationResult] = field(default=None, repr=False, compare=False)


@dataclass
class ScalingReport:
    regime: str
    rows: list
    extrapolated: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        rows = [{k: v for k, v in vars(r).items() if k != "result"} for r in self.rows]
        return {"regime": self.regime, "rows": rows,
                "extrapolated": self.extrapolated}


def richardson_zero(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Value at x = 0 of the interpolating polynomial through (xs, ys)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size == 1:
        return float(ys[0])
    coef = np.polyfit(xs, ys, xs.size - 1)
    return float(np.polyval(coef, 0.0))


def _probe_one(r: ReferenceGraphon, regime: str, epsilons, opts, warm: bool):
    consts = reference_constants(r)
    c_r = consts.C_r
    delta = perturbation_shape(r, regime, c_r)
    v = r.grid.values
    sides = (1, -1) if regime == "center" else (1,)
    rows = []
    for side in sides:
        prev = None
        for eps in epsilons:
            if regime == "center":
                beta = c_r + side * eps
            elif regime == "right_end":
                beta = 1.0 - eps
            else:
                beta = eps
            start = prev.h_beta.values if (warm and prev is not None) else None
            try:
                res = minimize_rate_at_norm(r, beta, opts, start=start, c_r=c_r)
            except NotConverged as exc:
                res = exc.result
            prev = res
            h = res.h_beta.values
            if regime == "center":
                empirical = res.psi_value / eps**2
                theory = consts.K_r
                err = np.sqrt(np.mean((h - v - side * eps * delta) ** 2)) / eps
            elif regime == "right_end":
                empirical = consts.C1 - res.psi_value
                theory = eps * (math.log(consts.N1 / eps) + 1.0)
                err = np.sqrt(np.mean((1.0 - h - eps * delta) ** 2)) / eps
            else:
                empirical = consts.C0 - res.psi_value
                theory = eps * (math.log(consts.N0 / eps) + 1.0)
                err = np.sqrt(np.mean((h - eps * delta) ** 2)) / eps
            rows.append(ScalingRow(
                float(eps), float(empirical), float(theory), float(empirical / theory),
                float(err), "+" if side > 0 else "-", float(beta), res.psi_value, res.converged,
                r.resolution, 2.0 * (res.beta_achieved - c_r) ** 2, res))
    return rows


def scaling_probe(r: ReferenceGraphon, regime: str, epsilons: Sequence[float],
                  opts: Optional[OptimizerOptions] = None, resolutions: Optional[Sequence[int]] = None,
                  warm: bool = False) -> ScalingReport:
    """Compare numerically optimal psi values with the asymptotic laws.

    center:    empirical psi(C_r +- eps)/eps^2 against K_r (both sides).
    right_end: C1 - psi(1 - eps) against eps [log(N1/eps) + 1].
    left_end:  C0 - psi(eps) against eps [log(N0/eps) + 1].

    ``extrapolated`` holds the ratio extrapolated to eps -> 0 per side.  With
    several ``resolutions`` (each dividing r's resolution) the reference is
    block-averaged to each, and a second-order extrapolation in 1/N of the
    finest pair is reported as well.
    """
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}; expected one of {REGIMES}")
    if regime == "center" and r.structure != "rank1":
        raise RegimeUnavailable("center", "requires a rank-1 reference graphon")
    epsilons = [float(e) for e in epsilons]
    if not epsilons or any(e <= 0 for e in epsilons):
        raise ValidationError("epsilons must be positive")
    opts = opts or OptimizerOptions()
    resolutions = list(resolutions) if resolutions else [r.resolution]
    rows = []
    for n in resolutions:
        rn = r if n == r.resolution else validate_reference(block_average(r.grid, n), r.eta)
        rows.extend(_probe_one(rn, regime, epsilons, opts, warm))
    report = ScalingReport(regime, rows)
    for side in sorted({row.side for row in rows}):
        for n in resolutions:
            sel = [row for row in rows if row.side == side and row.resolution == n]
            key = f"ratio_eps0{side}" if len(resolutions) == 1 else f"ratio_eps0{side}@N{n}"
            report.extrapolated[key] = richardson_zero([s.epsilon for s in sel],
                                                       [s.ratio for s in sel])
        if len(resolutions) > 1:
            n1, n2 = sorted(resolutions)[-2:]
            a = report.extrapolated[f"ratio_eps0{side}@N{n1}"]
            b = report.extrapolated[f"ratio_eps0{side}@N{n2}"]
            q = (n2 / n1) ** 2
            report.extrapolated[f"ratio_eps0{side}@Ninf"] = (q * b - a) / (q - 1.0)
    return report


class PenaltyComparison(NamedTuple):
    K_masked: float
    K_full: float
    cost_masked: Optional[float] = None
    cost_full: Optional[float] = None


def unbalanced_penalty_check(r: ReferenceGraphon, mask, eps: Optional[float] = None) -> PenaltyComparison:
    """Curvature constant of perturbations confined to ``mask`` versus the balanced one.

    Minimising int Delta^2 / (2 r (1 - r)) subject to int r Delta = C_r over
    Delta supported in the mask gives C_r^2 / (2 int_mask r^3 (1 - r)).  With
    ``eps`` the actual costs I_r(r + eps Delta)/eps^2 of both optimal fields are
    reported too.
    """
    if r.structure != "rank1":
        raise RegimeUnavailable("center", "requires a rank-1 reference graphon")
    v = r.grid.values
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != v.shape:
        raise ValidationError(f"mask shape {mask.shape} does not match resolution {v.shape}")
    if not mask.any():
        raise EmptyMask("mask selects no blocks")
    if np.any(mask != mask.T):
        raise ValidationError("mask must be symmetric")
    c_r = operator_norm(v).norm
    weight = v**3 * (1.0 - v)
    b_full = float(np.mean(weight))
    b_mask = float(np.sum(weight[mask])) / v.size
    k_full = c_r**2 / (2.0 * b_full)
    k_mask = c_r**2 / (2.0 * b_mask)
    if eps is None:
        return PenaltyComparison(k_mask, k_full)
    d_full = (c_r / b_full) * v**2 * (1.0 - v)
    d_mask = np.where(mask, (c_r / b_mask) * v**2 * (1.0 - v), 0.0)
    cost_full = rate_I(np.clip(v + eps * d_full, 0, 1), v) / eps**2
    cost_mask = rate_I(np.clip(v + eps * d_mask, 0, 1), v) / eps**2
    return PenaltyComparison(k_mask, k_full, cost_mask, cost_full)


def permutation_gram_gap(r: ReferenceGraphon, perm) -> float:
    """B_r D_r^pi - (B_r^pi)^2 for a block relabelling pi.

    B_r^pi = int r^pi r^2 (1 - r) and D_r^pi = int (r^pi)^2 r (1 - r).  The gap
    is nonnegative and vanishes at the identity, which is why the relabelled
    perturbations never beat the unrelabelled one.
    """
    v = r.grid.values
    perm = np.asarray(perm)
    vp = v[np.ix_(perm, perm)]
    w = v * (1.0 - v)
    b = float(np.mean(v**2 * w))
    b_pi = float(np.mean(vp * v * w))
    d_pi = float(np.mean(vp**2 * w))
    return b * d_pi - b_pi**2

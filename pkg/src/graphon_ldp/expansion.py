"""Operator norm from series expansions around rank-1 and finite-rank kernels.

Writing h = hbar + g, the norm mu = ||T_h|| solves

    mu = sum_n mu^(-n) F_n,    F_n = <nu, T_g^n nu>          (hbar = nu (x) nu)

and, for hbar = sum_k theta_k nu_k (x) nu_k with orthonormal nu_k,

    mu = lambda_max( sum_n mu^(-n) F_n ),  F_n[i, j] = sqrt(theta_i theta_j) <nu_i, T_g^n nu_j>.

Both are solved by a damped fixed-point iteration on the truncated series.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import GershgorinWarning, HypothesisViolated, NoConvergence, TailNotNegligible
from .spectral import as_matrix, inner, operator_norm, sandwich_series

MAX_AUTO_TERMS = 5000
TAIL_RATIO_LIMIT = 0.9


@dataclass(frozen=True)
class ExpansionConfig:
    """``truncation_order = 0`` picks the order from the tail bound (||g||_2/mu)^n."""

    truncation_order: int = 0
    fixed_point_tol: float = 1e-12
    max_sweeps: int = 10_000
    damping: float = 0.5
    gap_fraction: float = 0.25
    eps_guard: Optional[float] = None

    def __post_init__(self):
        if self.truncation_order < 0:
            raise ValueError("truncation_order must be >= 0 (0 = automatic)")
        if self.fixed_point_tol <= 0:
            raise ValueError("fixed_point_tol must be positive")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")


@dataclass
class ExpansionResult:
    mu: float
    n_terms: int
    sweeps: int
    residual: float
    tail_ratio: float
    diagnostics: dict = field(default_factory=dict)

    def __float__(self):
        return self.mu


def _auto_order(ratio: float, tol: float) -> int:
    if ratio == 0.0:
        return 1
    n = math.ceil(math.log(tol / 10.0) / math.log(ratio)) - 1
    return int(min(max(n, 1), MAX_AUTO_TERMS))


def _check_hypothesis(h: np.ndarray, g: np.ndarray, bound: Optional[float] = None):
    """Return (||T_h||, ||g||_2); raise unless ||T_g|| < min(bound, ||T_h||)."""
    mu_h = operator_norm(h).norm
    limit = mu_h if bound is None else min(bound, mu_h)
    g2 = float(np.sqrt(np.mean(g**2)))
    # ||T_g|| <= ||g||_2, so the power iteration is only needed when the cheap bound fails
    if g2 >= limit:
        norm_g = operator_norm(g).norm
        if norm_g >= limit:
            raise HypothesisViolated(
                f"||T_(h - hbar)|| = {norm_g:.6g} is not below {limit:.6g}"
            )
    return mu_h, g2


def _fixed_point(phi, mu0: float, cfg: ExpansionConfig):
    mu = mu0
    resid = math.inf
    for sweep in range(1, cfg.max_sweeps + 1):
        target = phi(mu)
        resid = abs(target - mu)
        if resid <= cfg.fixed_point_tol:
            return target, sweep, resid
        mu = (1.0 - cfg.damping) * mu + cfg.damping * target
    raise NoConvergence(cfg.max_sweeps, resid)


def rank1_norm_fixedpoint(h, hbar_nu, cfg: ExpansionConfig = ExpansionConfig()) -> ExpansionResult:
    """Solve the rank-1 expansion for ||T_h|| around hbar = hbar_nu (x) hbar_nu."""
    hv = as_matrix(h)
    nu = np.asarray(hbar_nu, dtype=float)
    g = hv - np.outer(nu, nu)
    mu_h, g2 = _check_hypothesis(hv, g)
    f0 = inner(nu, nu)
    ratio = g2 / min(f0, mu_h)
    if ratio >= TAIL_RATIO_LIMIT:
        raise TailNotNegligible(ratio)
    n_max = cfg.truncation_order or _auto_order(ratio, cfg.fixed_point_tol)
    coeffs = sandwich_series(nu, g, n_max)
    powers = np.arange(n_max + 1)

    def phi(mu):
        return float(np.sum(coeffs / mu**powers))

    mu, sweeps, resid = _fixed_point(phi, f0, cfg)
    return ExpansionResult(mu, n_max + 1, sweeps, resid, ratio)


def finiterank_norm_fixedpoint(h, thetas, nus, cfg: ExpansionConfig = ExpansionConfig()) -> ExpansionResult:
    """Solve the finite-rank expansion for ||T_h|| around hbar = sum theta_k nu_k (x) nu_k.

    ``nus`` has shape (k, N) and must be orthonormal in the discrete inner
    product.  The small-perturbation guard defaults to ``gap_fraction`` times
    theta_1 - theta_2.  A GershgorinWarning is issued when, at the solution,
    the Gershgorin disc of the leading row overlaps the others.
    """
    hv = as_matrix(h)
    thetas = np.asarray(thetas, dtype=float)
    nus = np.atleast_2d(np.asarray(nus, dtype=float))
    k, n = nus.shape
    if thetas.shape != (k,):
        raise ValueError("need one theta per basis vector")
    hbar = np.einsum("k,ki,kj->ij", thetas, nus, nus)
    g = hv - hbar
    if cfg.eps_guard is not None:
        guard = cfg.eps_guard
    elif k > 1:
        guard = cfg.gap_fraction * (thetas[0] - thetas[1])
    else:
        guard = None
    mu_h, g2 = _check_hypothesis(hv, g, guard)
    ratio = g2 / min(float(thetas[0]), mu_h)
    if ratio >= TAIL_RATIO_LIMIT:
        raise TailNotNegligible(ratio)
    n_max = cfg.truncation_order or _auto_order(ratio, cfg.fixed_point_tol)

    # coeffs[m, i, j] = <nu_i, T_g^m nu_j>
    coeffs = np.empty((n_max + 1, k, k))
    w = nus.T.copy()
    for m in range(n_max + 1):
        coeffs[m] = nus @ w / n
        w = g @ w / n
    scale = np.sqrt(np.outer(thetas, thetas))
    coeffs = 0.5 * (coeffs + coeffs.transpose(0, 2, 1)) * scale
    powers = np.arange(n_max + 1)

    def matrix(mu):
        return np.tensordot(1.0 / mu**powers, coeffs, axes=1)

    def phi(mu):
        return float(np.linalg.eigvalsh(matrix(mu))[-1])

    mu, sweeps, resid = _fixed_point(phi, float(thetas[0]), cfg)
    m = matrix(mu)
    radii = np.sum(np.abs(m), axis=1) - np.abs(np.diag(m))
    separated = k == 1 or m[0, 0] - radii[0] > np.max(np.diag(m)[1:] + radii[1:])
    diagnostics = {"eps_guard": None if guard is None else float(guard),
                   "gershgorin_separated": bool(separated)}
    if not separated:
        warnings.warn(
            "Gershgorin disc of the leading row overlaps the others; the largest "
            "eigenvalue of the finite-rank matrix may not be the operator norm",
            GershgorinWarning,
            stacklevel=2,
        )
    return ExpansionResult(mu, n_max + 1, sweeps, resid, ratio, diagnostics)

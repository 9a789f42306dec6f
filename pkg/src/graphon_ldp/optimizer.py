"""Numerical solution of psi_r(beta) = inf { I_r(h) : ||T_h|| = beta } on block graphons.

The equality constraint is replaced by the one-sided problem that is active:
||T_h|| >= beta above C_r and ||T_h|| <= beta below it (minimisers saturate the
constraint).  Entries are parameterised as h = sigmoid(z) over the upper
triangle and the constrained problem is solved by an augmented Lagrangian
method with L-BFGS-B inner solves.  The derivative of the norm is the
Hellmann-Feynman gradient u_i u_j / N^2 of the simple top eigenvalue.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
import scipy.optimize
from scipy.special import expit, log_expit

from .entropy import rate_I, reference_constants
from .errors import DegenerateEigenvalue, DomainError, NotConverged
from .graphon import GridGraphon, ReferenceGraphon, l2_distance
from .spectral import as_matrix, leading_eigenpair, operator_norm

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizerOptions:
    constraint_tol: float = 1e-7
    kkt_tol: float = 1e-7
    rho0: float = 10.0
    rho_growth: float = 5.0
    rho_max: float = 1e8
    max_outer: int = 60
    max_inner: int = 5000
    z_cap: float = 40.0
    multistart: bool = True
    random_starts: int = 0
    seed: int = 0
    min_gap: float = 1e-10


@dataclass
class OptimizationResult:
    h_beta: GridGraphon
    beta_target: float
    beta_achieved: float
    psi_value: float
    lagrange_multiplier: float
    iterations: int
    kkt_residual: float
    converged: bool
    side: str = "+"
    start: str = "reference"
    envelope_violation: float = 0.0
    endpoint: bool = False
    evaluations: int = 0


def _logit(p):
    p = np.asarray(p, dtype=float)
    return np.log(p) - np.log1p(-p)


class AugmentedLagrangian:
    """Augmented Lagrangian of the one-sided problem in logit coordinates.

    ``side = +1`` encodes ||T_h|| >= beta, ``side = -1`` encodes ||T_h|| <= beta;
    with c(h) = side * (beta - ||T_h||) <= 0 the merit function is

        I_r(h) + (rho/2) max(0, c + lam/rho)^2 - lam^2 / (2 rho),

    multiplied by N^2 so that per-entry gradients are O(1).
    """

    def __init__(self, r, beta: float, side: int, lam: float = 0.0, rho: float = 10.0,
                 min_gap: float = 1e-10):
        self.r = as_matrix(r)
        self.n = self.r.shape[0]
        self.beta = float(beta)
        self.side = 1 if side > 0 else -1
        self.lam = float(lam)
        self.rho = float(rho)
        self.min_gap = min_gap
        self.iu = np.triu_indices(self.n)
        self.weight = np.where(self.iu[0] == self.iu[1], 1.0, 2.0)
        ru = self.r[self.iu]
        self.log_r = np.log(ru)
        self.log_1mr = np.log1p(-ru)
        self.logit_r = self.log_r - self.log_1mr

    def unpack(self, z) -> np.ndarray:
        hm = np.empty((self.n, self.n))
        h = expit(z)
        hm[self.iu] = h
        hm.T[self.iu] = h
        return hm

    def pack(self, h) -> np.ndarray:
        return _logit(as_matrix(h)[self.iu])

    def entropy_terms(self, z):
        h, hc = expit(z), expit(-z)
        vals = h * (log_expit(z) - self.log_r) + hc * (log_expit(-z) - self.log_1mr)
        return vals, h * hc

    def constraint(self, mu: float) -> float:
        return self.side * (self.beta - mu)

    def value_and_grad(self, z):
        vals, dh = self.entropy_terms(z)
        mu, u, _ = leading_eigenpair(self.unpack(z), self.min_gap)
        c = self.constraint(mu)
        t = max(0.0, c + self.lam / self.rho)
        f = float(np.sum(self.weight * vals)) + self.n**2 * (
            0.5 * self.rho * t * t - self.lam**2 / (2.0 * self.rho))
        uu = u[self.iu[0]] * u[self.iu[1]]
        grad = self.weight * (z - self.logit_r - self.side * self.rho * t * uu) * dh
        return f, grad

    def value(self, z) -> float:
        return self.value_and_grad(z)[0]

    def kkt(self, z, lam: float, z_cap: float):
        """Projected stationarity of the Lagrangian (sum units) and the eigenpair."""
        mu, u, _ = leading_eigenpair(self.unpack(z), self.min_gap)
        _, dh = self.entropy_terms(z)
        uu = u[self.iu[0]] * u[self.iu[1]]
        g = (z - self.logit_r - self.side * lam * uu) * dh
        g = np.where((z >= z_cap) & (g < 0), 0.0, g)
        g = np.where((z <= -z_cap) & (g > 0), 0.0, g)
        return float(np.max(np.abs(g))), mu


def _solve_al(r, beta, side, z0, opts: OptimizerOptions, lam0: float = 0.0):
    al = AugmentedLagrangian(r, beta, side, lam=lam0, rho=opts.rho0, min_gap=opts.min_gap)
    bounds = [(-opts.z_cap, opts.z_cap)] * z0.size
    z = np.clip(z0, -opts.z_cap, opts.z_cap)
    prev = math.inf
    evals = 0
    kkt, mu, c = math.inf, math.nan, math.inf
    outer = 0
    for outer in range(1, opts.max_outer + 1):
        res = scipy.optimize.minimize(
            al.value_and_grad, z, jac=True, method="L-BFGS-B", bounds=bounds,
            options=dict(maxiter=opts.max_inner, maxfun=4 * opts.max_inner,
                         ftol=1e-16, gtol=1e-11, maxcor=20),
        )
        z = res.x
        evals += res.nfev
        mu = leading_eigenpair(al.unpack(z), opts.min_gap)[0]
        c = al.constraint(mu)
        al.lam = max(0.0, al.lam + al.rho * c)
        kkt, mu = al.kkt(z, al.lam, opts.z_cap)
        if abs(c) <= opts.constraint_tol and kkt <= opts.kkt_tol:
            break
        if abs(c) > 0.25 * prev:
            al.rho = min(al.rho * opts.rho_growth, opts.rho_max)
        prev = abs(c)
    converged = abs(c) <= opts.constraint_tol and kkt <= opts.kkt_tol
    return z, al, dict(mu=mu, c=c, kkt=kkt, lam=al.lam, outer=outer, evals=evals,
                       converged=converged)


def _nearest_regime(beta: float, c_r: float) -> str:
    d = {"center": abs(beta - c_r), "right_end": 1.0 - beta, "left_end": beta}
    return min(d, key=d.get)


def _start_points(r: ReferenceGraphon, beta: float, c_r: float, opts: OptimizerOptions):
    from .scaling import perturbation_shape

    v = r.grid.values
    lo, hi = 1e-12, 1.0 - 1e-12
    starts = [("reference", v)]
    if opts.multistart:
        regime = _nearest_regime(beta, c_r)
        delta = perturbation_shape(r, regime, c_r)
        if regime == "center":
            field_start = v + (beta - c_r) * delta
        elif regime == "right_end":
            field_start = 1.0 - (1.0 - beta) * delta
        else:
            field_start = beta * delta
        starts.append(("field", np.clip(field_start, lo, hi)))
        starts.append(("constant", np.full_like(v, min(max(beta, lo), hi))))
        rng = np.random.default_rng(opts.seed)
        for k in range(opts.random_starts):
            z = _logit(v) + rng.normal(scale=0.5, size=v.shape)
            starts.append((f"random{k}", expit(0.5 * (z + z.T))))
    return starts


def minimize_rate_at_norm(r: ReferenceGraphon, beta: float, opts: Optional[OptimizerOptions] = None,
                          start=None, lam0: float = 0.0, raise_on_failure: bool = True,
                          c_r: Optional[float] = None) -> OptimizationResult:
    """Minimise I_r(h) subject to ||T_h|| = beta.

    ``start`` (a graphon or matrix) is tried first when given.  Among all
    starts the converged result with the lowest psi (then lowest KKT residual)
    wins.  If no start converges, NotConverged carries the best iterate unless
    ``raise_on_failure`` is False.
    """
    opts = opts or OptimizerOptions()
    beta = float(beta)
    if not 0.0 <= beta <= 1.0:
        raise DomainError(f"beta = {beta!r} lies outside [0, 1]; psi is infinite there")
    v = r.grid.values
    n = r.resolution
    if c_r is None:
        c_r = operator_norm(v).norm
    if beta in (0.0, 1.0):
        consts = reference_constants(r)
        return OptimizationResult(
            GridGraphon.constant(beta, n), beta, beta, consts.C1 if beta else consts.C0,
            math.nan, 0, 0.0, True, side="+" if beta else "-", start="endpoint", endpoint=True)
    side = 1 if beta >= c_r else -1
    if abs(beta - c_r) <= opts.constraint_tol:
        return OptimizationResult(r.grid, beta, c_r, 0.0, 0.0, 0, 0.0, True,
                                  side="+" if side > 0 else "-")

    starts = _start_points(r, beta, c_r, opts)
    if start is not None:
        starts.insert(0, ("warm", np.clip(as_matrix(start), 1e-12, 1.0 - 1e-12)))
    candidates = []
    for label, h0 in starts:
        al0 = AugmentedLagrangian(v, beta, side)
        try:
            z, al, info = _solve_al(v, beta, side, al0.pack(h0), opts, lam0)
        except DegenerateEigenvalue as exc:
            log.warning("start %s hit a degenerate eigenvalue: %s", label, exc)
            if len(starts) == 1:
                raise
            continue
        h = GridGraphon(al.unpack(z))
        psi = rate_I(h, v)
        hv = h.values
        env = float(np.max(v - hv)) if side > 0 else float(np.max(hv - v))
        res = OptimizationResult(
            h, beta, info["mu"], psi, info["lam"], info["outer"], info["kkt"], info["converged"],
            side="+" if side > 0 else "-", start=label, envelope_violation=max(env, 0.0),
            evaluations=info["evals"])
        log.debug("beta=%.6g start=%s psi=%.12g kkt=%.2e c=%.2e conv=%s", beta, label, psi,
                  info["kkt"], info["c"], info["converged"])
        candidates.append(res)
    if not candidates:
        raise DegenerateEigenvalue(0.0)
    good = [c for c in candidates if c.converged]
    if good:
        return min(good, key=lambda c: (c.psi_value, c.kkt_residual))
    best = min(candidates, key=lambda c: (abs(c.beta_achieved - beta), c.psi_value))
    if raise_on_failure:
        raise NotConverged(best)
    return best


def feasible_witness(r: ReferenceGraphon, beta: float, c_r: Optional[float] = None):
    """Upper bound on psi_r(beta) from explicit graphons with norm exactly beta.

    Each family h(t) is entrywise monotone in t, so its norm is monotone and
    bisection on t hits beta.  Returns (I_r(h), h) for the cheapest family.
    """
    v = r.grid.values
    if c_r is None:
        c_r = operator_norm(v).norm
    shape = v**2 * (1.0 - v)
    shape = shape / shape.max()
    if beta >= c_r:
        families = [lambda t: np.clip(v + t * shape, 0.0, 1.0),
                    lambda t: v + t * (1.0 - v)]
        t_max = [1.0 / shape.min(), 1.0]
    else:
        families = [lambda t: np.clip(v - t * shape, 0.0, 1.0),
                    lambda t: (1.0 - t) * v]
        t_max = [1.0 / shape.min(), 1.0]
    best = None
    for fam, hi in zip(families, t_max):
        lo = 0.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            mu = operator_norm(fam(mid)).norm
            if (mu < beta) == (beta >= c_r):
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-15:
                break
        h = fam(0.5 * (lo + hi))
        val = rate_I(h, v)
        if best is None or val < best[0]:
            best = (val, GridGraphon(h))
    return best


@dataclass
class PsiRow:
    beta: float
    psi: float
    converged: bool
    kkt_residual: float
    warmstart: bool
    step_l2: float = math.nan
    result: Optional[OptimizationResult] = None


def psi_curve(r: ReferenceGraphon, betas: Sequence[float], opts: Optional[OptimizerOptions] = None,
              warm_start: bool = True, workers: int = 1) -> list:
    """psi_r on a grid of betas; rows carry convergence flags and never abort the sweep.

    With ``warm_start`` the rows run in order, each seeded with the previous
    minimiser.  Otherwise rows are independent and may run on ``workers``
    threads; results are always returned in input order.  ``step_l2`` is the
    l2 distance between consecutive minimisers, to surface jumps in the
    minimiser as beta varies.
    """
    opts = opts or OptimizerOptions()
    c_r = operator_norm(r.grid.values).norm

    def run(beta, start=None, lam0=0.0):
        try:
            return minimize_rate_at_norm(r, beta, opts, start=start, lam0=lam0,
                                         raise_on_failure=False, c_r=c_r)
        except (DegenerateEigenvalue, NotConverged) as exc:
            log.warning("beta=%g failed: %s", beta, exc)
            return None

    results, warmed = [], []
    if warm_start:
        prev = None
        for beta in betas:
            if prev is not None and not prev.endpoint:
                same_side = (prev.beta_achieved - c_r) * (beta - c_r) > 0
                lam0 = prev.lagrange_multiplier if same_side else 0.0
                results.append(run(beta, prev.h_beta.values, lam0))
                warmed.append(True)
            else:
                results.append(run(beta))
                warmed.append(False)
            prev = results[-1] if results[-1] is not None else prev
    else:
        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            results = list(pool.map(run, betas))
        warmed = [False] * len(results)

    rows = []
    prev_h = None
    for beta, res, warm in zip(betas, results, warmed):
        if res is None:
            rows.append(PsiRow(float(beta), math.nan, False, math.nan, warm))
            continue
        step = l2_distance(res.h_beta, prev_h) if prev_h is not None else math.nan
        rows.append(PsiRow(float(beta), res.psi_value, res.converged, res.kkt_residual,
                           warm, step, res))
        prev_h = res.h_beta
    return rows


def with_options(opts: Optional[OptimizerOptions], **changes) -> OptimizerOptions:
    return replace(opts or OptimizerOptions(), **changes)

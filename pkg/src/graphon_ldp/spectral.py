"""The graphon operator on block graphons, its norm and kernel products.

On an N-block graphon the operator (T_h u)(x) = int h(x, y) u(y) dy acts on
block-constant functions as the matrix (1/N) H, so the operator norm is the top
eigenvalue of that matrix.  Functions are N-vectors with the inner product
<u, v> = (1/N) sum_i u_i v_i.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DegenerateEigenvalue, DimensionMismatch, NoConvergence
from .graphon import GridGraphon, ReferenceGraphon

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 100_000
N_RESTARTS = 3


def as_matrix(h) -> np.ndarray:
    """Raw value matrix of a graphon, reference graphon or array."""
    if isinstance(h, ReferenceGraphon):
        return h.grid.values
    if isinstance(h, GridGraphon):
        return h.values
    a = np.asarray(h, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square kernel matrix, got shape {a.shape}")
    return a


def inner(u, v) -> float:
    """Discrete L2([0,1]) inner product."""
    u = np.asarray(u, dtype=float)
    return float(np.dot(u, v)) / u.shape[0]


def l2norm(u) -> float:
    return float(np.sqrt(inner(u, u)))


@dataclass(frozen=True)
class SpectralResult:
    norm: float
    eigenfunction: np.ndarray
    iterations: int
    residual: float


def apply_operator(h, u) -> np.ndarray:
    """(T_h u)_i = (1/N) sum_j h_ij u_j."""
    a = as_matrix(h)
    u = np.asarray(u, dtype=float)
    if u.shape != (a.shape[0],):
        raise DimensionMismatch(f"vector of length {u.shape} does not match N = {a.shape[0]}")
    return a @ u / a.shape[0]


def _power(op, u, tol, max_iter):
    u = u / l2norm(u)
    residual = np.inf
    for it in range(1, max_iter + 1):
        v = op(u)
        mu = inner(u, v)
        residual = l2norm(v - mu * u)
        if residual <= tol:
            return mu, u, it, residual
        nv = l2norm(v)
        if nv == 0.0:
            return 0.0, u, it, 0.0
        u = v / nv
    raise NoConvergence(max_iter, residual)


def operator_norm(h, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> SpectralResult:
    """Norm ||T_h|| and leading eigenfunction by power iteration.

    For nonnegative kernels the iteration runs on T_h itself from the constant
    function and returns the Perron eigenfunction.  Signed kernels (perturbations h - hbar) are handled
    by iterating T_h^2, whose top eigenvalue is ||T_h||^2 even when +mu and -mu
    are both eigenvalues; the reported residual is then that of T_h^2.

    If the start vector fails, three deterministic positive starts are tried
    before NoConvergence is raised; failure means the leading eigenvalue is
    (nearly) degenerate.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = as_matrix(h)
    n = a.shape[0]
    ones = np.ones(n)
    if not np.any(a):
        return SpectralResult(0.0, ones, 0, 0.0)
    signed = bool(np.any(a < 0))
    if signed:
        scale = np.max(np.abs(a))
        op = lambda u: a @ (a @ u) / (n * n * scale)  # noqa: E731
        step_tol = tol / scale
    else:
        op = lambda u: a @ u / n  # noqa: E731
        step_tol = tol
    starts = [np.random.default_rng(k).uniform(0.5, 1.5, n) for k in range(N_RESTARTS)]
    if signed:
        # a signed kernel may have the constant function as an eigenfunction of a
        # non-maximal eigenvalue; start from generic vectors instead
        starts = [np.random.default_rng(k).uniform(-1.0, 1.0, n) for k in range(N_RESTARTS + 1)]
    else:
        starts = [ones] + starts
    last = None
    for start in starts:
        try:
            mu, u, it, res = _power(op, start, step_tol, max_iter)
        except NoConvergence as exc:
            last = exc
            continue
        if signed:
            mu, res = float(np.sqrt(max(mu * scale, 0.0))), res * scale
        if u.sum() < 0:
            u = -u
        return SpectralResult(float(mu), u, it, float(res))
    raise NoConvergence(max_iter, last.last_residual,
                        f"power iteration failed from {len(starts)} starts "
                        f"(last residual {last.last_residual:.3e}); leading eigenvalue gap "
                        "is degenerate or too small")


def leading_eigenpair(h, min_gap: float = 1e-10):
    """Top eigenvalue, unit eigenfunction and spectral gap by a dense symmetric solve.

    Used inside the optimiser, where the Hellmann-Feynman gradient needs a
    simple top eigenvalue; raises DegenerateEigenvalue if the gap is below
    ``min_gap``.
    """
    a = as_matrix(h)
    n = a.shape[0]
    if n == 1:
        return float(a[0, 0]), np.ones(1), np.inf
    w, v = scipy.linalg.eigh(a / n, subset_by_index=[n - 2, n - 1])
    gap = float(w[1] - w[0])
    if gap < min_gap:
        raise DegenerateEigenvalue(gap)
    u = v[:, 1] * np.sqrt(n)
    if u.sum() < 0:
        u = -u
    return float(w[1]), u, gap


def kernel_power(g, n: int) -> np.ndarray:
    """n-th kernel power: g^1 = g, g^n = (1/N) g^(n-1) g."""
    if n < 1:
        raise ValueError("kernel power needs n >= 1")
    a = as_matrix(g)
    out = a.copy()
    for _ in range(n - 1):
        out = out @ a / a.shape[0]
    return out


def sandwich_series(nu_left, g, n_max: int, nu_right=None) -> np.ndarray:
    """[F_0, ..., F_{n_max}] with F_n = <nu_left, T_g^n nu_right>.

    F_0 = <nu_left, nu_right> (the identity operator), so that a rank-1 kernel
    nu (x) nu with no perturbation has norm F_0 = int nu^2.
    """
    a = as_matrix(g)
    nl = np.asarray(nu_left, dtype=float)
    nr = nl if nu_right is None else np.asarray(nu_right, dtype=float)
    if nl.shape != (a.shape[0],) or nr.shape != (a.shape[0],):
        raise DimensionMismatch("profile length does not match kernel resolution")
    out = np.empty(n_max + 1)
    w = nr.copy()
    for k in range(n_max + 1):
        out[k] = inner(nl, w)
        w = a @ w / a.shape[0]
    return out


def sandwich_form(nu_left, g, n: int, nu_right) -> float:
    """F_n = int int nu_left(x) g^n(x, y) nu_right(y) dx dy, with g^0 the identity."""
    if n < 0:
        raise ValueError("n must be >= 0")
    return float(sandwich_series(nu_left, g, n, nu_right)[n])

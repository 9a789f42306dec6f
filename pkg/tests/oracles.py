"""Independent reference computations used by the tests.

None of these call into the package's numerical routines; they are
brute-force or closed-form versions of the quantities under test.
"""

import itertools
import math

import numpy as np


def kl(a, b):
    """Bernoulli relative entropy written out with xlogy-style branches."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(a > 0, a * np.log(a / b), 0.0)
        t2 = np.where(a < 1, (1 - a) * np.log((1 - a) / (1 - b)), 0.0)
    return t1 + t2


def poly_moment(c0, c1, k):
    """int_0^1 (c0 + c1 x)^k dx from the antiderivative."""
    return ((c0 + c1) ** (k + 1) - c0 ** (k + 1)) / ((k + 1) * c1)


def dense_norm(h):
    """||T_h|| as the spectral radius of H/N from a full LAPACK eigensolve."""
    h = np.asarray(h, dtype=float)
    return float(np.max(np.abs(np.linalg.eigvalsh(h / h.shape[0]))))


def cut_norm_bruteforce(d):
    """max over all row sets S and column sets T of |sum_{S x T} d| / N^2."""
    d = np.asarray(d, dtype=float)
    n = d.shape[0]
    sets = np.array(list(itertools.product([0.0, 1.0], repeat=n)))
    sums = sets @ d @ sets.T
    return float(np.max(np.abs(sums))) / n**2


def norm_2x2(a, b, c):
    """Top eigenvalue of (1/2)[[a, b], [b, c]]."""
    return (a + c) / 4.0 + np.sqrt(((a - c) / 4.0) ** 2 + (b / 2.0) ** 2)


def _b_on_constraint(a, c, beta):
    """Off-diagonal value putting (a, b, c) on the surface ||T_h|| = beta, or nan."""
    s, d = (a + c) / 4.0, (a - c) / 4.0
    q = (beta - s) ** 2 - d**2
    ok = (beta >= s) & (q >= 0)
    b = np.where(ok, 2.0 * np.sqrt(np.where(ok, q, 0.0)), np.nan)
    return np.where((b >= 0) & (b <= 1), b, np.nan)


def psi_2x2_gridsearch(r, beta, coarse=401, keep=12, rounds=40):
    """min I_r(h) over 2x2 symmetric h in [0,1] with ||T_h|| = beta.

    The three free entries (a, b, c) are searched on a grid over (a, c) with b
    solved from the closed-form 2x2 eigenvalue, so every grid point lies
    exactly on the constraint surface.  The best coarse points are then
    refined by shrinking local grids.
    """
    r = np.asarray(r, dtype=float)

    def cost(a, c):
        b = _b_on_constraint(a, c, beta)
        val = (kl(a, r[0, 0]) + 2 * kl(np.nan_to_num(b), r[0, 1]) + kl(c, r[1, 1])) / 4.0
        return np.where(np.isnan(b), np.inf, val)

    g = np.linspace(0.0, 1.0, coarse)
    A, C = np.meshgrid(g, g, indexing="ij")
    F = cost(A, C)
    order = np.argsort(F, axis=None)[:keep]
    best = math.inf
    step = g[1] - g[0]
    for idx in order:
        i, j = np.unravel_index(idx, F.shape)
        x, y, w = g[i], g[j], 2 * step
        val = F[i, j]
        for _ in range(rounds):
            xs = np.clip(np.linspace(x - w, x + w, 21), 0, 1)
            ys = np.clip(np.linspace(y - w, y + w, 21), 0, 1)
            X, Y = np.meshgrid(xs, ys, indexing="ij")
            Fl = cost(X, Y)
            k = np.unravel_index(np.argmin(Fl), Fl.shape)
            if Fl[k] <= val:
                x, y, val = X[k], Y[k], Fl[k]
            w *= 0.6
        best = min(best, float(val))
    return best


def al_merit(r, beta, side, lam, rho, z):
    """Augmented Lagrangian merit written from scratch (dense eigensolve)."""
    n = r.shape[0]
    iu = np.triu_indices(n)
    h = np.empty((n, n))
    hv = 1.0 / (1.0 + np.exp(-z))
    h[iu] = hv
    h.T[iu] = hv
    mu = float(np.linalg.eigvalsh(h / n)[-1])
    c = side * (beta - mu)
    t = max(0.0, c + lam / rho)
    return float(np.sum(kl(h, r))) + n * n * (0.5 * rho * t * t - lam**2 / (2 * rho))


def central_difference(f, z, step=1e-6):
    g = np.empty_like(z)
    for k in range(z.size):
        e = np.zeros_like(z)
        e[k] = step
        g[k] = (f(z + e) - f(z - e)) / (2 * step)
    return g

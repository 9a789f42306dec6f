"""Block graphons: representation, reference kernels, averaging, distances and file IO.

A graphon is stored as the N x N matrix of its values on the blocks
B_i x B_j, where B_i = [(i-1)/N, i/N).  Every integral over [0,1]^2 is then
the block sum with weight 1/N^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import (
    AsymmetryError,
    EtaViolation,
    ParseError,
    RangeError,
    ResolutionMismatch,
    TooLargeForExact,
    ValidationError,
)

SYMMETRY_TOL = 1e-12
RANK1_TOL = 1e-12
MAX_EXACT_CUT_N = 22


def midpoints(n: int) -> np.ndarray:
    """Block midpoints (i - 1/2)/n, i = 1..n."""
    return (np.arange(n) + 0.5) / n


def _as_symmetric(values, tol: float = SYMMETRY_TOL) -> np.ndarray:
    a = np.array(values, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValidationError(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError("matrix contains non-finite entries")
    asym = float(np.max(np.abs(a - a.T)))
    if asym > tol:
        raise AsymmetryError(asym)
    if asym > 0.0:
        a = 0.5 * (a + a.T)
    return a


@dataclass(frozen=True, eq=False)
class GridGraphon:
    """Symmetric block graphon with values in [0, 1].

    ``values`` is stored read-only; construct a new instance to change it.
    """

    values: np.ndarray

    def __post_init__(self):
        a = _as_symmetric(self.values)
        bad = np.argwhere((a < 0.0) | (a > 1.0))
        if bad.size:
            i, j = map(int, bad[0])
            raise RangeError(i, j, float(a[i, j]))
        a.setflags(write=False)
        object.__setattr__(self, "values", a)

    @property
    def resolution(self) -> int:
        return self.values.shape[0]

    @classmethod
    def constant(cls, p: float, n: int = 1) -> "GridGraphon":
        return cls(np.full((n, n), float(p)))

    @classmethod
    def from_function(cls, f: Callable, n: int) -> "GridGraphon":
        """Evaluate a vectorised kernel ``f(x, y)`` at block midpoints."""
        x = midpoints(n)
        return cls(np.broadcast_to(f(x[:, None], x[None, :]), (n, n)))

    @classmethod
    def rank1(cls, nu) -> "GridGraphon":
        nu = np.asarray(nu, dtype=float)
        return cls(np.outer(nu, nu))

    def __repr__(self):
        return f"GridGraphon(N={self.resolution})"


@dataclass(frozen=True, eq=False)
class ReferenceGraphon:
    """A block graphon certified to satisfy eta <= r <= 1 - eta.

    Exactly one of the optional structures may be present: ``nu`` for a rank-1
    kernel r = nu (x) nu, or ``thetas``/``nus`` for r = sum_k theta_k nu_k (x) nu_k
    with nu_k orthonormal under <u, v> = (1/N) sum u_i v_i.
    """

    grid: GridGraphon
    eta: float
    nu: Optional[np.ndarray] = None
    thetas: Optional[np.ndarray] = None
    nus: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def structure(self) -> str:
        if self.nu is not None:
            return "rank1"
        if self.thetas is not None:
            return "finite_rank"
        return "general"

    @property
    def values(self) -> np.ndarray:
        return self.grid.values

    @property
    def resolution(self) -> int:
        return self.grid.resolution

    @classmethod
    def from_nu(cls, nu, eta: Optional[float] = None) -> "ReferenceGraphon":
        """Rank-1 reference r(x, y) = nu(x) nu(y) from block values of nu."""
        nu = np.array(nu, dtype=float)
        if np.any(nu <= 0.0) or np.any(nu >= 1.0):
            raise ValidationError("rank-1 profile nu must take values in (0, 1)")
        grid = GridGraphon.rank1(nu)
        eta = _default_eta(grid) if eta is None else float(eta)
        _check_eta(grid, eta)
        nu.setflags(write=False)
        return cls(grid, eta, nu=nu)

    @classmethod
    def from_finite_rank(cls, thetas, nus, eta: Optional[float] = None) -> "ReferenceGraphon":
        """Finite-rank reference sum_k theta_k nu_k (x) nu_k; ``nus`` has shape (k, N)."""
        thetas = np.array(thetas, dtype=float)
        nus = np.atleast_2d(np.array(nus, dtype=float))
        k, n = nus.shape
        if thetas.shape != (k,):
            raise ValidationError("need one theta per basis vector")
        if np.any(thetas < 0) or np.any(np.diff(thetas) > 0) or (k > 1 and thetas[0] <= thetas[1]):
            raise ValidationError("thetas must satisfy theta_1 > theta_2 >= ... >= theta_k >= 0")
        gram = nus @ nus.T / n
        if np.max(np.abs(gram - np.eye(k))) > 1e-10:
            raise ValidationError("nus are not orthonormal under the discrete inner product")
        grid = GridGraphon(np.einsum("k,ki,kj->ij", thetas, nus, nus))
        eta = _default_eta(grid) if eta is None else float(eta)
        _check_eta(grid, eta)
        thetas.setflags(write=False)
        nus.setflags(write=False)
        if k == 1:
            nu = np.sqrt(thetas[0]) * nus[0]
            if np.all(nu > 0):
                nu.setflags(write=False)
                return cls(grid, eta, nu=nu)
        return cls(grid, eta, thetas=thetas, nus=nus)


def _default_eta(grid: GridGraphon) -> float:
    v = grid.values
    return float(min(v.min(), 1.0 - v.max(), 0.5))


def _check_eta(grid: GridGraphon, eta: float) -> None:
    if not (0.0 < eta <= 0.5):
        raise ValidationError(f"eta must lie in (0, 1/2], got {eta!r}")
    v = grid.values
    bad = np.argwhere((v < eta) | (v > 1.0 - eta))
    if bad.size:
        i, j = map(int, bad[0])
        raise EtaViolation(i, j, float(v[i, j]), eta)


def detect_rank1(values: np.ndarray, tol: float = RANK1_TOL) -> Optional[np.ndarray]:
    """Return nu with values = nu nu^T (relative tolerance ``tol``), else None."""
    d = np.diag(values)
    if np.any(d <= 0):
        return None
    nu = np.sqrt(d)
    prod = np.outer(nu, nu)
    if np.max(np.abs(values - prod) / prod) <= tol:
        return nu
    return None


def validate_reference(grid: GridGraphon, eta: Optional[float] = None) -> ReferenceGraphon:
    """Certify ``grid`` as a reference graphon and detect rank-1 structure.

    Raises EtaViolation when an entry leaves [eta, 1 - eta]; without ``eta``
    the tightest bound min(min r, 1 - max r, 1/2) is used.  If the grid is
    rank-1 within RANK1_TOL the returned reference carries nu = sqrt(diag);
    otherwise the structure is ``general``.
    """
    if not isinstance(grid, GridGraphon):
        grid = GridGraphon(grid)
    eta = _default_eta(grid) if eta is None else float(eta)
    _check_eta(grid, eta)
    nu = detect_rank1(grid.values)
    if nu is not None:
        nu.setflags(write=False)
        return ReferenceGraphon(grid, eta, nu=nu)
    return ReferenceGraphon(grid, eta)


def _values(h) -> np.ndarray:
    if isinstance(h, ReferenceGraphon):
        return h.grid.values
    if isinstance(h, GridGraphon):
        return h.values
    return np.asarray(h, dtype=float)


def _same_resolution(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ResolutionMismatch(f"resolutions differ: {a.shape[0]} vs {b.shape[0]}")


def block_average(h: GridGraphon, m: int) -> GridGraphon:
    """Average ``h`` down to ``m`` blocks per axis; ``m`` must divide the resolution."""
    n = h.resolution
    if m < 1 or n % m:
        raise ResolutionMismatch(f"{m} does not divide resolution {n}")
    k = n // m
    return GridGraphon(h.values.reshape(m, k, m, k).mean(axis=(1, 3)))


def refine(h: GridGraphon, factor: int) -> GridGraphon:
    """The same block graphon written on a grid ``factor`` times finer."""
    return GridGraphon(np.kron(h.values, np.ones((factor, factor))))


def l2_distance(h1, h2) -> float:
    a, b = _values(h1), _values(h2)
    _same_resolution(a, b)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def l1_distance(h1, h2) -> float:
    a, b = _values(h1), _values(h2)
    _same_resolution(a, b)
    return float(np.mean(np.abs(a - b)))


def cut_norm_distance(h1, h2, chunk: int = 1 << 15) -> float:
    """Cut distance sup_{S,T} |(1/N^2) sum_{S x T} (h1 - h2)| over block subsets.

    All 2^N row sets S are enumerated; for each S the optimal column set is the
    set of columns whose restricted sum has the sign being maximised.
    """
    a, b = _values(h1), _values(h2)
    _same_resolution(a, b)
    n = a.shape[0]
    if n > MAX_EXACT_CUT_N:
        raise TooLargeForExact(f"exhaustive cut norm limited to N <= {MAX_EXACT_CUT_N}, got {n}")
    d = a - b
    bits = np.arange(n)
    best = 0.0
    for start in range(0, 1 << n, chunk):
        s = np.arange(start, min(start + chunk, 1 << n))
        rows = ((s[:, None] >> bits) & 1).astype(float)
        cols = rows @ d
        pos = np.where(cols > 0, cols, 0.0).sum(axis=1)
        neg = np.where(cols < 0, cols, 0.0).sum(axis=1)
        best = max(best, float(pos.max()), float(-neg.min()))
    return best / n**2


def save_grid(h: GridGraphon, path) -> None:
    n = h.resolution
    lines = [str(n)]
    for row in h.values:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_grid(path) -> GridGraphon:
    """Read the text grid format: N on the first line, then N rows of N values."""
    text = Path(path).read_text().splitlines()
    rows = [(k + 1, line) for k, line in enumerate(text) if line.strip()]
    if not rows:
        raise ParseError("empty grid file", line=1)
    lineno, first = rows[0]
    try:
        n = int(first.strip())
    except ValueError:
        raise ParseError(f"expected integer resolution, got {first.strip()!r}", line=lineno) from None
    if n < 1:
        raise ParseError(f"resolution must be positive, got {n}", line=lineno)
    body = rows[1:]
    if len(body) != n:
        where = body[n][0] if len(body) > n else (body[-1][0] if body else lineno) + 1
        raise ParseError(f"expected {n} rows, found {len(body)}", line=where)
    values = np.empty((n, n))
    for i, (lineno, line) in enumerate(body):
        parts = line.split()
        if len(parts) != n:
            raise ParseError(f"expected {n} values, found {len(parts)}", line=lineno)
        try:
            values[i] = [float(p) for p in parts]
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
    if not np.all(np.isfinite(values)):
        raise ParseError("non-finite value in grid")
    return GridGraphon(values)

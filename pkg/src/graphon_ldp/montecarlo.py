"""Inhomogeneous Erdos-Renyi sampling and the top adjacency eigenvalue.

Only typical behaviour is checked here: lambda_N / N concentrates at C_r.
Replicate seeds are derived from the master seed as

    seed_i = master XOR (0x9E3779B97F4A7C15 * i mod 2^64),

so replicate 0 uses the master seed itself.  Each replicate draws one uniform
per vertex pair from numpy's PCG64, and an edge is present iff the uniform is
below r; graphs sampled from ordered references with the same seed are
therefore nested.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import NoConvergence, ValidationError
from .graphon import ReferenceGraphon
from .spectral import as_matrix

GOLDEN = 0x9E3779B97F4A7C15
MASK64 = (1 << 64) - 1
GENERATOR = "numpy.random.PCG64"


def derive_seed(master: int, index: int) -> int:
    return (int(master) & MASK64) ^ ((GOLDEN * int(index)) & MASK64)


def rng_identity() -> dict:
    return {"generator": GENERATOR, "numpy": np.__version__,
            "seed_rule": "seed_i = master ^ (0x9E3779B97F4A7C15 * i mod 2**64)"}


def vertex_blocks(n: int, resolution: int) -> np.ndarray:
    """Block index of vertex i (1-based) at coordinate i/n: ceil(i R / n) - 1, clamped."""
    i = np.arange(1, n + 1)
    idx = (i * resolution + n - 1) // n - 1
    return np.clip(idx, 0, resolution - 1)


def edge_probabilities(r, n: int) -> np.ndarray:
    v = as_matrix(r)
    b = vertex_blocks(n, v.shape[0])
    return v[np.ix_(b, b)]


def sample_graph(r, n: int, seed: int) -> np.ndarray:
    """Symmetric 0/1 adjacency matrix (uint8, zero diagonal) with P(i~j) = r(i/n, j/n)."""
    if n < 2:
        raise ValidationError("need at least two vertices")
    p = edge_probabilities(r, n)
    rng = np.random.Generator(np.random.PCG64(int(seed) & MASK64))
    u = rng.random((n, n))
    a = np.triu(u < p, k=1)
    return (a | a.T).astype(np.uint8)


def _power(a, u, tol, max_iter):
    u = u / np.linalg.norm(u)
    res = np.inf
    for _ in range(max_iter):
        v = a @ u
        lam = float(u @ v)
        res = float(np.linalg.norm(v - lam * u))
        if res <= tol * max(1.0, abs(lam)):
            return lam
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return 0.0
        u = v / nv
    raise NoConvergence(max_iter, res)


def max_eigenvalue(adjacency, tol: float = 1e-9, max_iter: int = 20_000) -> float:
    """Largest adjacency eigenvalue by power iteration on the raw matrix.

    Bipartite components give eigenvalues +-lambda and stall the plain
    iteration; it is then rerun on A + cI with c the maximal degree.
    """
    a = np.asarray(adjacency, dtype=float)
    n = a.shape[0]
    if not np.any(a):
        return 0.0
    start = np.ones(n)
    try:
        return _power(a, start, tol, max_iter)
    except NoConvergence:
        c = float(a.sum(axis=1).max())
        return _power(a + c * np.eye(n), start, tol, max_iter) - c


@dataclass
class SampleStats:
    n_vertices: int
    replicates: int
    values: list
    seeds: list
    seed: int
    mean: float = 0.0
    stddev: float = 0.0
    quantiles: dict = field(default_factory=dict)
    rng: dict = field(default_factory=rng_identity)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        self.mean = float(vals.mean())
        self.stddev = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        q = np.quantile(vals, [0.05, 0.5, 0.95])
        self.quantiles = {"q05": float(q[0]), "q50": float(q[1]), "q95": float(q[2])}

    def to_dict(self) -> dict:
        return asdict(self)


def spectral_sample_stats(r: ReferenceGraphon, n: int, replicates: int, seed: int,
                          workers: int = 1) -> SampleStats:
    """lambda_N / n over independent replicates with derived seeds, ordered by replicate."""
    if replicates < 1:
        raise ValidationError("need at least one replicate")
    seeds = [derive_seed(seed, i) for i in range(replicates)]

    def one(i):
        try:
            return max_eigenvalue(sample_graph(r, n, seeds[i])) / n
        except NoConvergence as exc:
            raise NoConvergence(exc.max_iter, exc.last_residual,
                                f"replicate {i} (seed {seeds[i]}): {exc}") from exc

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(one, range(replicates)))
    else:
        values = [one(i) for i in range(replicates)]
    return SampleStats(n, replicates, values, seeds, int(seed))

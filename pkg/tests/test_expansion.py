import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graphon_ldp import (ExpansionConfig, finiterank_norm_fixedpoint, operator_norm,
                         rank1_norm_fixedpoint)
from graphon_ldp.errors import GershgorinWarning, HypothesisViolated, TailNotNegligible
from graphon_ldp.graphon import midpoints

N = 32
NU = 0.3 + 0.4 * midpoints(N)


def perturbation(seed, size):
    rng = np.random.default_rng(seed)
    d = rng.uniform(-1, 1, (N, N))
    d = (d + d.T) / 2
    return d * size / np.sqrt(np.mean(d**2))


def test_unperturbed_rank1_returns_second_moment():
    res = rank1_norm_fixedpoint(np.outer(NU, NU), NU)
    assert res.mu == pytest.approx(np.mean(NU**2), abs=1e-15)
    assert float(res) == res.mu


def test_constant_shift_closed_form():
    # h = nu nu + c: the series sums exactly to the 2x2 reduced eigenproblem
    h = np.outer(NU, NU) + 0.01
    assert rank1_norm_fixedpoint(h, NU).mu == pytest.approx(operator_norm(h).norm, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.001, 0.05))
def test_rank1_matches_power_iteration(seed, size):
    h = np.outer(NU, NU) + perturbation(seed, size)
    assert rank1_norm_fixedpoint(h, NU).mu == pytest.approx(operator_norm(h).norm, abs=1e-10)


def test_truncation_error_decays():
    h = np.outer(NU, NU) + perturbation(1, 0.04)
    exact = operator_norm(h).norm
    errs = [abs(rank1_norm_fixedpoint(h, NU, ExpansionConfig(truncation_order=k)).mu - exact)
            for k in (1, 2, 4, 8)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-10


def test_hypothesis_and_tail_guards():
    with pytest.raises(HypothesisViolated):
        # ||T_g|| = 0.9 m2 exceeds ||T_h|| = 0.1 m2
        rank1_norm_fixedpoint(0.1 * np.outer(NU, NU), NU)
    with pytest.raises(TailNotNegligible):
        rank1_norm_fixedpoint(np.outer(NU, NU) + perturbation(2, 0.3), NU)


def test_config_validation():
    for bad in (dict(truncation_order=-1), dict(fixed_point_tol=0), dict(damping=0)):
        with pytest.raises(ValueError):
            ExpansionConfig(**bad)


def basis(k):
    x = midpoints(N)
    q, _ = np.linalg.qr(np.array([np.ones(N)] + [np.cos(np.pi * m * x) for m in range(1, k)]).T)
    q *= np.sqrt(N) * np.where(q.sum(axis=0) < 0, -1, 1)
    return q.T


@pytest.mark.parametrize("k", [1, 2, 3])
def test_finite_rank_matches_power_iteration(k):
    thetas = np.array([0.45, 0.08, 0.03][:k])
    nus = basis(k)
    h = np.einsum("k,ki,kj->ij", thetas, nus, nus) + perturbation(k, 0.02)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GershgorinWarning)
        res = finiterank_norm_fixedpoint(h, thetas, nus)
    assert res.mu == pytest.approx(operator_norm(h).norm, abs=1e-10)
    if k > 1:
        assert res.diagnostics["eps_guard"] == pytest.approx(0.25 * (thetas[0] - thetas[1]))


def test_finite_rank_one_agrees_with_rank1():
    h = np.outer(NU, NU) + perturbation(5, 0.02)
    theta = np.mean(NU**2)
    a = finiterank_norm_fixedpoint(h, [theta], NU[None, :] / np.sqrt(theta)).mu
    assert a == pytest.approx(rank1_norm_fixedpoint(h, NU).mu, abs=1e-12)


def test_finite_rank_guard_and_gershgorin():
    thetas = np.array([0.3, 0.28])
    nus = basis(2)
    base = np.einsum("k,ki,kj->ij", thetas, nus, nus)
    with pytest.raises(HypothesisViolated):
        finiterank_norm_fixedpoint(base + perturbation(3, 0.05), thetas, nus)
    # nearly equal thetas with a coupling perturbation: discs overlap
    d = 0.015 * (np.outer(nus[0], nus[1]) + np.outer(nus[1], nus[0]))
    with pytest.warns(GershgorinWarning):
        res = finiterank_norm_fixedpoint(base + d, thetas, nus, ExpansionConfig(eps_guard=0.05))
    assert res.diagnostics["gershgorin_separated"] is False
    assert res.mu == pytest.approx(operator_norm(base + d).norm, abs=1e-10)

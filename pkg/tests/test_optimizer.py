import math

import numpy as np
import pytest

from oracles import kl, psi_2x2_gridsearch
from graphon_ldp import (AugmentedLagrangian, GridGraphon, OptimizerOptions, ReferenceGraphon,
                         feasible_witness, minimize_rate_at_norm, operator_norm, psi_curve,
                         reference_constants, validate_reference)
from graphon_ldp.errors import DomainError
from graphon_ldp.graphon import midpoints

HALF = validate_reference(GridGraphon.constant(0.5, 8))
RANK1 = ReferenceGraphon.from_nu(0.3 + 0.4 * midpoints(8))


def test_endpoints_are_closed_form():
    c = reference_constants(RANK1)
    assert minimize_rate_at_norm(RANK1, 1.0).psi_value == c.C1
    zero = minimize_rate_at_norm(RANK1, 0.0)
    assert zero.psi_value == c.C0 and zero.endpoint
    assert np.all(zero.h_beta.values == 0)


def test_typical_value_costs_nothing():
    c_r = operator_norm(RANK1.grid).norm
    res = minimize_rate_at_norm(RANK1, c_r)
    assert res.psi_value == 0.0 and res.h_beta.values is RANK1.grid.values


def test_outside_unit_interval():
    for beta in (-0.1, 1.2):
        with pytest.raises(DomainError):
            minimize_rate_at_norm(RANK1, beta)


@pytest.mark.parametrize("beta", [0.3, 0.7])
def test_constant_reference_has_constant_minimizer(beta):
    res = minimize_rate_at_norm(HALF, beta)
    assert res.converged
    assert res.psi_value == pytest.approx(float(kl(beta, 0.5)), abs=1e-7)
    np.testing.assert_allclose(res.h_beta.values, beta, atol=1e-4)


@pytest.mark.parametrize("beta", [0.15, 0.22, 0.4, 0.65])
def test_result_contract(beta):
    res = minimize_rate_at_norm(RANK1, beta)
    c_r = operator_norm(RANK1.grid).norm
    assert res.converged and res.kkt_residual <= 1e-7
    assert abs(res.beta_achieved - beta) <= 1e-7
    assert res.beta_achieved == pytest.approx(operator_norm(res.h_beta).norm, abs=1e-12)
    assert res.psi_value >= 2 * (res.beta_achieved - c_r) ** 2
    # above C_r the minimiser dominates r, below it is dominated
    assert res.envelope_violation <= 1e-6
    assert res.side == ("+" if beta > c_r else "-")
    witness, h = feasible_witness(RANK1, beta)
    assert operator_norm(h).norm == pytest.approx(beta, abs=1e-12)
    assert res.psi_value <= witness + 1e-12


def test_two_block_oracle():
    r = validate_reference(GridGraphon(np.array([[0.7, 0.25], [0.25, 0.4]])))
    for beta in (0.2, 0.45, 0.8):
        res = minimize_rate_at_norm(r, beta)
        assert res.psi_value == pytest.approx(psi_2x2_gridsearch(r.values, beta), abs=1e-5)


def test_al_value_matches_definition():
    rng = np.random.default_rng(0)
    r = RANK1.values
    z = rng.normal(size=36)
    al = AugmentedLagrangian(r, 0.4, +1, lam=0.3, rho=7.0)
    h = al.unpack(z)
    assert np.allclose(al.pack(h), z)
    mu = np.linalg.eigvalsh(h / 8)[-1]
    t = max(0.0, 0.4 - mu + 0.3 / 7.0)
    expected = np.sum(kl(h, r)) + 64 * (3.5 * t * t - 0.09 / 14.0)
    assert al.value(z) == pytest.approx(expected, rel=1e-12)


def test_psi_curve_is_unimodal_and_warm():
    betas = np.linspace(0.1, 0.9, 17)
    rows = psi_curve(HALF, betas)
    assert all(r.converged for r in rows)
    psi = np.array([r.psi for r in rows])
    k = int(np.argmin(psi))
    assert betas[k] == pytest.approx(0.5)
    assert np.all(np.diff(psi[: k + 1]) < 0) and np.all(np.diff(psi[k:]) > 0)
    assert [r.warmstart for r in rows] == [False] + [True] * 16
    assert math.isnan(rows[0].step_l2) and rows[1].step_l2 == pytest.approx(0.05, abs=1e-4)


def test_psi_curve_cold_parallel_keeps_order():
    betas = [0.6, 0.15, 0.35]
    rows = psi_curve(RANK1, betas, warm_start=False, workers=3)
    assert [r.beta for r in rows] == betas
    serial = psi_curve(RANK1, betas, warm_start=False, workers=1)
    assert [r.psi for r in rows] == [r.psi for r in serial]
    assert not any(r.warmstart for r in rows)


def test_tighter_constraint_tolerance():
    res = minimize_rate_at_norm(RANK1, 0.5, OptimizerOptions(constraint_tol=1e-11))
    assert res.converged and abs(res.beta_achieved - 0.5) <= 1e-11

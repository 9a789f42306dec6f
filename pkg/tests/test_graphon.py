import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from oracles import cut_norm_bruteforce
from graphon_ldp import (GridGraphon, ReferenceGraphon, block_average, cut_norm_distance,
                         l1_distance, l2_distance, load_grid, refine, save_grid,
                         validate_reference)
from graphon_ldp.errors import (AsymmetryError, EtaViolation, ParseError, RangeError,
                                ResolutionMismatch, TooLargeForExact, ValidationError)
from graphon_ldp.graphon import detect_rank1, midpoints


def sym(n, elements=st.floats(0, 1)):
    return arrays(float, (n, n), elements=elements).map(lambda a: np.triu(a) + np.triu(a, 1).T)


def test_grid_is_read_only_and_symmetrised():
    a = np.array([[0.2, 0.3], [0.3 + 1e-14, 0.4]])
    g = GridGraphon(a)
    assert np.array_equal(g.values, g.values.T)
    with pytest.raises(ValueError):
        g.values[0, 0] = 0.5
    a[0, 0] = 0.9
    assert g.values[0, 0] == 0.2


def test_grid_rejects_bad_input():
    with pytest.raises(AsymmetryError):
        GridGraphon([[0.2, 0.3], [0.4, 0.5]])
    with pytest.raises(RangeError) as exc:
        GridGraphon([[0.2, 1.5], [1.5, 0.5]])
    assert (exc.value.i, exc.value.j) == (0, 1)
    with pytest.raises(ValidationError):
        GridGraphon(np.ones((2, 3)) * 0.5)


def test_constructors():
    assert GridGraphon.constant(0.3, 4).values.tolist() == [[0.3] * 4] * 4
    np.testing.assert_allclose(midpoints(4), [0.125, 0.375, 0.625, 0.875])
    g = GridGraphon.from_function(lambda x, y: x * y, 4)
    np.testing.assert_allclose(g.values, np.outer(midpoints(4), midpoints(4)))


def test_reference_eta_and_structure():
    r = validate_reference(GridGraphon.constant(0.5, 8), 0.1)
    assert r.structure == "rank1"
    np.testing.assert_allclose(r.nu, np.sqrt(0.5))
    with pytest.raises(EtaViolation) as exc:
        validate_reference(GridGraphon([[0.5, 0.02], [0.02, 0.5]]), 0.05)
    assert exc.value.value == 0.02
    with pytest.raises(ValidationError):
        validate_reference(GridGraphon.constant(0.5, 2), 0.7)
    two = validate_reference(GridGraphon([[0.6, 0.2], [0.2, 0.4]]))
    assert two.structure == "general" and two.eta == pytest.approx(0.2)


def test_default_eta_is_tightest():
    r = ReferenceGraphon.from_nu([0.3, 0.9])
    assert r.eta == pytest.approx(min(0.09, 1 - 0.81))


def test_from_finite_rank():
    n = 8
    nus = np.array([np.ones(n), np.sqrt(2) * np.cos(np.pi * midpoints(n))])
    nus[1] -= nus[1].mean()
    nus[1] *= np.sqrt(n) / np.linalg.norm(nus[1])
    r = ReferenceGraphon.from_finite_rank([0.5, 0.1], nus)
    assert r.structure == "finite_rank"
    with pytest.raises(ValidationError):
        ReferenceGraphon.from_finite_rank([0.1, 0.5], nus)
    with pytest.raises(ValidationError):
        ReferenceGraphon.from_finite_rank([0.5, 0.1], nus * 1.1)
    one = ReferenceGraphon.from_finite_rank([0.5], nus[:1])
    assert one.structure == "rank1"


@given(arrays(float, 6, elements=st.floats(0.05, 1.0)))
def test_detect_rank1_recovers_profile(nu):
    np.testing.assert_allclose(detect_rank1(np.outer(nu, nu)), nu, rtol=1e-12)


def test_detect_rank1_rejects_rank2():
    assert detect_rank1(np.array([[0.6, 0.2], [0.2, 0.4]])) is None


@settings(max_examples=50, deadline=None)
@given(sym(8))
def test_block_average_idempotent_and_contracts(a):
    g = GridGraphon(a)
    b = block_average(g, 4)
    assert np.array_equal(block_average(b, 4).values, b.values)
    assert b.values.mean() == pytest.approx(a.mean(), abs=1e-14)
    other = GridGraphon.constant(0.5, 8)
    assert l2_distance(b, block_average(other, 4)) <= l2_distance(g, other) + 1e-14


def test_block_average_and_refine_roundtrip():
    g = GridGraphon.from_function(lambda x, y: (x + y) / 2, 4)
    assert np.allclose(block_average(refine(g, 3), 4).values, g.values)
    with pytest.raises(ResolutionMismatch):
        block_average(g, 3)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 7).flatmap(lambda n: st.tuples(sym(n), sym(n))))
def test_distance_ordering_and_cut_oracle(pair):
    a, b = pair
    cut, l1, l2 = cut_norm_distance(a, b), l1_distance(a, b), l2_distance(a, b)
    assert cut <= l1 + 1e-15 and l1 <= l2 + 1e-15
    assert cut == pytest.approx(cut_norm_bruteforce(a - b), abs=1e-14)


def test_cut_norm_examples():
    assert cut_norm_distance(GridGraphon.constant(0.5, 4), GridGraphon.constant(0.25, 4)) == 0.25
    checker = np.indices((4, 4)).sum(axis=0) % 2 * 1.0
    # rows and columns of matching parity give the largest block of one sign
    assert cut_norm_distance(checker, np.full((4, 4), 0.5)) == 0.125
    with pytest.raises(ResolutionMismatch):
        cut_norm_distance(np.zeros((2, 2)), np.zeros((4, 4)))
    with pytest.raises(TooLargeForExact):
        cut_norm_distance(np.zeros((30, 30)), np.zeros((30, 30)))


def test_cut_norm_chunking_is_invisible():
    rng = np.random.default_rng(0)
    a = rng.random((9, 9))
    a = (a + a.T) / 2
    assert cut_norm_distance(a, 0 * a, chunk=7) == cut_norm_distance(a, 0 * a)


def test_save_load_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    a = rng.random((5, 5))
    g = GridGraphon((a + a.T) / 2)
    save_grid(g, tmp_path / "g.txt")
    assert np.array_equal(load_grid(tmp_path / "g.txt").values, g.values)


@pytest.mark.parametrize("text,line", [
    ("", 1),
    ("x\n", 1),
    ("2\n0.1 0.2\n", 3),
    ("2\n0.1 0.2\n0.2\n", 3),
    ("2\n0.1 0.2\n0.2 abc\n", 3),
])
def test_load_grid_reports_line(tmp_path, text, line):
    p = tmp_path / "bad.txt"
    p.write_text(text)
    with pytest.raises(ParseError) as exc:
        load_grid(p)
    assert exc.value.line == line

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dilationlab.reps import Tail, TailSpace
from dilationlab.semigroup import EMPTY, NormalWord, flip, forward_3cycle, words_of_degree
from dilationlab.stara import (StarPoly, cuntz_reduce, evaluate_tail, evaluate_tokens, expectation,
                               from_unit_matrix, gauge, gauge_average, matrix_unit_product,
                               parse_tokens, quotient_equal, reduce, unit_matrix)
from dilationlab.urelations import from_perm, random_unitary

W = NormalWord


def test_delta_rules():
    rel = flip()
    assert reduce(rel, "e1* e1").terms == {(EMPTY, EMPTY): 1}
    assert reduce(rel, "e1* e2").terms == {}
    assert reduce(rel, "f2* f2").terms == {(EMPTY, EMPTY): 1}


def test_flip_obstruction_is_identity():
    rel = flip()
    red = reduce(rel, "f2* e2 e1* f1")
    assert quotient_equal(red, StarPoly.unit(rel))
    assert cuntz_reduce(red, 1).max_deviation(cuntz_reduce(StarPoly.unit(rel), 1)) == 0


def test_malformed_tokens():
    with pytest.raises(ValueError):
        parse_tokens("e1** f2")
    with pytest.raises(IndexError):
        reduce(flip(), "e3")


def test_cuntz_reduce_identity_level_one():
    out = cuntz_reduce(StarPoly.unit(flip()), 1)
    expected = {(W((i,), (j,)), W((i,), (j,))): 1 for i in (1, 2) for j in (1, 2)}
    assert out.terms == expected


def test_cuntz_reduce_idempotent():
    rel = forward_3cycle()
    p = reduce(rel, "e1 f2 e1*") + reduce(rel, "f1 f2*").scale(0.5j)
    once = cuntz_reduce(p, 2)
    assert cuntz_reduce(once, 2).max_deviation(once) == 0


def test_cuntz_reduce_level_guard():
    with pytest.raises(ValueError):
        cuntz_reduce(StarPoly.unit(flip(), EMPTY, W((1, 1), ())), 1)


def test_matrix_unit_product_examples():
    rel = flip()
    x1, y1, x2, y2 = W((1,), (2,)), W((2,), (1,)), W((2,), (1,)), W((1,), (1,))
    assert matrix_unit_product(rel, (x1, y1), (x2, y2)).terms == {(x1, y2): 1}
    assert matrix_unit_product(rel, (x1, y1), (W((2,), (2,)), y2)).terms == {}
    assert matrix_unit_product(rel, (x1, x1), (x1, x1)).terms == {(x1, x1): 1}
    with pytest.raises(ValueError):
        matrix_unit_product(rel, (x1, y1), (W((1,), ()), y2))


def test_matrix_units_satisfy_axioms_via_reduce():
    rel = random_unitary(2, 2, np.random.default_rng(2))
    words = words_of_degree(2, 2, 1, 1)
    for a, b, c, d in itertools.product(words, repeat=4):
        prod = StarPoly.unit(rel, a, b) * StarPoly.unit(rel, c, d)
        expected = StarPoly.unit(rel, a, d) if b == c else StarPoly.zero(rel)
        assert prod.max_deviation(expected) < 1e-12


def test_expectation_examples():
    rel = flip()
    p = StarPoly.unit(rel, W((1,), ()), W((1,), ()))
    assert expectation(p).terms == p.terms
    assert expectation(StarPoly.unit(rel, W((1,), ()), EMPTY)).terms == {}


def test_gauge_examples():
    rel = flip()
    p = StarPoly.unit(rel, W((1,), ()), EMPTY)
    assert gauge(p, 1, 1).terms == p.terms
    assert gauge(p, 1j, 1).terms == {(W((1,), ()), EMPTY): 1j}
    with pytest.raises(ValueError):
        gauge(p, 2, 1)


def random_tokens(rng, m, n, max_len=6):
    length = int(rng.integers(0, max_len + 1))
    out = []
    for _ in range(length):
        kind = "e" if rng.random() < 0.5 else "f"
        out.append((kind, int(rng.integers(1, (m if kind == "e" else n) + 1)), bool(rng.random() < 0.5)))
    return out


def random_poly(rng, rel, terms=4):
    raw = [(complex(rng.normal(), rng.normal()), random_tokens(rng, rel.m, rel.n)) for _ in range(terms)]
    return reduce(rel, raw)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_gauge_group_law(seed):
    rng = np.random.default_rng(seed)
    rel = random_unitary(2, 2, rng)
    p = random_poly(rng, rel)
    a, b, a2, b2 = np.exp(2j * np.pi * rng.random(4))
    lhs = gauge(gauge(p, a, b), a2, b2)
    assert lhs.max_deviation(gauge(p, a * a2, b * b2)) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_expectation_is_root_of_unity_average(seed):
    rng = np.random.default_rng(seed)
    p = random_poly(rng, random_unitary(2, 2, rng))
    e = expectation(p)
    assert gauge_average(p).max_deviation(e) < 1e-12
    assert expectation(e).max_deviation(e) == 0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31))
def test_reduce_is_confluent(seed):
    rng = np.random.default_rng(seed)
    for rel in (from_perm(flip()), random_unitary(2, 2, rng)):
        toks = random_tokens(rng, 2, 2, 7)
        left = reduce(rel, [(1.0, toks)], order="left")
        right = reduce(rel, [(1.0, toks)], order="right")
        tol = 0 if rel.is_permutation else 1e-12
        assert left.max_deviation(right) <= tol


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31))
def test_reduce_is_sound_in_tail_rep(seed):
    rng = np.random.default_rng(seed)
    rel = random_unitary(2, 2, rng)
    space = TailSpace(rel, Tail((), ((int(rng.integers(1, 3)), int(rng.integers(1, 3))),)))
    toks = random_tokens(rng, 2, 2)
    vec = {(1, (int(rng.integers(1, 3)),), ()): 1.0 + 0j, (0, (), (2,)): 0.3 - 0.2j}
    direct = evaluate_tokens(space, toks, vec)
    red = reduce(rel, [(1.0, toks)]) if toks else StarPoly.unit(rel)
    assert space.distance(direct, evaluate_tail(space, red, vec)) < 1e-9
    lifted = cuntz_reduce(red, max(2, red.max_degree()))
    assert space.distance(direct, evaluate_tail(space, lifted, vec)) < 1e-9


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31))
def test_expectation_faithful_on_level_combinations(seed):
    rng = np.random.default_rng(seed)
    rel = random_unitary(2, 2, rng)
    s = 1
    size = len(words_of_degree(2, 2, s, s))
    m = rng.normal(size=(size, size)) + 1j * rng.normal(size=(size, size))
    m[np.abs(m) < 0.7] = 0
    a = from_unit_matrix(rel, m, s)
    aa = expectation(a.adjoint() * a)
    gram = unit_matrix(aa, s)
    assert np.abs(gram - m.conj().T @ m).max() < 1e-10
    assert np.linalg.eigvalsh(gram).min() > -1e-10
    if not aa.terms:
        assert not m.any()


def test_adjoint_and_str():
    rel = flip()
    p = StarPoly.unit(rel, W((1,), ()), W((), (2,)), 2j)
    assert p.adjoint().terms == {(W((), (2,)), W((1,), ())): -2j}
    assert str(reduce(rel, "f2* e2 e1* f1")) == "1 [e1][e1]* + 1 [e2][e2]*"

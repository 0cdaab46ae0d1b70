import itertools

import numpy as np
import pytest

from dilationlab.fock import (MatPoly, apply_poly, basis_size, boundary_projections, build_fock,
                              norm_lower_seq, pure_word_counts)
from dilationlab.numkernel import opnorm
from dilationlab.paperlab import flip_matrix_poly
from dilationlab.semigroup import EMPTY, NormalWord, flip, forward_3cycle, words_of_degree
from dilationlab.urelations import from_perm, random_unitary

SQRT2 = np.sqrt(2)


def interior_projection(fk, dk=1, dl=1):
    return np.diag(fk.interior_mask(dk, dl).astype(float))


def test_basis_size():
    assert basis_size(2, 2, 2, 2) == 49
    fk = build_fock(flip(), 2, 2)
    assert fk.dim == 49
    assert len(set(fk.basis)) == 49
    for k, w in enumerate(fk.basis):
        assert fk.index(w) == k


def test_trivial_cutoff():
    fk = build_fock(flip(), 0, 0)
    assert fk.dim == 1 and fk.basis == [EMPTY]
    for op in fk.creation_e + fk.creation_f:
        assert op.nnz == 0


def test_limit_enforced():
    with pytest.raises(ValueError):
        build_fock(flip(), 6, 6, limit=1000)


def test_flip_relation_on_vacuum():
    fk = build_fock(flip(), 2, 2)
    vac = fk.vector(EMPTY)
    lhs = fk.letter_op("e", 2) @ (fk.letter_op("f", 1) @ vac)
    rhs = fk.letter_op("f", 2) @ (fk.letter_op("e", 1) @ vac)
    assert np.array_equal(lhs, rhs)
    assert np.array_equal(lhs, fk.vector(NormalWord((2,), (1,))))


@pytest.mark.parametrize("rel", [flip(), forward_3cycle(), random_unitary(2, 2, np.random.default_rng(7)),
                                 random_unitary(2, 3, np.random.default_rng(8))])
def test_interior_isometry_and_commutation(rel):
    fk = build_fock(rel, 3, 3)
    u = from_perm(rel).u if hasattr(rel, "table") else rel.u
    m, n = fk.m, fk.n
    for kind, count, mask in (("e", m, fk.interior_mask(1, 0)), ("f", n, fk.interior_mask(0, 1))):
        p = np.diag(mask.astype(float))
        for a, b in itertools.product(range(1, count + 1), repeat=2):
            gram = (fk.letter_op(kind, a).conj().T @ fk.letter_op(kind, b)).toarray() @ p
            assert np.abs(gram - (p if a == b else 0)).max() < 1e-12
    p = interior_projection(fk)
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            lhs = (fk.letter_op("e", i) @ fk.letter_op("f", j)).toarray()
            rhs = sum(u[(i - 1) * n + (j - 1), (a - 1) * n + (b - 1)]
                      * (fk.letter_op("f", b) @ fk.letter_op("e", a)).toarray()
                      for a in range(1, m + 1) for b in range(1, n + 1))
            assert np.abs((lhs - rhs) @ p).max() < 1e-12


def test_distinct_words_have_orthogonal_ranges():
    fk = build_fock(forward_3cycle(), 3, 3)
    p = interior_projection(fk)
    words = words_of_degree(2, 2, 1, 1)
    for w1, w2 in itertools.product(words, repeat=2):
        gram = (fk.word_op(w1).conj().T @ fk.word_op(w2)).toarray() @ p
        assert np.abs(gram - (p if w1 == w2 else 0)).max() < 1e-12


def test_apply_poly_examples():
    fk = build_fock(flip(), 2, 2)
    one = apply_poly(fk, MatPoly.scalar([(1.0, EMPTY)]))
    assert np.array_equal(one.toarray(), np.eye(fk.dim))
    single = apply_poly(fk, MatPoly.scalar([(1.0, NormalWord((1,), ()))])).toarray()
    assert abs(opnorm(single) - 1) < 1e-12
    assert np.abs(single @ single.conj().T @ single - single).max() < 1e-12
    x = MatPoly.scalar([(1.0, NormalWord((1,), ())), (1.0, NormalWord((), (2,)))])
    assert opnorm(apply_poly(build_fock(flip(), 1, 1), x)) <= SQRT2 + 1e-9


def test_apply_poly_degree_guard():
    fk = build_fock(flip(), 1, 1)
    with pytest.raises(ValueError):
        apply_poly(fk, MatPoly.scalar([(1.0, NormalWord((1, 1), ()))]))


def test_norm_lower_seq_examples():
    assert norm_lower_seq(flip(), MatPoly.scalar([(1.0, EMPTY)]), 4) == pytest.approx([1.0] * 4, abs=1e-12)
    for x in (flip_matrix_poly(),
              MatPoly.scalar([(1.0, NormalWord((1,), ())), (1.0, NormalWord((), (2,)))])):
        seq = norm_lower_seq(flip(), x, 5)
        assert all(b >= a - 1e-10 for a, b in zip(seq, seq[1:]))
        assert max(seq) <= SQRT2 + 1e-9


def test_boundary_projections():
    fk = build_fock(flip(), 3, 3)
    p_op, q_op = boundary_projections(fk)
    P, Q = p_op.toarray(), q_op.toarray()
    mask = fk.interior_mask()
    Pi, Qi = P[np.ix_(mask, mask)], Q[np.ix_(mask, mask)]
    assert np.abs(Pi @ Pi - Pi).max() < 1e-12
    assert np.abs(Qi @ Qi - Qi).max() < 1e-12
    pq = (P @ Q)[np.ix_(mask, mask)]
    vac = np.zeros(mask.sum())
    vac[0] = 1
    assert np.abs(pq - np.outer(vac, vac)).max() < 1e-12
    assert np.abs(pq - (Q @ P)[np.ix_(mask, mask)]).max() < 1e-12
    assert np.linalg.matrix_rank(pq) == 1


def test_trace_of_p_counts_pure_f_words():
    fk = build_fock(forward_3cycle(), 2, 2)
    P, Q = (x.toarray() for x in boundary_projections(fk))
    pure_f = sum(1 for w in fk.basis if not w.u)
    pure_e = sum(1 for w in fk.basis if not w.v)
    assert np.trace(P).real == pytest.approx(pure_f)
    assert np.trace(Q).real == pytest.approx(pure_e)
    assert pure_word_counts(fk) == (pure_f, pure_e)


def test_general_unitary_f_creation_is_isometric_on_interior():
    rel = random_unitary(2, 2, np.random.default_rng(11))
    fk = build_fock(rel, 2, 3)
    p = np.diag(fk.interior_mask(0, 1).astype(float))
    total = sum((b.conj().T @ b).toarray() for b in fk.creation_f) @ p
    assert np.abs(total - fk.n * p).max() < 1e-12

import warnings

import numpy as np
import pytest

from dilationlab.fock import build_fock
from dilationlab.paperlab import flipdefect_rep
from dilationlab.reps import (AtomicRep, FiniteRep, Tail, TailSpace, atomic_to_matrices,
                              commutation_violations, gauge_unitary, graph_defect_free,
                              interior_residuals, random_defect_free_atomic, single_vertex, tail_rep,
                              to_dot, validate, words_up_to_length)
from dilationlab.semigroup import NormalWord, PermRelation, flip, forward_3cycle, reverse_3cycle
from dilationlab.urelations import from_perm, random_unitary


def flip_scalar_rep():
    return FiniteRep(from_perm(flip()), [np.eye(1), np.zeros((1, 1))], [np.eye(1), np.zeros((1, 1))])


def flipdefect_graph():
    rel = flip()
    one = 1.0 + 0j
    e = ({1: (3, one)}, {1: (4, one)})
    f = ({0: (3, one)}, {2: (4, one)})
    return AtomicRep(rel, (0, 1, 2, 3, 4), e, f)


def test_validate_flipdefect():
    rep = validate(flipdefect_rep())
    assert rep.is_representation
    assert rep.row_contractive
    assert not rep.defect_free
    assert rep.partially_isometric


def test_validate_flip_scalar_rep():
    rep = validate(flip_scalar_rep())
    assert rep.defect_free and rep.partially_isometric and rep.is_representation


def test_validate_zero_rep():
    z = np.zeros((1, 1))
    rep = validate(FiniteRep(from_perm(flip()), [z, z], [z, z]))
    assert rep.row_contractive and not rep.defect_free


def test_no_finite_rep_is_row_isometric():
    for rep in (flipdefect_rep(), flip_scalar_rep()):
        report = validate(rep)
        assert not report.row_isometric
        assert not report.row_isometry_possible


def test_finite_rep_warns_on_broken_relation():
    a = np.array([[0, 1], [0, 0]], dtype=complex)
    with pytest.warns(UserWarning):
        FiniteRep(from_perm(flip()), [a, np.zeros((2, 2))], [a.T, np.zeros((2, 2))])


def test_finite_rep_json_round_trip():
    rep = flipdefect_rep()
    back = FiniteRep.from_json(rep.to_json())
    for x, y in zip(rep.E + rep.F, back.E + back.F):
        assert np.array_equal(x, y)


def test_atomic_to_matrices_flipdefect_graph():
    a = flipdefect_graph()
    rep = atomic_to_matrices(a)
    ref = flipdefect_rep()
    for x, y in zip(rep.E + rep.F, ref.E + ref.F):
        assert np.array_equal(x, y)
    assert not graph_defect_free(a)
    assert not commutation_violations(a)


def test_atomic_to_matrices_empty_graph():
    a = AtomicRep(flip(), (0,), ({}, {}), ({}, {}))
    rep = atomic_to_matrices(a)
    assert all(not x.any() for x in rep.E + rep.F)


def test_single_vertex_flip():
    rep = atomic_to_matrices(single_vertex(flip(), 1, 1))
    ref = flip_scalar_rep()
    for x, y in zip(rep.E + rep.F, ref.E + ref.F):
        assert np.array_equal(x, y)


def test_atomic_rejects_non_injective_edge():
    one = 1.0 + 0j
    with pytest.raises(ValueError):
        AtomicRep(flip(), (0, 1), ({0: (1, one), 1: (1, one)}, {}), ({}, {}))


@pytest.mark.parametrize("rel", [flip(), forward_3cycle(), reverse_3cycle(), PermRelation.identity(2, 2)])
def test_random_atomic_is_defect_free_and_commutes(rel):
    rng = np.random.default_rng(17)
    for d in range(1, 7):
        a = random_defect_free_atomic(rel, d, rng)
        assert not commutation_violations(a)
        assert graph_defect_free(a)
        report = validate(atomic_to_matrices(a))
        assert report.defect_free and report.is_representation and report.partially_isometric


def test_graph_test_matches_matrix_test_after_edge_removal():
    rng = np.random.default_rng(5)
    for _ in range(20):
        a = random_defect_free_atomic(flip(), int(rng.integers(2, 6)), rng)
        e = [dict(mp) for mp in a.e_edges]
        f = [dict(mp) for mp in a.f_edges]
        # drop every edge leaving one vertex: one colour of in-degree disappears
        x = a.vertices[int(rng.integers(len(a.vertices)))]
        for mp in e + f:
            mp.pop(x, None)
        b = AtomicRep(a.rel, a.vertices, tuple(e), tuple(f))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            matrix_says = validate(atomic_to_matrices(b)).defect_free
        assert graph_defect_free(b) == matrix_says is False
        assert graph_defect_free(a) == validate(atomic_to_matrices(a)).defect_free is True


def test_atomic_json_round_trip_and_dot():
    a = random_defect_free_atomic(flip(), 4, np.random.default_rng(0))
    b = AtomicRep.from_json(a.to_json())
    assert b.vertices == a.vertices and b.e_edges == a.e_edges and b.f_edges == a.f_edges
    dot = to_dot(flipdefect_graph())
    assert 'label="e1"' in dot and 'label="f2", color="black:black"' in dot


def test_tail_rep_flip_interior_is_star_rep():
    tr = tail_rep(flip(), Tail((), ((1, 1),)), depth=3, word_cutoff=3)
    res = interior_residuals(tr)
    assert tr.interior.shape[1] > 0
    assert max(res.values()) < 1e-12


def test_tail_rep_general_unitary_interior():
    rel = random_unitary(2, 2, np.random.default_rng(3))
    tr = tail_rep(rel, Tail(((2, 1),), ((1, 2),)), depth=3, word_cutoff=3)
    assert max(interior_residuals(tr).values()) < 1e-9


def test_tail_rep_trivial():
    tr = tail_rep(forward_3cycle(), Tail(), depth=1, word_cutoff=0)
    assert tr.rep.d == 1
    assert tr.interior.shape[1] == 0
    assert max(interior_residuals(tr).values()) == 0


def test_tail_rep_level_zero_copy_is_left_regular():
    rel = flip()
    c = 3
    tr = tail_rep(rel, Tail((), ((1, 2),)), depth=2, word_cutoff=c)
    idx = tr.copy_indices(0)
    words = words_up_to_length(2, 2, c)
    fk = build_fock(rel, c, c)
    fidx = [fk.index(w) for w in words]
    inner = [k for k, w in enumerate(words) if w.length <= c - 1]
    for kind in ("e", "f"):
        for g in (1, 2):
            a = tr.rep.letter(kind, g)[np.ix_(idx, [idx[k] for k in inner])]
            b = fk.letter_op(kind, g).toarray()[np.ix_(fidx, [fidx[k] for k in inner])]
            assert np.abs(a - b).max() < 1e-12


def test_tail_cycle_must_be_nonempty():
    with pytest.raises(ValueError):
        Tail((), ())


def test_gauge_unitary():
    tr = tail_rep(flip(), Tail((), ((1, 1),)), depth=3, word_cutoff=3)
    assert np.array_equal(gauge_unitary(tr, 1, 1), np.eye(tr.rep.d))
    u = gauge_unitary(tr, 1j, 1)
    p = tr.interior
    for x in tr.rep.E:
        assert np.abs((u @ x @ u.conj().T - 1j * x) @ p).max() < 1e-10
    for y in tr.rep.F:
        assert np.abs((u @ y @ u.conj().T - y) @ p).max() < 1e-10
    with pytest.raises(ValueError):
        gauge_unitary(tr, 2, 1)


def test_gauge_grading_is_well_defined_under_lifting():
    space = TailSpace(forward_3cycle(), Tail(((2, 1),), ((1, 2), (2, 2))))
    for s in range(3):
        for w in words_up_to_length(2, 2, 2):
            key = (s, w.u, w.v)
            lifted = space.lift({key: 1.0}, s + 2)
            assert {TailSpace.bigrade(k) for k in lifted} == {TailSpace.bigrade(key)}


def test_tail_space_inner_product_is_isometric_on_lift():
    space = TailSpace(random_unitary(2, 2, np.random.default_rng(9)), Tail((), ((1, 1),)))
    v = {(0, (1,), (2,)): 1.0 + 0j, (1, (), ()): 0.5j}
    assert abs(space.inner(v, v) - sum(abs(c) ** 2 for c in space.lift(v, 3).values())) < 1e-12
    w = space.apply("e", 1, v)
    assert abs(space.inner(w, w) - space.inner(v, v)) < 1e-12
    back = space.apply("e", 1, w, star=True)
    assert space.distance(back, v) < 1e-12


def test_word_list_is_graded():
    words = words_up_to_length(2, 2, 2)
    assert words[0] == NormalWord()
    assert [w.length for w in words] == sorted(w.length for w in words)

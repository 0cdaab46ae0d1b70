import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dilationlab.dilation import (DilationResult, atomic_cross_check, atomic_star_dilate,
                                  block_defect_residual, chain_vectors, fbp_dilate, free_words,
                                  gram_oracle, match_monomial, minimal_defect_residual,
                                  minimal_part_gram, solel_dilate, star_dilate_defect_free,
                                  uniqueness_check, wandering_decomposition)
from dilationlab.numkernel import NotContractiveError
from dilationlab.paperlab import flipdefect_rep
from dilationlab.reps import (FiniteRep, atomic_to_matrices, commutation_violations, in_degrees,
                              perturb, random_defect_free_atomic, single_vertex, validate)
from dilationlab.semigroup import flip, forward_3cycle, reverse_3cycle
from dilationlab.urelations import from_perm


def flip_scalar_rep():
    return FiniteRep(from_perm(flip()), [np.eye(1), np.zeros((1, 1))], [np.eye(1), np.zeros((1, 1))])


def random_row_contraction(rng, p, d):
    a = rng.normal(size=(d, p * d)) + 1j * rng.normal(size=(d, p * d))
    a *= rng.uniform(0.2, 1.0) / np.linalg.norm(a, 2)
    return [a[:, k * d:(k + 1) * d] for k in range(p)]


def brute_gram(result, A, max_len):
    """Gram blocks of S_w J computed straight from the dilation matrices."""
    S = [s.toarray() for s in result.S]
    words = free_words(len(A), max_len)
    vecs = {}
    for w in words:
        x = result.J
        for i in reversed(w):
            x = S[i - 1] @ x
        vecs[w] = x
    return words, vecs


def test_gram_oracle_examples():
    rng = np.random.default_rng(0)
    A = random_row_contraction(rng, 2, 3)
    assert np.array_equal(gram_oracle(A, (1, 2), (1, 2)), np.eye(3))
    assert np.abs(gram_oracle(A, (1, 2), (1,)) - A[1]).max() == 0
    assert np.abs(gram_oracle(A, (1,), (1, 2)) - A[1].conj().T).max() == 0
    assert not gram_oracle(A, (1,), (2,)).any()


def test_fbp_scalar_zero_is_shift():
    res = fbp_dilate([np.zeros((1, 1))], 4)
    assert res.diagnostics["isometry_residual"] == 0
    assert res.diagnostics["minimality_gap"] == 0
    S = res.S[0].toarray()
    # the truncated unilateral shift: a single chain H -> xi_0 -> xi_1 -> ...
    assert np.array_equal(np.abs(S).sum(axis=0), [1, 1, 1, 1, 1, 0])


def test_fbp_unimodular_scalar_is_its_own_dilation():
    res = fbp_dilate([np.array([[np.exp(0.3j)]])], 3)
    assert res.diagnostics["defect_rank"] == 0
    assert res.diagnostics["minimal_dim"] == 1
    assert res.diagnostics["wandering_multiplicity"] == 1


def test_fbp_flip_blocks_match_oracle():
    rep = flip_scalar_rep()
    A = [a @ b for a in rep.E for b in rep.F]
    res = fbp_dilate(A, 3)
    words, vecs = brute_gram(res, A, 3)
    for w in words:
        for w2 in words:
            assert np.abs(vecs[w2].conj().T @ vecs[w] - gram_oracle(A, w, w2)).max() < 1e-9


def test_fbp_rejects_non_contraction():
    with pytest.raises(NotContractiveError):
        fbp_dilate([np.eye(2), np.eye(2)], 2)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(1, 4), st.integers(0, 2**31))
def test_fbp_random(p, d, seed):
    rng = np.random.default_rng(seed)
    A = random_row_contraction(rng, p, d)
    res = fbp_dilate(A, 3)
    diag = res.diagnostics
    assert diag["isometry_residual"] <= 1e-9
    assert diag["compression_residual"] <= 1e-12
    assert diag["gram_deviation"] <= 1e-9
    words, vecs = brute_gram(res, A, 2)
    for w in words:
        got = res.J.conj().T @ vecs[w]
        want = np.eye(d) if not w else np.linalg.multi_dot([np.eye(d)] + [A[i - 1] for i in w])
        assert np.abs(got - want).max() < 1e-12


def test_wandering_zero_contraction_counts():
    p, depth = 2, 3
    res = fbp_dilate([np.zeros((1, 1))] * p, depth)
    words = len(free_words(p, depth))
    assert res.dim == 1 + p * words
    wd = wandering_decomposition(res.S, res.J, depth + 1)
    assert wd.minimal.shape[1] == res.dim
    assert wd.multiplicity == 0


def test_wandering_complement_of_coisometry():
    # the row [1/sqrt2, 1/sqrt2] has a rank-one defect, so half of K is unused
    A = [np.array([[2 ** -0.5]]), np.array([[2 ** -0.5]])]
    depth = 3
    res = fbp_dilate(A, depth)
    wd = wandering_decomposition(res.S, res.J, depth + 1, orbit_depth=depth)
    words = len(free_words(2, depth))
    assert wd.minimal.shape[1] == 1 + words
    assert wd.complement.shape[1] == words
    assert wd.multiplicity == 1
    assert wd.spans
    assert wd.reducing_residual < 1e-12


def test_wandering_scalar_half_is_minimal():
    res = fbp_dilate([np.array([[0.5]])], 4)
    assert res.diagnostics["minimality_gap"] == 0


def test_dilation_json_round_trip():
    res = fbp_dilate([np.array([[0.5]]), np.array([[0.25j]])], 2)
    back = DilationResult.from_json(res.to_json())
    assert back.mode == "fbp" and back.depth == 2
    for x, y in zip(res.S, back.S):
        assert np.array_equal(x.toarray(), y.toarray())
    assert np.array_equal(back.J, res.J)


def test_star_dilate_flip_scalar():
    chain = star_dilate_defect_free(flip_scalar_rep(), 3)
    assert [chain.dim(s) for s in range(4)] == [1, 4, 16, 64]
    assert max(chain.v_residual(s) for s in range(4)) == 0
    diag = chain.diagnostics()
    assert diag["defect_residual_e"] <= 1e-12 and diag["defect_residual_f"] <= 1e-12
    assert diag["compression_residual"] == 0
    # atomic: every generator is a scaled partial permutation
    for x in chain.compressed().E + chain.compressed().F:
        assert all(np.count_nonzero(np.abs(col) > 1e-12) <= 1 for col in x.T)
        assert np.all((np.abs(x) < 1e-12) | (np.abs(np.abs(x) - 1) < 1e-12))


def test_star_dilate_trivial_depth():
    rep = flip_scalar_rep()
    chain = star_dilate_defect_free(rep, 0)
    g = chain.compressed(0)
    for x, y in zip(g.E + g.F, rep.E + rep.F):
        assert np.abs(x - y).max() < 1e-15
    assert uniqueness_check(rep, 0)["deviation"] == 0


def test_star_dilate_rejects_defect():
    with pytest.raises(ValueError):
        star_dilate_defect_free(flipdefect_rep(), 2)


@pytest.mark.parametrize("rel", [flip(), forward_3cycle(), reverse_3cycle()])
def test_star_dilate_random_atomic(rel):
    rng = np.random.default_rng(21)
    for d in (2, 4, 6):
        rep = atomic_to_matrices(random_defect_free_atomic(rel, d, rng))
        chain = star_dilate_defect_free(rep, 2)
        diag = chain.diagnostics()
        assert diag["v_residual"] <= 1e-12
        assert max(diag["defect_residual_e"], diag["defect_residual_f"], diag["isometry_residual"],
                   diag["commutation_residual"]) <= 1e-9
        assert diag["compression_residual"] <= 1e-12
        assert uniqueness_check(rep, 2, trials=5)["deviation"] <= 1e-10


def test_v_isometry_iff_block_defect_free():
    rng = np.random.default_rng(3)
    rep = atomic_to_matrices(random_defect_free_atomic(flip(), 3, rng))
    previous = 0.0
    for eps in (0.0, 1e-4, 1e-2, 1e-1):
        bad = perturb(rep, eps, rng)
        chain = star_dilate_defect_free(bad, 2, strict=False)
        resid = max(chain.v_residual(s) for s in range(3))
        assert abs(resid - block_defect_residual(bad)) < 1e-12
        assert (resid <= 1e-12) == (eps == 0)
        assert resid >= previous
        previous = resid


def test_solel_defect_free_matches_star_chain():
    rep = flip_scalar_rep()
    res = solel_dilate(rep, 4)
    chain = star_dilate_defect_free(rep, 1)
    x = chain_vectors(chain)
    assert np.abs(minimal_part_gram(res, rep.rel, 1) - x.conj().T @ x).max() < 1e-10
    assert minimal_defect_residual(res, rep.rel, 2) <= 1e-9


def test_solel_zero_rep():
    z = np.zeros((1, 1))
    rep = FiniteRep(from_perm(flip()), [z, z], [z, z])
    res = solel_dilate(rep, 3)
    diag = res.diagnostics
    for key in ("isometry_residual", "commutation_residual", "compression_residual",
                "minimal_correspondence", "pi1_gram_deviation", "pi2_gram_deviation"):
        assert diag[key] <= 1e-9, key


def test_solel_flipdefect_is_row_isometric_on_interior():
    res = solel_dilate(flipdefect_rep(), 3)
    diag = res.diagnostics
    for key in ("isometry_residual", "commutation_residual", "compression_residual",
                "omega_unitarity", "omega_intertwining", "minimal_correspondence"):
        assert diag[key] <= 1e-9, key


def test_solel_needs_depth():
    with pytest.raises(ValueError):
        solel_dilate(flip_scalar_rep(), 1)


def check_atomic_output(dil):
    g = dil.graph
    deg = in_degrees(g)
    for v in dil.interior:
        assert deg[v] == (1, 1)
    assert not commutation_violations(g, dil.interior)


def test_atomic_dilation_of_single_vertex():
    a = single_vertex(flip(), 1, 1)
    for depth in range(4):
        dil = atomic_star_dilate(a, depth)
        check_atomic_output(dil)
        assert len(dil.graph.vertices) == 4 ** depth
        res = atomic_cross_check(a, depth)
        assert res["matched"] and res["deviation"] < 1e-12


def test_atomic_depth_zero_is_input():
    rng = np.random.default_rng(8)
    a = random_defect_free_atomic(forward_3cycle(), 4, rng)
    dil = atomic_star_dilate(a, 0)
    assert dil.graph.vertices == tuple(str(k) for k in a.vertices)
    x, y = atomic_to_matrices(a), atomic_to_matrices(dil.graph)
    for p, q in zip(x.E + x.F, y.E + y.F):
        assert np.abs(p - q).max() < 1e-12


def test_atomic_compression_to_original_vertices():
    rng = np.random.default_rng(9)
    a = random_defect_free_atomic(flip(), 3, rng)
    dil = atomic_star_dilate(a, 2)
    for kind, maps in (("e", a.e_edges), ("f", a.f_edges)):
        for g, mp in enumerate(maps, 1):
            for src, (dst, c) in mp.items():
                hit = dil.graph.edge(kind, g, dil.original[src])
                assert hit is not None and hit[0] == dil.original[dst]
                assert abs(hit[1] - c) < 1e-12


def test_atomic_rejects_defective_graph():
    one = 1.0 + 0j
    from dilationlab.reps import AtomicRep
    a = AtomicRep(flip(), (0, 1), ({0: (1, one)}, {}), ({0: (1, one)}, {}))
    with pytest.raises(ValueError, match="vertex 0"):
        atomic_star_dilate(a, 1)


def test_match_monomial_detects_mismatch():
    x = [np.array([[0, 0], [1, 0]], dtype=complex)]
    y = [np.array([[0, 1j], [0, 0]], dtype=complex)]
    u = match_monomial(x, y)
    assert u is not None and np.abs(u @ x[0] @ u.conj().T - y[0]).max() < 1e-12
    assert match_monomial(x, [np.eye(2, dtype=complex)]) is None


def test_validate_chain_compression_is_defect_free_on_interior():
    rep = atomic_to_matrices(random_defect_free_atomic(flip(), 2, np.random.default_rng(1)))
    g = star_dilate_defect_free(rep, 2).compressed()
    report = validate(g)
    assert report.row_contractive

import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dilationlab.semigroup import (EMPTY, NormalWord, PermRelation, all_relations, classify,
                                   commute_ef, factor, flip, forward_3cycle, is_isomorphic,
                                   multiply, normalize, parse_word, reverse_3cycle)


def brute_normalize(rel, letters):
    """Independent oracle: rewrite the leftmost ``f_j e_i`` pair until none is left."""
    word = list(letters)
    inverse = {v: k for k, v in rel.mapping().items()}
    while True:
        for p in range(len(word) - 1):
            if word[p][0] == "f" and word[p + 1][0] == "e":
                a, b = inverse[(word[p + 1][1], word[p][1])]
                word[p:p + 2] = [("e", a), ("f", b)]
                break
        else:
            break
    return NormalWord(tuple(i for g, i in word if g == "e"), tuple(j for g, j in word if g == "f"))


def letters_strategy(m=2, n=2, max_len=8):
    letter = st.one_of(st.tuples(st.just("e"), st.integers(1, m)), st.tuples(st.just("f"), st.integers(1, n)))
    return st.lists(letter, max_size=max_len)


relations = st.sampled_from([flip(), forward_3cycle(), reverse_3cycle(), PermRelation.identity(2, 2),
                             PermRelation.from_cycles(2, 3, [[(1, 2), (2, 1)], [(2, 2), (2, 3), (1, 3)]])])


def test_commute_ef_flip():
    """Under the flip, e2 f1 = f2 e1."""
    assert commute_ef(flip(), 2, 1) == (2, 1)
    assert commute_ef(flip(), 1, 1) == (1, 1)


def test_commute_ef_forward_cycle():
    # e1 f1 = f2 e1
    assert commute_ef(forward_3cycle(), 1, 1) == (2, 1)


def test_normalize_examples():
    assert normalize(flip(), "f2 e1") == NormalWord((2,), (1,))
    assert normalize(flip(), []) == EMPTY
    assert normalize(forward_3cycle(), "f1 e2") == NormalWord((1,), (2,))


def test_normalize_rejects_bad_index():
    with pytest.raises(IndexError):
        normalize(flip(), "e3")


def test_parse_word_rejects_garbage():
    assert parse_word("e1.f2") == [("e", 1), ("f", 2)]
    with pytest.raises(ValueError):
        parse_word("g1")


def test_factor_examples():
    assert factor(flip(), NormalWord((1,), (2,)), "FE") == [("f", 1), ("e", 2)]
    assert factor(forward_3cycle(), NormalWord((1,), (1,)), "FE") == [("f", 2), ("e", 1)]
    w = NormalWord((2, 1, 2), ())
    assert factor(flip(), w, "EEE") == w.letters()


def test_factor_pattern_mismatch():
    with pytest.raises(ValueError):
        factor(flip(), NormalWord((1,), (2,)), "EE")


def test_multiply_examples():
    rel = flip()
    w2 = NormalWord((), (1, 2))
    assert multiply(rel, EMPTY, w2) == w2
    prod = multiply(rel, NormalWord((2,), ()), w2)
    assert prod.degree == (1, 2)
    assert prod == brute_normalize(rel, [("e", 2), ("f", 1), ("f", 2)])
    assert multiply(rel, NormalWord((1,), ()), NormalWord((2,), ())) == NormalWord((1, 2), ())


@settings(max_examples=200, deadline=None)
@given(relations, st.data())
def test_normalize_matches_bruteforce(rel, data):
    letters = data.draw(letters_strategy(rel.m, rel.n))
    w = normalize(rel, letters)
    assert w == brute_normalize(rel, letters)
    assert normalize(rel, w.letters()) == w


@settings(max_examples=200, deadline=None)
@given(relations, st.data())
def test_unique_factorization(rel, data):
    w = normalize(rel, data.draw(letters_strategy(rel.m, rel.n)))
    k, l = w.degree
    pattern = data.draw(st.permutations("E" * k + "F" * l))
    raw = factor(rel, w, pattern)
    assert [g.upper() for g, _ in raw] == list(pattern)
    assert normalize(rel, raw) == w


@settings(max_examples=100, deadline=None)
@given(relations, st.data())
def test_multiply_degree_and_associativity(rel, data):
    ws = [normalize(rel, data.draw(letters_strategy(rel.m, rel.n, 5))) for _ in range(3)]
    a, b, c = ws
    ab = multiply(rel, a, b)
    assert ab.degree == (a.degree[0] + b.degree[0], a.degree[1] + b.degree[1])
    assert multiply(rel, ab, c) == multiply(rel, a, multiply(rel, b, c))


def test_classify_two_by_two():
    classes = classify(2, 2)
    assert len(classes) == 9
    members = [r.table for c in classes for r in c]
    assert len(members) == 24 == len(set(members))
    where = {r.table: k for k, c in enumerate(classes) for r in c}
    assert where[forward_3cycle().table] != where[reverse_3cycle().table]


def test_classify_trivial_size():
    assert len(classify(1, 1)) == 1


def test_classify_guard():
    with pytest.raises(ValueError):
        classify(3, 3)


def test_is_isomorphic_is_an_equivalence():
    rels = all_relations(2, 2)[::3]
    for a in rels:
        assert is_isomorphic(a, a)
    for a, b in itertools.product(rels, repeat=2):
        assert is_isomorphic(a, b) == is_isomorphic(b, a)
    for a, b, c in itertools.product(rels, repeat=3):
        if is_isomorphic(a, b) and is_isomorphic(b, c):
            assert is_isomorphic(a, c)


def test_class_representative_is_least_table():
    for cls in classify(2, 2):
        assert cls[0].table == min(r.table for r in cls)


def test_relation_json_round_trip():
    rel = forward_3cycle()
    assert PermRelation.from_json(rel.to_json()) == rel


def test_relation_rejects_non_bijection():
    with pytest.raises(ValueError):
        PermRelation(2, 2, ((1, 1), (1, 1), (2, 1), (2, 2)))

"""Rewriting of *-polynomials in the generators into sums of monomials ``x y*``.

Raw input is a product of tokens such as ``e1* f2 e1 f1*``.  Adjoints are pushed to
the right with the rules

    e_i* e_k = delta_ik              f_j* f_l = delta_jl
    e_i* f_j = sum_{k,j'} conj(u[(i,j'),(k,j)]) f_j' e_k*
    f_j* e_i = sum_{l,i'} u[(i,l),(i',j)] e_i' f_l*

The exchange rules use the defect relations ``sum e e* = I = sum f f*``, so the
normal forms are valid in *-representations (row isometric and defect free),
not in the Fock representation.  ``cuntz_reduce`` inserts the same relations to
bring every term to a common level of matrix units.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .semigroup import EMPTY, NormalWord, words_of_degree
from .urelations import PRUNE, UnitaryRelation, as_unitary, normal_terms

Token = tuple  # (kind "e"/"f", 1-based index, starred)

_TOKEN = re.compile(r"^([ef])(\d+)(\*?)$")


def parse_tokens(text: str) -> list[Token]:
    """``"e1* f2 e1 f1*"`` -> ``[("e",1,True), ("f",2,False), ...]``; separators are spaces or dots."""
    out = []
    for tok in re.split(r"[\s.]+", text.strip()):
        if not tok:
            continue
        mt = _TOKEN.match(tok)
        if mt is None:
            raise ValueError(f"bad token {tok!r}")
        out.append((mt.group(1), int(mt.group(2)), mt.group(3) == "*"))
    return out


def format_tokens(tokens: Sequence[Token]) -> str:
    return " ".join(f"{k}{i}{'*' if s else ''}" for k, i, s in tokens)


def _check_tokens(rel: UnitaryRelation, tokens: Sequence[Token]) -> None:
    for kind, idx, _ in tokens:
        top = rel.m if kind == "e" else rel.n
        if not 1 <= idx <= top:
            raise IndexError(f"{kind}-index {idx} out of range 1..{top}")


def format_coeff(c: complex) -> str:
    c = complex(c)
    if c.imag == 0:
        return f"{c.real:.12g}"
    return f"({c.real:.12g}{c.imag:+.12g}j)"


@dataclass(frozen=True, eq=False)
class StarPoly:
    """Finite sum ``sum c * x y*`` with ``x``, ``y`` e-first words."""

    rel: UnitaryRelation
    terms: dict

    def __post_init__(self):
        object.__setattr__(self, "rel", as_unitary(self.rel))
        clean = {}
        for (x, y), c in self.terms.items():
            if abs(c) > PRUNE:
                clean[(x, y)] = complex(c)
        object.__setattr__(self, "terms", clean)

    @classmethod
    def unit(cls, rel, x: NormalWord = EMPTY, y: NormalWord = EMPTY, c: complex = 1.0) -> "StarPoly":
        return cls(rel, {(x, y): c})

    @classmethod
    def zero(cls, rel) -> "StarPoly":
        return cls(rel, {})

    def __add__(self, other: "StarPoly") -> "StarPoly":
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, 0.0) + c
        return StarPoly(self.rel, out)

    def __sub__(self, other: "StarPoly") -> "StarPoly":
        return self + other.scale(-1.0)

    def scale(self, c: complex) -> "StarPoly":
        return StarPoly(self.rel, {k: c * v for k, v in self.terms.items()})

    def adjoint(self) -> "StarPoly":
        return StarPoly(self.rel, {(y, x): np.conj(c) for (x, y), c in self.terms.items()})

    def __mul__(self, other: "StarPoly") -> "StarPoly":
        raw = [(c1 * c2, monomial_tokens(x1, y1) + monomial_tokens(x2, y2))
               for (x1, y1), c1 in self.terms.items() for (x2, y2), c2 in other.terms.items()]
        return reduce(self.rel, raw)

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(abs(c) <= tol for c in self.terms.values())

    def max_deviation(self, other: "StarPoly") -> float:
        diff = (self - other).terms
        return max((abs(c) for c in diff.values()), default=0.0)

    def sorted_terms(self) -> list:
        return sorted(self.terms.items(), key=lambda kv: (kv[0][0].degree, kv[0][0], kv[0][1].degree, kv[0][1]))

    def max_degree(self) -> int:
        return max((max(x.degree + y.degree) for x, y in self.terms), default=0)

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        return " + ".join(f"{format_coeff(c)} [{x}][{y}]*" for (x, y), c in self.sorted_terms())

    def to_json(self) -> list:
        return [{"x": str(x), "y": str(y), "coeff": [c.real, c.imag]} for (x, y), c in self.sorted_terms()]


def monomial_tokens(x: NormalWord, y: NormalWord) -> list[Token]:
    """Tokens of ``x y*``: the letters of ``x`` followed by the reversed, starred letters of ``y``."""
    return [(k, i, False) for k, i in x.letters()] + [(k, i, True) for k, i in reversed(y.letters())]


def net_degree(x: NormalWord, y: NormalWord) -> tuple[int, int]:
    return (x.degree[0] - y.degree[0], x.degree[1] - y.degree[1])


# --- reduction ----------------------------------------------------------------


def _exchange(rel: UnitaryRelation, left: Token, right: Token) -> list[tuple[complex, tuple]]:
    """Rewrite an adjoint token immediately followed by a plain one."""
    (k1, a, _), (k2, b, _) = left, right
    m, n = rel.m, rel.n
    u = rel.u
    if k1 == k2:
        return [(1.0 + 0j, ())] if a == b else []
    out = []
    if k1 == "e":
        # e_a* f_b = sum_{k,j'} conj(u[(a,j'),(k,b)]) f_j' e_k*
        for k in range(1, m + 1):
            for jp in range(1, n + 1):
                c = np.conj(u[(a - 1) * n + (jp - 1), (k - 1) * n + (b - 1)])
                if abs(c) > PRUNE:
                    out.append((complex(c), (("f", jp, False), ("e", k, True))))
    else:
        # f_a* e_b = sum_{l,i'} u[(b,l),(i',a)] e_i' f_l*
        for ip in range(1, m + 1):
            for l in range(1, n + 1):
                c = u[(b - 1) * n + (l - 1), (ip - 1) * n + (a - 1)]
                if abs(c) > PRUNE:
                    out.append((complex(c), (("e", ip, False), ("f", l, True))))
    return out


def _sites(tokens: tuple) -> list[int]:
    return [p for p in range(len(tokens) - 1) if tokens[p][2] and not tokens[p + 1][2]]


def reduce(rel, raw: Iterable[tuple[complex, Sequence[Token]]] | str | Sequence[Token],
           order: str = "left") -> StarPoly:
    """Normal form of a combination of raw *-monomials.

    ``raw`` may be token text, one nonempty token list, or ``[(coeff, tokens), ...]``
    (the identity monomial is ``""`` or ``[(1, [])]``).  ``order``
    selects which rewrite site fires first (``"left"`` or ``"right"``); the two are
    compared by the confluence tests.
    """
    rel = as_unitary(rel)
    if isinstance(raw, str):
        raw = [(1.0, parse_tokens(raw))]
    else:
        raw = list(raw)
        if raw and isinstance(raw[0], tuple) and len(raw[0]) == 3 and isinstance(raw[0][0], str):
            raw = [(1.0, raw)]
    if order not in ("left", "right"):
        raise ValueError(f"unknown rule order {order!r}")
    work: dict = {}
    for c, toks in raw:
        toks = tuple((k, int(i), bool(s)) for k, i, s in toks)
        _check_tokens(rel, toks)
        work[toks] = work.get(toks, 0.0) + c
    done: dict = {}
    while work:
        nxt: dict = {}
        for toks, c in work.items():
            if abs(c) <= PRUNE:
                continue
            sites = _sites(toks)
            if not sites:
                done[toks] = done.get(toks, 0.0) + c
                continue
            p = sites[0] if order == "left" else sites[-1]
            for c2, repl in _exchange(rel, toks[p], toks[p + 1]):
                new = toks[:p] + repl + toks[p + 2:]
                nxt[new] = nxt.get(new, 0.0) + c * c2
        work = nxt
    out: dict = {}
    for toks, c in done.items():
        if abs(c) <= PRUNE:
            continue
        plain = [(k, i) for k, i, s in toks if not s]
        starred = [(k, i) for k, i, s in toks if s]
        # b_1* ... b_l* = (b_l ... b_1)*
        for x, cx in normal_terms(rel, plain):
            for y, cy in normal_terms(rel, list(reversed(starred))):
                key = (x, y)
                out[key] = out.get(key, 0.0) + c * cx * np.conj(cy)
    return StarPoly(rel, out)


def matrix_unit_product(rel, t1: tuple, t2: tuple) -> StarPoly:
    """``(x1 y1*)(x2 y2*) = delta(y1, x2) x1 y2*`` for ``d(y1) = d(x2)``."""
    (x1, y1), (x2, y2) = t1, t2
    if y1.degree != x2.degree:
        raise ValueError(f"inner degrees differ: {y1.degree} vs {x2.degree}; use reduce")
    if y1 != x2:
        return StarPoly.zero(rel)
    return StarPoly.unit(rel, x1, y2)


# --- defect-free quotient -------------------------------------------------------


def _lift_term(rel: UnitaryRelation, x: NormalWord, y: NormalWord, level: int) -> dict:
    """``x y* = sum_v (xv)(yv)*`` with ``v`` over words making ``d(yv) = (level, level)``."""
    k2, l2 = y.degree
    if k2 > level or l2 > level:
        raise ValueError(f"level {level} is below term degree {y.degree}")
    out: dict = {}
    for v in words_of_degree(rel.m, rel.n, level - k2, level - l2):
        for xv, cx in normal_terms(rel, x.letters() + v.letters()):
            for yv, cy in normal_terms(rel, y.letters() + v.letters()):
                key = (xv, yv)
                out[key] = out.get(key, 0.0) + cx * np.conj(cy)
    return out


def cuntz_reduce(p: StarPoly, level: int) -> StarPoly:
    """Rewrite every term with its adjoint side at degree ``(level, level)``.

    Only valid in the defect-free quotient; never compare the result with Fock-space
    evaluations, where ``sum e e*`` is not the identity.
    """
    out: dict = {}
    for (x, y), c in p.terms.items():
        for key, c2 in _lift_term(p.rel, x, y, level).items():
            out[key] = out.get(key, 0.0) + c * c2
    return StarPoly(p.rel, out)


def poly_level(p: StarPoly) -> int:
    """Smallest level that every adjoint side fits under."""
    return max((max(y.degree) for _, y in p.terms), default=0)


def lower_once(p: StarPoly, tol: float = 1e-12) -> StarPoly | None:
    """Inverse of one lifting step, if ``p`` lies in the range of that step.

    ``p`` must sit at a level ``s >= 1``.  The lifting map ``L`` from level ``s-1``
    satisfies ``L* L = mn I``, so the candidate preimage is ``L* p / mn``; it is
    accepted when lifting it back reproduces ``p``.
    """
    rel = p.rel
    if not p.terms:
        return p
    s = poly_level(p)
    if s == 0 or any(y.degree != (s, s) for _, y in p.terms):
        return None
    mn = rel.m * rel.n
    pre: dict = {}
    seen = set()
    for (x, y) in p.terms:
        if x.degree[0] < 1 or x.degree[1] < 1:
            return None
        # candidate parents: strip one block from both sides in every way that lifts back
        for xa, ya in _parents(rel, x, y):
            seen.add((xa, ya))
    for (xa, ya) in seen:
        lifted = _lift_term(rel, xa, ya, s)
        val = sum(np.conj(c) * p.terms.get(key, 0.0) for key, c in lifted.items()) / mn
        if abs(val) > PRUNE:
            pre[(xa, ya)] = val
    cand = StarPoly(rel, pre)
    if cuntz_reduce(cand, s).max_deviation(p) > tol:
        return None
    return cand


def _parents(rel: UnitaryRelation, x: NormalWord, y: NormalWord):
    """Pairs ``(x', y')`` one level down whose lift can reach ``(x, y)``.

    The lift of ``(x', y')`` consists of ``(x'v, y'v)`` with ``d(v) = (1,1)``; for the
    permutation case ``x'`` and ``y'`` are obtained by peeling a trailing degree-(1,1)
    factor, and for a general unitary every word of the right degree is a candidate.
    """
    kx, lx = x.degree
    ky, ly = y.degree
    if rel.perm is not None:
        from .semigroup import factor
        out = []
        px = factor(rel.perm, x, "E" * (kx - 1) + "F" * (lx - 1) + "EF")
        py = factor(rel.perm, y, "E" * (ky - 1) + "F" * (ly - 1) + "EF")
        if px[-2:] == py[-2:]:
            xa = NormalWord(tuple(i for g, i in px[:-2] if g == "e"), tuple(j for g, j in px[:-2] if g == "f"))
            ya = NormalWord(tuple(i for g, i in py[:-2] if g == "e"), tuple(j for g, j in py[:-2] if g == "f"))
            out.append((xa, ya))
        return out
    return [(xa, ya) for xa in words_of_degree(rel.m, rel.n, kx - 1, lx - 1)
            for ya in words_of_degree(rel.m, rel.n, ky - 1, ly - 1)]


def lowest_level_form(p: StarPoly) -> StarPoly:
    """Lift to a common level, then lower as far as the quotient allows."""
    cur = cuntz_reduce(p, poly_level(p))
    while True:
        lower = lower_once(cur)
        if lower is None or lower is cur or not cur.terms:
            return cur
        cur = lower


def quotient_equal(p: StarPoly, q: StarPoly, tol: float = 1e-12) -> bool:
    """Equality after lifting both sides to a common level of the defect-free quotient."""
    level = max(poly_level(p), poly_level(q))
    return cuntz_reduce(p - q, level).is_zero(tol)


# --- gauge action and expectation -------------------------------------------------


def gauge(p: StarPoly, alpha: complex, beta: complex) -> StarPoly:
    if abs(abs(alpha) - 1) > 1e-12 or abs(abs(beta) - 1) > 1e-12:
        raise ValueError("gauge scalars must be unimodular")
    out = {}
    for (x, y), c in p.terms.items():
        a, b = net_degree(x, y)
        out[(x, y)] = c * complex(alpha) ** a * complex(beta) ** b
    return StarPoly(p.rel, out)


def expectation(p: StarPoly) -> StarPoly:
    return StarPoly(p.rel, {(x, y): c for (x, y), c in p.terms.items() if net_degree(x, y) == (0, 0)})


def gauge_average(p: StarPoly) -> StarPoly:
    """Average of ``gauge(p, a, b)`` over ``(D+1)``-th roots of unity, ``D`` the largest word degree."""
    order = p.max_degree() + 1
    roots = np.exp(2j * np.pi * np.arange(order) / order)
    total: dict = {}
    for a in roots:
        for b in roots:
            for key, c in gauge(p, a, b).terms.items():
                total[key] = total.get(key, 0.0) + c
    return StarPoly(p.rel, {k: c / order ** 2 for k, c in total.items()})


def unit_matrix(p: StarPoly, level: int) -> np.ndarray:
    """Coefficient matrix of a combination of level-``level`` matrix units ``x y*``."""
    rel = p.rel
    words = words_of_degree(rel.m, rel.n, level, level)
    pos = {w: k for k, w in enumerate(words)}
    out = np.zeros((len(words), len(words)), dtype=complex)
    for (x, y), c in p.terms.items():
        if x not in pos or y not in pos:
            raise ValueError(f"term ({x}, {y}) is not a level-{level} matrix unit")
        out[pos[x], pos[y]] = c
    return out


def from_unit_matrix(rel, mat: np.ndarray, level: int) -> StarPoly:
    rel = as_unitary(rel)
    words = words_of_degree(rel.m, rel.n, level, level)
    return StarPoly(rel, {(words[a], words[b]): mat[a, b] for a, b in zip(*np.nonzero(mat))})


# --- evaluation in a tail representation ----------------------------------------


def evaluate_tail(space, p: StarPoly, vec: dict) -> dict:
    """Apply ``p`` to a vector of :class:`~dilationlab.reps.TailSpace`."""
    out: dict = {}
    for (x, y), c in p.terms.items():
        img = space.apply_tokens(monomial_tokens(x, y), vec)
        for key, val in img.items():
            out[key] = out.get(key, 0.0) + c * val
    return {k: v for k, v in out.items() if abs(v) > PRUNE}


def evaluate_tokens(space, tokens: Sequence[Token], vec: dict) -> dict:
    return space.apply_tokens(tokens, vec)

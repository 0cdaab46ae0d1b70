"""Word arithmetic for the single-vertex rank-2 semigroups built from a permutation.

A permutation ``theta`` of ``{1..m} x {1..n}`` defines the relations
``e_i f_j = f_j' e_i'`` whenever ``theta(i, j) = (i', j')``.  Every element has a
unique e-first normal form ``e_u f_v`` which is what :class:`NormalWord` stores.
All generator indices are 1-based.
"""

from __future__ import annotations

import itertools
import json
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

E = "E"
F = "F"

# a raw generator is ("e", i) or ("f", j)
Letter = tuple[str, int]

MAX_CLASSIFY_PERMUTATIONS = 40320  # (m*n)! cap, i.e. m*n <= 8

_TOKEN = re.compile(r"^([ef])(\d+)$")


@dataclass(frozen=True)
class PermRelation:
    m: int
    n: int
    table: tuple[tuple[int, int], ...]  # theta(i, j) stored at index (i-1)*n + (j-1)
    _inverse: tuple[tuple[int, int], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError("m and n must be positive")
        if len(self.table) != self.m * self.n:
            raise ValueError(f"theta must list {self.m * self.n} images, got {len(self.table)}")
        images = [tuple(int(x) for x in t) for t in self.table]
        for i2, j2 in images:
            if not (1 <= i2 <= self.m and 1 <= j2 <= self.n):
                raise ValueError(f"theta image {(i2, j2)} out of range")
        if len(set(images)) != len(images):
            raise ValueError("theta is not a bijection")
        object.__setattr__(self, "table", tuple(images))
        inv = [None] * (self.m * self.n)
        for idx, (i2, j2) in enumerate(images):
            inv[(i2 - 1) * self.n + (j2 - 1)] = (idx // self.n + 1, idx % self.n + 1)
        object.__setattr__(self, "_inverse", tuple(inv))

    @classmethod
    def from_mapping(cls, m: int, n: int, mapping: dict) -> "PermRelation":
        table = []
        for i in range(1, m + 1):
            for j in range(1, n + 1):
                if (i, j) in mapping:
                    table.append(tuple(mapping[(i, j)]))
                else:
                    raise ValueError(f"theta undefined at {(i, j)}")
        return cls(m, n, tuple(table))

    @classmethod
    def from_cycles(cls, m: int, n: int, cycles: Iterable[Sequence[tuple[int, int]]]) -> "PermRelation":
        """Build theta from disjoint cycles, each sending an entry to the next one."""
        mapping = {(i, j): (i, j) for i in range(1, m + 1) for j in range(1, n + 1)}
        for cyc in cycles:
            cyc = [tuple(c) for c in cyc]
            for a, b in zip(cyc, cyc[1:] + cyc[:1]):
                mapping[a] = b
        return cls.from_mapping(m, n, mapping)

    @classmethod
    def identity(cls, m: int, n: int) -> "PermRelation":
        return cls.from_cycles(m, n, [])

    def theta(self, i: int, j: int) -> tuple[int, int]:
        self._check(i, j)
        return self.table[(i - 1) * self.n + (j - 1)]

    def theta_inv(self, i2: int, j2: int) -> tuple[int, int]:
        self._check(i2, j2)
        return self._inverse[(i2 - 1) * self.n + (j2 - 1)]

    def mapping(self) -> dict[tuple[int, int], tuple[int, int]]:
        return {(i, j): self.theta(i, j) for i in range(1, self.m + 1) for j in range(1, self.n + 1)}

    def _check(self, i: int, j: int) -> None:
        if not (1 <= i <= self.m):
            raise IndexError(f"e-index {i} out of range 1..{self.m}")
        if not (1 <= j <= self.n):
            raise IndexError(f"f-index {j} out of range 1..{self.n}")

    def to_json(self) -> dict:
        pairs = [[[i, j], list(self.theta(i, j))] for i in range(1, self.m + 1) for j in range(1, self.n + 1)]
        return {"m": self.m, "n": self.n, "theta": pairs}

    @classmethod
    def from_json(cls, data: dict) -> "PermRelation":
        m, n = int(data["m"]), int(data["n"])
        mapping = {}
        for src, dst in data["theta"]:
            key = (int(src[0]), int(src[1]))
            if key in mapping:
                raise ValueError(f"theta lists {key} twice")
            mapping[key] = (int(dst[0]), int(dst[1]))
        return cls.from_mapping(m, n, mapping)


def flip() -> PermRelation:
    """The flip relation: the 2-cycle ((1,2),(2,1)) with m = n = 2."""
    return PermRelation.from_cycles(2, 2, [[(1, 2), (2, 1)]])


def forward_3cycle() -> PermRelation:
    return PermRelation.from_cycles(2, 2, [[(1, 1), (1, 2), (2, 1)]])


def reverse_3cycle() -> PermRelation:
    return PermRelation.from_cycles(2, 2, [[(1, 1), (2, 1), (1, 2)]])


def load_relation(path) -> PermRelation:
    with open(path) as fh:
        return PermRelation.from_json(json.load(fh))


@dataclass(frozen=True, order=True)
class NormalWord:
    """The e-first word ``e_u f_v``; the empty word is the identity."""

    u: tuple[int, ...] = ()
    v: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "u", tuple(int(x) for x in self.u))
        object.__setattr__(self, "v", tuple(int(x) for x in self.v))

    @property
    def degree(self) -> tuple[int, int]:
        return (len(self.u), len(self.v))

    @property
    def length(self) -> int:
        return len(self.u) + len(self.v)

    def letters(self) -> list[Letter]:
        return [("e", i) for i in self.u] + [("f", j) for j in self.v]

    def __str__(self) -> str:
        return format_letters(self.letters())


EMPTY = NormalWord()


def parse_word(text: str) -> list[Letter]:
    """Parse ``"e1 f2"`` or ``"e1.f2"`` into raw letters; empty text is the identity."""
    letters = []
    for tok in re.split(r"[\s.]+", text.strip()):
        if not tok:
            continue
        mt = _TOKEN.match(tok)
        if mt is None:
            raise ValueError(f"bad generator token {tok!r}")
        letters.append((mt.group(1), int(mt.group(2))))
    return letters


def format_letters(letters: Sequence[Letter]) -> str:
    return " ".join(f"{g}{i}" for g, i in letters)


def commute_ef(rel: PermRelation, i: int, j: int) -> tuple[int, int]:
    """Return ``(j', i')`` with ``e_i f_j = f_j' e_i'``."""
    i2, j2 = rel.theta(i, j)
    return j2, i2


def _commute_fe(rel: PermRelation, j: int, i: int) -> tuple[int, int]:
    # f_j e_i = e_a f_b where theta(a, b) = (i, j)
    return rel.theta_inv(i, j)


def _check_letters(rel: PermRelation, letters: Iterable[Letter]) -> None:
    for g, k in letters:
        if g == "e":
            if not 1 <= k <= rel.m:
                raise IndexError(f"e-index {k} out of range 1..{rel.m}")
        elif g == "f":
            if not 1 <= k <= rel.n:
                raise IndexError(f"f-index {k} out of range 1..{rel.n}")
        else:
            raise ValueError(f"unknown generator {g!r}")


def normalize(rel: PermRelation, letters: Iterable[Letter] | str) -> NormalWord:
    if isinstance(letters, str):
        letters = parse_word(letters)
    letters = list(letters)
    _check_letters(rel, letters)
    u: list[int] = []
    v: list[int] = []
    for g, k in letters:
        if g == "f":
            v.append(k)
            continue
        # carry e_k leftwards through f_v, rightmost f first
        i = k
        for pos in range(len(v) - 1, -1, -1):
            i, v[pos] = _commute_fe(rel, v[pos], i)
        u.append(i)
    return NormalWord(tuple(u), tuple(v))


def to_f_first(rel: PermRelation, w: NormalWord) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Return ``(v', u')`` with ``e_u f_v = f_v' e_u'``."""
    u = list(w.u)
    vprime = []
    for j in w.v:
        for pos in range(len(u) - 1, -1, -1):
            j, u[pos] = commute_ef(rel, u[pos], j)
        vprime.append(j)
    return tuple(vprime), tuple(u)


def factor(rel: PermRelation, w: NormalWord, pattern: Sequence[str] | str) -> list[Letter]:
    """Factor ``w`` along an E/F pattern; the factorization is unique."""
    pattern = [p.upper() for p in pattern]
    if any(p not in (E, F) for p in pattern):
        raise ValueError(f"pattern letters must be E or F, got {pattern}")
    k, l = w.degree
    if pattern.count(E) != k or pattern.count(F) != l:
        raise ValueError(f"pattern {''.join(pattern)} does not match degree {(k, l)}")
    out: list[Letter] = []
    cur = w
    for p in pattern:
        if p == E:
            out.append(("e", cur.u[0]))
            cur = NormalWord(cur.u[1:], cur.v)
        else:
            vprime, uprime = to_f_first(rel, cur)
            out.append(("f", vprime[0]))
            cur = normalize(rel, [("f", j) for j in vprime[1:]] + [("e", i) for i in uprime])
    return out


def multiply(rel: PermRelation, w1: NormalWord, w2: NormalWord) -> NormalWord:
    return normalize(rel, w1.letters() + w2.letters())


def words_of_degree(m: int, n: int, k: int, l: int) -> list[NormalWord]:
    """All normal words of degree (k, l) in lexicographic order."""
    return [
        NormalWord(u, v)
        for u in itertools.product(range(1, m + 1), repeat=k)
        for v in itertools.product(range(1, n + 1), repeat=l)
    ]


# --- isomorphism classes -------------------------------------------------

def _relabel(rel: PermRelation, a: Sequence[int], b: Sequence[int]) -> tuple:
    # a, b are 0-based permutations of e- and f-labels
    m, n = rel.m, rel.n
    table = [None] * (m * n)
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            i2, j2 = rel.theta(i, j)
            table[a[i - 1] * n + b[j - 1]] = (a[i2 - 1] + 1, b[j2 - 1] + 1)
    return tuple(table)


def _swap_families(rel: PermRelation) -> PermRelation:
    # e'_a = f_a, f'_b = e_b turns theta into swap o theta^-1 o swap
    mapping = {}
    for i in range(1, rel.m + 1):
        for j in range(1, rel.n + 1):
            i2, j2 = rel.theta_inv(i, j)
            mapping[(j, i)] = (j2, i2)
    return PermRelation.from_mapping(rel.n, rel.m, mapping)


def orbit(rel: PermRelation) -> set[tuple]:
    """Tables of every relation isomorphic to ``rel`` under the allowed relabelings."""
    variants = [rel]
    if rel.m == rel.n:
        variants.append(_swap_families(rel))
    tables = set()
    for r in variants:
        for a in itertools.permutations(range(r.m)):
            for b in itertools.permutations(range(r.n)):
                tables.add(_relabel(r, a, b))
    return tables


def is_isomorphic(r1: PermRelation, r2: PermRelation) -> bool:
    if (r1.m, r1.n) not in ((r2.m, r2.n), (r2.n, r2.m)):
        return False
    if (r1.m, r1.n) != (r2.m, r2.n):
        # only the family swap can exchange sizes
        return _swap_families(r1).table in orbit(r2)
    return r1.table in orbit(r2)


def all_relations(m: int, n: int) -> list[PermRelation]:
    cells = [(i, j) for i in range(1, m + 1) for j in range(1, n + 1)]
    return [PermRelation(m, n, p) for p in itertools.permutations(cells)]


def classify(m: int, n: int) -> list[list[PermRelation]]:
    """Partition all permutations of m x n into semigroup isomorphism classes.

    Classes are sorted by their canonical representative, the lexicographically
    least table, which is always the first member of its class.
    """
    if math.factorial(m * n) > MAX_CLASSIFY_PERMUTATIONS:
        raise ValueError(f"(m*n)! = {math.factorial(m * n)} permutations exceeds the limit "
                         f"{MAX_CLASSIFY_PERMUTATIONS}")
    seen: set[tuple] = set()
    classes = []
    for rel in all_relations(m, n):
        if rel.table in seen:
            continue
        tables = orbit(rel)
        seen |= tables
        classes.append([PermRelation(m, n, t) for t in tables])
    for c in classes:
        c.sort(key=lambda r: r.table)
    classes.sort(key=lambda c: c[0].table)
    return classes

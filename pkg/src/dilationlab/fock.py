"""Degree-truncated Fock space of the product system and the left regular representation.

Basis vectors are ``xi_{e_u f_v}`` with ``|u| <= K`` and ``|v| <= L``.  They are
ordered block by block, blocks ``(k, l)`` in lexicographic order, and inside a
block by ``u`` then ``v`` lexicographically.  Because every block is a full tensor
power, the position of ``e_u f_v`` is plain arithmetic:

    offset(k, l) + rank(u) * n**l + rank(v)

with ``rank`` the base-``m`` (resp. base-``n``) value of the 0-based digits.

Creation operators annihilate vectors whose image would leave the cutoff, so
the truncated space is co-invariant and every compression norm is a lower
bound for the true norm.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .numkernel import cmatrix, opnorm
from .semigroup import NormalWord, parse_word
from .urelations import UnitaryRelation, as_unitary, normal_terms, swap_axes

MAX_BASIS = 200_000


def max_basis() -> int:
    env = os.environ.get("DILATIONLAB_MAX_BASIS")
    if env:
        value = int(env)
        if value <= 0:
            raise ValueError("DILATIONLAB_MAX_BASIS must be positive")
        return value
    return MAX_BASIS


def basis_size(m: int, n: int, K: int, L: int) -> int:
    return sum(m ** k for k in range(K + 1)) * sum(n ** l for l in range(L + 1))


def _rank(digits: Sequence[int], base: int) -> int:
    r = 0
    for d in digits:
        r = r * base + (d - 1)
    return r


def _digits(r: int, base: int, length: int) -> tuple[int, ...]:
    out = []
    for _ in range(length):
        r, d = divmod(r, base)
        out.append(d + 1)
    return tuple(reversed(out))


def _move_f_through_e(rel: UnitaryRelation, k: int) -> np.ndarray:
    """Array ``M[j, r, c]``: ``f_j (x) e_u`` (``r = rank(u)``) in the e-first basis,
    with ``c = rank(u') * n + (j' - 1)``."""
    m, n = rel.m, rel.n
    size = n * m ** k
    data = np.eye(size, dtype=complex).reshape((n, m ** k, n) + (m,) * k)
    for p in range(k):
        data = swap_axes(rel, data, 2 + p, "FE")
    return data.reshape(n, m ** k, m ** k * n)


@dataclass(frozen=True, eq=False)
class TruncFock:
    rel: UnitaryRelation
    K: int
    L: int
    offsets: dict = field(repr=False)
    dim: int = 0
    creation_e: tuple = field(default=(), repr=False)
    creation_f: tuple = field(default=(), repr=False)

    @property
    def cutoff(self) -> tuple[int, int]:
        return (self.K, self.L)

    @property
    def m(self) -> int:
        return self.rel.m

    @property
    def n(self) -> int:
        return self.rel.n

    def index(self, word: NormalWord) -> int:
        k, l = word.degree
        if k > self.K or l > self.L:
            raise KeyError(f"word {word} lies outside cutoff {self.cutoff}")
        return self.offsets[(k, l)] + _rank(word.u, self.m) * self.n ** l + _rank(word.v, self.n)

    def word(self, idx: int) -> NormalWord:
        if not 0 <= idx < self.dim:
            raise IndexError(idx)
        for (k, l), start in self.offsets.items():
            size = self.m ** k * self.n ** l
            if start <= idx < start + size:
                ru, rv = divmod(idx - start, self.n ** l)
                return NormalWord(_digits(ru, self.m, k), _digits(rv, self.n, l))
        raise IndexError(idx)

    @property
    def basis(self) -> list[NormalWord]:
        return [self.word(i) for i in range(self.dim)]

    def degrees(self) -> np.ndarray:
        """``(dim, 2)`` array of basis degrees."""
        out = np.zeros((self.dim, 2), dtype=int)
        for (k, l), start in self.offsets.items():
            out[start:start + self.m ** k * self.n ** l] = (k, l)
        return out

    def interior_mask(self, dk: int = 1, dl: int = 1) -> np.ndarray:
        """Basis vectors with degree at most ``(K - dk, L - dl)``."""
        deg = self.degrees()
        return (deg[:, 0] <= self.K - dk) & (deg[:, 1] <= self.L - dl)

    def vector(self, word: NormalWord) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.index(word)] = 1.0
        return v

    def letter_op(self, kind: str, idx: int) -> sp.csr_matrix:
        return self.creation_e[idx - 1] if kind == "e" else self.creation_f[idx - 1]

    def word_op(self, word: NormalWord) -> sp.csr_matrix:
        """``lambda(e_u f_v)``, i.e. the product of creations in word order."""
        op = sp.identity(self.dim, dtype=complex, format="csr")
        for kind, idx in reversed(word.letters()):
            op = self.letter_op(kind, idx) @ op
        return op.tocsr()


def build_fock(rel, K: int, L: int, limit: int | None = None) -> TruncFock:
    rel = as_unitary(rel)
    if K < 0 or L < 0:
        raise ValueError("cutoffs must be nonnegative")
    m, n = rel.m, rel.n
    limit = max_basis() if limit is None else limit
    dim = basis_size(m, n, K, L)
    if dim > limit:
        raise ValueError(f"basis size {dim} exceeds limit {limit}")
    offsets = {}
    pos = 0
    for k in range(K + 1):
        for l in range(L + 1):
            offsets[(k, l)] = pos
            pos += m ** k * n ** l

    e_ops = []
    for i in range(1, m + 1):
        rows, cols = [], []
        for k in range(K):
            for l in range(L + 1):
                src = np.arange(m ** k * n ** l)
                ru, rv = np.divmod(src, n ** l)
                dst = offsets[(k + 1, l)] + ((i - 1) * m ** k + ru) * n ** l + rv
                rows.append(dst)
                cols.append(offsets[(k, l)] + src)
        e_ops.append(_csr(dim, rows, cols, None))

    f_ops = []
    moves = {k: _move_f_through_e(rel, k) for k in range(K + 1)} if L > 0 else {}
    for j in range(1, n + 1):
        rows, cols, vals = [], [], []
        for k in moves:
            mat = moves[k][j - 1]
            r_idx, c_idx = np.nonzero(np.abs(mat) > 0)
            coef = mat[r_idx, c_idx]
            for l in range(L):
                rv = np.arange(n ** l)
                src = offsets[(k, l)] + r_idx[:, None] * n ** l + rv[None, :]
                # c = rank(u') * n + (j'-1), and f_{j'} f_v has rank (j'-1) * n**l + rank(v)
                up, jp = np.divmod(c_idx, n)
                dst = offsets[(k, l + 1)] + (up[:, None] * n + jp[:, None]) * n ** l + rv[None, :]
                rows.append(dst.ravel())
                cols.append(src.ravel())
                vals.append(np.repeat(coef, n ** l))
        f_ops.append(_csr(dim, rows, cols, vals))
    return TruncFock(rel, K, L, offsets, dim, tuple(e_ops), tuple(f_ops))


def _csr(dim, rows, cols, vals) -> sp.csr_matrix:
    if not rows:
        return sp.csr_matrix((dim, dim), dtype=complex)
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    v = np.ones(r.size, dtype=complex) if vals is None else np.concatenate(vals)
    return sp.csr_matrix((v, (r, c)), shape=(dim, dim), dtype=complex)


@dataclass(frozen=True, eq=False)
class MatPoly:
    """``sum coeff_t (x) word_t`` with all coefficient blocks of one shape."""

    terms: tuple

    def __post_init__(self):
        terms = tuple((cmatrix(c), w) for c, w in self.terms)
        if not terms:
            raise ValueError("MatPoly needs at least one term")
        shape = terms[0][0].shape
        if any(c.shape != shape for c, _ in terms):
            raise ValueError("coefficient blocks differ in shape")
        words = [w for _, w in terms]
        if len(set(words)) != len(words):
            raise ValueError("repeated word in MatPoly")
        object.__setattr__(self, "terms", terms)

    @property
    def shape(self) -> tuple[int, int]:
        return self.terms[0][0].shape

    @property
    def max_degree(self) -> tuple[int, int]:
        return (max(w.degree[0] for _, w in self.terms), max(w.degree[1] for _, w in self.terms))

    @classmethod
    def scalar(cls, pairs) -> "MatPoly":
        """From ``[(complex, NormalWord), ...]``."""
        return cls(tuple((np.array([[c]], dtype=complex), w) for c, w in pairs))

    @classmethod
    def from_json(cls, data, rel=None) -> "MatPoly":
        """Parse the list-of-terms schema.

        Words are raw generator text.  With a relation they are normalized (and for a
        general unitary expanded into e-first words); without one they must already
        be written with all e's first.
        """
        acc: dict[NormalWord, np.ndarray] = {}
        order = []
        for item in data:
            coeff = np.array([[complex(re_, im) for re_, im in row] for row in item["coeff"]])
            letters = parse_word(item["word"])
            if rel is None:
                expanded = [(_as_normal(letters), 1.0)]
            else:
                expanded = normal_terms(as_unitary(rel), letters)
            for w, c in expanded:
                if w not in acc:
                    acc[w] = np.zeros_like(coeff)
                    order.append(w)
                acc[w] = acc[w] + c * coeff
        return cls(tuple((acc[w], w) for w in order))

    def to_json(self) -> list:
        return [{"coeff": [[[float(z.real), float(z.imag)] for z in row] for row in c], "word": str(w)}
                for c, w in self.terms]


def _as_normal(letters) -> NormalWord:
    kinds = [g for g, _ in letters]
    if "e" in kinds and "f" in kinds and kinds.index("f") < len(kinds) - kinds[::-1].index("e") - 1:
        raise ValueError("word is not in e-first form; supply the relation")
    return NormalWord(tuple(i for g, i in letters if g == "e"), tuple(j for g, j in letters if g == "f"))


def load_poly(path, rel=None) -> MatPoly:
    with open(path) as fh:
        return MatPoly.from_json(json.load(fh), rel)


def apply_poly(fk: TruncFock, x: MatPoly) -> sp.csr_matrix:
    """``sum_t coeff_t (x) lambda(word_t)``; block row index is the coefficient row."""
    K, L = x.max_degree
    if K > fk.K or L > fk.L:
        raise ValueError(f"polynomial degree {(K, L)} exceeds cutoff {fk.cutoff}")
    total = None
    for coeff, word in x.terms:
        term = sp.kron(sp.csr_matrix(coeff), fk.word_op(word), format="csr")
        total = term if total is None else total + term
    return total.tocsr()


def norm_lower_seq(rel, x: MatPoly, max_cutoff: int, start: int = 1) -> list[float]:
    """Compression norms of ``lambda(x)`` at cutoffs ``(c, c)``, ``c = start..max_cutoff``."""
    rel = as_unitary(rel)
    k, l = x.max_degree
    if max(k, l) > start:
        raise ValueError(f"polynomial degree {(k, l)} exceeds the smallest cutoff {start}")
    return [opnorm(apply_poly(build_fock(rel, c, c), x)) for c in range(start, max_cutoff + 1)]


def boundary_projections(fk: TruncFock) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """``P = I - sum L_ei L_ei*`` and ``Q = I - sum L_fj L_fj*`` on the truncated space.

    The ranges of the truncated creations still fill every block with ``k >= 1``
    (resp. ``l >= 1``), so ``P`` and ``Q`` are exactly the projections onto
    ``span{xi_{f_v}}`` and ``span{xi_{e_u}}``.
    """
    eye = sp.identity(fk.dim, dtype=complex, format="csr")
    p = eye - sum((a @ a.conj().T for a in fk.creation_e), sp.csr_matrix((fk.dim, fk.dim), dtype=complex))
    q = eye - sum((b @ b.conj().T for b in fk.creation_f), sp.csr_matrix((fk.dim, fk.dim), dtype=complex))
    p.eliminate_zeros()
    q.eliminate_zeros()
    return p.tocsr(), q.tocsr()


def pure_word_counts(fk: TruncFock) -> tuple[int, int]:
    """Number of pure-f and pure-e basis words, used as trace oracles for P and Q."""
    return sum(fk.n ** l for l in range(fk.L + 1)), sum(fk.m ** k for k in range(fk.K + 1))

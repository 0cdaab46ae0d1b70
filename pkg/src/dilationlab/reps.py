"""Concrete representations: finite matrix reps, atomic (graph) reps and tail representations.

A representation sends ``e_i`` to ``E[i-1]`` and ``f_j`` to ``F[j-1]``; in the
matrix form every generator is a ``d x d`` complex matrix.  Atomic
representations permute a basis up to unimodular scalars and are stored as
labelled directed graphs.

In DOT output e-edges are solid and f-edges are doubled (``color="black:black"``).
"""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .numkernel import cmatrix, opnorm, orth
from .semigroup import E, F, NormalWord, PermRelation, words_of_degree
from .urelations import (PRUNE, TensorCoeffs, UnitaryRelation, as_unitary, from_perm,
                         pattern_transform)

TAU_REL = 1e-9


def matrix_to_json(a: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(a)]


def matrix_from_json(rows) -> np.ndarray:
    if len(rows) == 0:
        raise ValueError("empty matrix")
    return cmatrix([[complex(re_, im) for re_, im in row] for row in rows])


def relation_to_json(rel: UnitaryRelation) -> dict:
    return rel.perm.to_json() if rel.perm is not None else rel.to_json()


# --- finite matrix representations ------------------------------------------


@dataclass(frozen=True, eq=False)
class FiniteRep:
    rel: UnitaryRelation
    E: tuple
    F: tuple
    tol: float = TAU_REL

    def __post_init__(self):
        rel = as_unitary(self.rel)
        object.__setattr__(self, "rel", rel)
        e = tuple(cmatrix(a) for a in self.E)
        f = tuple(cmatrix(b) for b in self.F)
        if len(e) != rel.m or len(f) != rel.n:
            raise ValueError(f"need {rel.m} e-matrices and {rel.n} f-matrices, got {len(e)} and {len(f)}")
        d = e[0].shape[0]
        for a in e + f:
            if a.shape != (d, d):
                raise ValueError(f"generator matrices must all be {d}x{d}, got {a.shape}")
        object.__setattr__(self, "E", e)
        object.__setattr__(self, "F", f)
        resid = commutation_residual(self)
        if resid > self.tol:
            warnings.warn(f"commutation residual {resid:.3e} exceeds {self.tol:.1e}", stacklevel=2)

    @property
    def d(self) -> int:
        return self.E[0].shape[0]

    @property
    def m(self) -> int:
        return self.rel.m

    @property
    def n(self) -> int:
        return self.rel.n

    def letter(self, kind: str, idx: int) -> np.ndarray:
        return self.E[idx - 1] if kind == "e" else self.F[idx - 1]

    def word(self, word: NormalWord | Sequence) -> np.ndarray:
        letters = word.letters() if isinstance(word, NormalWord) else list(word)
        out = np.eye(self.d, dtype=complex)
        for kind, idx in letters:
            out = out @ self.letter(kind, idx)
        return out

    def to_json(self) -> dict:
        return {"rel": relation_to_json(self.rel), "d": self.d,
                "E": [matrix_to_json(a) for a in self.E], "F": [matrix_to_json(b) for b in self.F]}

    @classmethod
    def from_json(cls, data: dict, tol: float = TAU_REL) -> "FiniteRep":
        rel = UnitaryRelation.from_json(data["rel"])
        rep = cls(rel, [matrix_from_json(a) for a in data["E"]], [matrix_from_json(b) for b in data["F"]], tol)
        if "d" in data and int(data["d"]) != rep.d:
            raise ValueError(f"declared d={data['d']} but matrices are {rep.d}x{rep.d}")
        return rep


def load_rep(path) -> FiniteRep:
    with open(path) as fh:
        return FiniteRep.from_json(json.load(fh))


def commutation_residual(rep: FiniteRep) -> float:
    rel = rep.rel
    worst = 0.0
    for i in range(rel.m):
        for j in range(rel.n):
            rhs = sum(rel.u[i * rel.n + j, a * rel.n + b] * (rep.F[b] @ rep.E[a])
                      for a in range(rel.m) for b in range(rel.n))
            worst = max(worst, opnorm(rep.E[i] @ rep.F[j] - rhs))
    return worst


def _row_gram_residual(mats: Sequence[np.ndarray]) -> float:
    row = np.hstack(mats)
    return opnorm(row.conj().T @ row - np.eye(row.shape[1]))


@dataclass(frozen=True)
class ValidationReport:
    d: int
    commutation_residual: float
    row_norm_e: float
    row_norm_f: float
    defect_residual_e: float
    defect_residual_f: float
    row_isometry_residual_e: float
    row_isometry_residual_f: float
    partial_isometry_residual: float
    row_contractive: bool
    partially_isometric: bool
    defect_free: bool
    row_isometric: bool
    row_isometry_possible: bool
    tol: float

    @property
    def is_representation(self) -> bool:
        return self.commutation_residual <= self.tol

    def to_json(self) -> dict:
        out = dict(self.__dict__)
        out["is_representation"] = self.is_representation
        return out


def validate(rep: FiniteRep, tol: float = TAU_REL) -> ValidationReport:
    """Numerical checks of the relation, row norms, defect and isometry conditions.

    A row isometry ``[X_1 ... X_p]`` on ``C^d`` needs ``p*d <= d``, so for ``m >= 2``
    or ``n >= 2`` no finite-dimensional representation is row isometric;
    ``row_isometry_possible`` records that count.
    """
    d = rep.d
    eye = np.eye(d)
    row_e = opnorm(np.hstack(rep.E))
    row_f = opnorm(np.hstack(rep.F))
    de = opnorm(sum(a @ a.conj().T for a in rep.E) - eye)
    df = opnorm(sum(b @ b.conj().T for b in rep.F) - eye)
    ie = _row_gram_residual(rep.E)
    if_ = _row_gram_residual(rep.F)
    pi = max(opnorm(x @ x.conj().T @ x - x) for x in rep.E + rep.F)
    return ValidationReport(
        d=d,
        commutation_residual=commutation_residual(rep),
        row_norm_e=row_e,
        row_norm_f=row_f,
        defect_residual_e=de,
        defect_residual_f=df,
        row_isometry_residual_e=ie,
        row_isometry_residual_f=if_,
        partial_isometry_residual=pi,
        row_contractive=row_e <= 1 + tol and row_f <= 1 + tol,
        partially_isometric=pi <= tol,
        defect_free=de <= tol and df <= tol,
        row_isometric=ie <= tol and if_ <= tol,
        row_isometry_possible=rep.m == 1 and rep.n == 1,
        tol=tol,
    )


def perturb(rep: FiniteRep, eps: float, rng: np.random.Generator) -> FiniteRep:
    """Scale the whole representation by ``1 - eps``.

    The relation survives exactly while the defect sums become ``(1-eps)^2 I``, which
    gives a controlled departure from defect freeness.  A random unitary
    conjugation keeps the input generic.
    """
    d = rep.d
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, _ = np.linalg.qr(z)
    s = 1.0 - eps
    return FiniteRep(rep.rel, [s * q @ a @ q.conj().T for a in rep.E], [s * q @ b @ q.conj().T for b in rep.F], rep.tol)


# --- atomic representations ---------------------------------------------------


Edge = tuple  # (target vertex, complex scalar)


@dataclass(frozen=True, eq=False)
class AtomicRep:
    """Scaled partial permutations of a vertex basis.

    ``e_edges[i-1]`` maps a source vertex to ``(target, scalar)``; a missing key means
    the generator annihilates that vertex.
    """

    rel: PermRelation
    vertices: tuple
    e_edges: tuple
    f_edges: tuple
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        verts = tuple(self.vertices)
        if len(set(verts)) != len(verts):
            raise ValueError("duplicate vertex names")
        vset = set(verts)
        e = tuple(dict(x) for x in self.e_edges)
        f = tuple(dict(x) for x in self.f_edges)
        if len(e) != self.rel.m or len(f) != self.rel.n:
            raise ValueError("wrong number of edge maps")
        for kind, maps in (("e", e), ("f", f)):
            for idx, mp in enumerate(maps, 1):
                targets = set()
                for src, (dst, c) in mp.items():
                    if src not in vset or dst not in vset:
                        raise ValueError(f"{kind}{idx} edge {src}->{dst} uses an unknown vertex")
                    if abs(abs(c) - 1) > 1e-12:
                        raise ValueError(f"{kind}{idx} edge {src}->{dst} has non-unimodular scalar {c}")
                    if dst in targets:
                        raise ValueError(f"{kind}{idx} is not injective at target {dst}")
                    targets.add(dst)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "e_edges", e)
        object.__setattr__(self, "f_edges", f)

    def edge(self, kind: str, idx: int, x) -> Edge | None:
        maps = self.e_edges if kind == "e" else self.f_edges
        return maps[idx - 1].get(x)

    def walk(self, x, letters: Sequence) -> Edge | None:
        """Apply a raw word (rightmost letter first) to vertex ``x``."""
        c = 1.0 + 0j
        for kind, idx in reversed(list(letters)):
            hit = self.edge(kind, idx, x)
            if hit is None:
                return None
            x, s = hit
            c *= s
        return (x, c)

    def to_json(self) -> dict:
        def edges(maps):
            return [[[src, dst, [float(c.real), float(c.imag)]] for src, (dst, c) in mp.items()] for mp in maps]
        out = {"rel": self.rel.to_json(), "vertices": list(self.vertices),
               "e": edges(self.e_edges), "f": edges(self.f_edges)}
        if self.labels:
            out["labels"] = {str(k): v for k, v in self.labels.items()}
        return out

    @classmethod
    def from_json(cls, data: dict) -> "AtomicRep":
        rel = PermRelation.from_json(data["rel"])

        def key(x):
            return tuple(x) if isinstance(x, list) else x

        def edges(raw):
            return [{key(src): (key(dst), complex(c[0], c[1])) for src, dst, c in mp} for mp in raw]
        verts = [key(x) for x in data["vertices"]]
        labels = {key(k) if not isinstance(k, str) else k: v for k, v in data.get("labels", {}).items()}
        return cls(rel, tuple(verts), tuple(edges(data["e"])), tuple(edges(data["f"])), labels)


def load_atomic(path) -> AtomicRep:
    with open(path) as fh:
        return AtomicRep.from_json(json.load(fh))


def commutation_violations(a: AtomicRep, vertices: Iterable | None = None) -> list[tuple]:
    """Vertices where ``e_i f_j`` and ``f_j' e_i'`` differ, with ``theta(i,j) = (i',j')``."""
    rel = a.rel
    bad = []
    for x in (a.vertices if vertices is None else vertices):
        for i in range(1, rel.m + 1):
            for j in range(1, rel.n + 1):
                i2, j2 = rel.theta(i, j)
                lhs = a.walk(x, [("e", i), ("f", j)])
                rhs = a.walk(x, [("f", j2), ("e", i2)])
                if lhs is None and rhs is None:
                    continue
                if lhs is None or rhs is None or lhs[0] != rhs[0] or abs(lhs[1] - rhs[1]) > 1e-12:
                    bad.append((x, i, j, lhs, rhs))
    return bad


def in_degrees(a: AtomicRep) -> dict:
    """Vertex -> (incoming e-edges, incoming f-edges), all colours counted together."""
    deg = {x: [0, 0] for x in a.vertices}
    for mp in a.e_edges:
        for dst, _ in mp.values():
            deg[dst][0] += 1
    for mp in a.f_edges:
        for dst, _ in mp.values():
            deg[dst][1] += 1
    return {x: tuple(v) for x, v in deg.items()}


def graph_defect_free(a: AtomicRep, vertices: Iterable | None = None) -> bool:
    deg = in_degrees(a)
    return all(deg[x] == (1, 1) for x in (a.vertices if vertices is None else vertices))


def atomic_to_matrices(a: AtomicRep, tol: float = TAU_REL) -> FiniteRep:
    pos = {x: k for k, x in enumerate(a.vertices)}
    d = len(pos)

    def mat(mp):
        out = np.zeros((d, d), dtype=complex)
        for src, (dst, c) in mp.items():
            out[pos[dst], pos[src]] = c
        return out
    return FiniteRep(from_perm(a.rel), [mat(mp) for mp in a.e_edges], [mat(mp) for mp in a.f_edges], tol)


def to_dot(a: AtomicRep, name: str = "atomic") -> str:
    """DOT text: e-edges solid, f-edges doubled, both labelled by generator index."""
    ids = {x: f"v{k}" for k, x in enumerate(a.vertices)}
    lines = [f"digraph {name} {{"]
    for x in a.vertices:
        label = a.labels.get(x, str(x))
        lines.append(f'  {ids[x]} [label="{label}"];')

    def scalar(c):
        return "" if abs(c - 1) < 1e-12 else f" ({c.real:.12g}{c.imag:+.12g}i)"
    for i, mp in enumerate(a.e_edges, 1):
        for src, (dst, c) in mp.items():
            lines.append(f'  {ids[src]} -> {ids[dst]} [label="e{i}{scalar(c)}"];')
    for j, mp in enumerate(a.f_edges, 1):
        for src, (dst, c) in mp.items():
            lines.append(f'  {ids[src]} -> {ids[dst]} [label="f{j}{scalar(c)}", color="black:black"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def single_vertex(rel: PermRelation, i0: int, j0: int) -> AtomicRep:
    """One vertex with loops ``e_{i0}`` and ``f_{j0}``; needs ``theta(i0,j0) = (i0,j0)``."""
    e = [dict() for _ in range(rel.m)]
    f = [dict() for _ in range(rel.n)]
    e[i0 - 1][0] = (0, 1.0 + 0j)
    f[j0 - 1][0] = (0, 1.0 + 0j)
    return AtomicRep(rel, (0,), tuple(e), tuple(f))


def random_defect_free_atomic(rel: PermRelation, d: int, rng: np.random.Generator,
                              attempts: int = 200) -> AtomicRep:
    """A random defect-free atomic representation on ``d`` vertices.

    Each vertex gets one outgoing e-edge and one outgoing f-edge; the underlying
    vertex maps are commuting permutations ``P_e``, ``P_f`` and the colours are found
    by a randomized search over the commutation constraint.  Scalars come from a
    random diagonal gauge plus global phases, so the scalar cocycle condition
    holds automatically.
    """
    for _ in range(attempts):
        pe, pf = _commuting_pair(d, rng)
        labels = _search_labels(rel, pe, pf, rng)
        if labels is None:
            continue
        le, lf = labels
        g = np.exp(2j * np.pi * rng.random(d))
        alpha, beta = np.exp(2j * np.pi * rng.random(2))
        e = [dict() for _ in range(rel.m)]
        f = [dict() for _ in range(rel.n)]
        for x in range(d):
            e[le[x] - 1][x] = (int(pe[x]), complex(alpha * g[pe[x]] / g[x]))
            f[lf[x] - 1][x] = (int(pf[x]), complex(beta * g[pf[x]] / g[x]))
        return AtomicRep(rel, tuple(range(d)), tuple(e), tuple(f))
    raise RuntimeError("no defect-free colouring found")


def _commuting_pair(d: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Two commuting permutations of ``range(d)``: powers of one permutation, or two
    coordinate shifts on ``Z_a x Z_b`` with ``ab = d``, conjugated by a random relabelling."""
    splits = [(a, d // a) for a in range(2, d) if d % a == 0]
    if splits and rng.random() < 0.5:
        a, b = splits[int(rng.integers(len(splits)))]
        grid = np.arange(d).reshape(a, b)
        pe = np.array([grid[(x // b + 1) % a, x % b] for x in range(d)])
        pf = np.array([grid[x // b, (x % b + 1) % b] for x in range(d)])
    else:
        pe = rng.permutation(d)
        pf = np.arange(d)
        for _ in range(int(rng.integers(0, d + 1))):
            pf = pe[pf]
    relabel = rng.permutation(d)
    inv = np.argsort(relabel)
    # conjugate: x -> relabel[p[inv[x]]]
    return relabel[pe[inv]], relabel[pf[inv]]


def _search_labels(rel, pe, pf, rng, budget: int = 4000):
    d = len(pe)
    choices = list(itertools.product(range(1, rel.m + 1), range(1, rel.n + 1)))

    def ok(le, lf):
        for x in range(d):
            if rel.theta(le[pf[x]], lf[x]) != (le[x], lf[pe[x]]):
                return False
        return True
    for _ in range(budget):
        picks = [choices[k] for k in rng.integers(0, len(choices), size=d)]
        le = [p[0] for p in picks]
        lf = [p[1] for p in picks]
        if ok(le, lf):
            return le, lf
    # fall back to constant colourings on a fixed point of theta
    fixed = [(i, j) for i, j in choices if rel.theta(i, j) == (i, j)]
    if fixed:
        i, j = fixed[int(rng.integers(len(fixed)))]
        return [i] * d, [j] * d
    return None


# --- tail representations -----------------------------------------------------


@dataclass(frozen=True)
class Tail:
    prefix: tuple = ()
    cycle: tuple = ((1, 1),)

    def __post_init__(self):
        if not self.cycle:
            raise ValueError("tail cycle must be nonempty")
        object.__setattr__(self, "prefix", tuple((int(i), int(j)) for i, j in self.prefix))
        object.__setattr__(self, "cycle", tuple((int(i), int(j)) for i, j in self.cycle))

    def block(self, s: int) -> tuple[int, int]:
        if s < len(self.prefix):
            return self.prefix[s]
        return self.cycle[(s - len(self.prefix)) % len(self.cycle)]

    @classmethod
    def parse(cls, prefix: str, cycle: str) -> "Tail":
        """Blocks written as ``"1,1 2,1"`` (pairs ``i,j`` separated by spaces)."""
        def blocks(text):
            return tuple(tuple(int(x) for x in tok.split(",")) for tok in text.split())
        return cls(blocks(prefix), blocks(cycle))

    def to_json(self) -> dict:
        return {"prefix": [list(b) for b in self.prefix], "cycle": [list(b) for b in self.cycle]}


class TailSpace:
    """Exact arithmetic in the inductive-limit space of a tail representation.

    Vectors are dicts ``{(s, u, v): coeff}`` meaning ``sum coeff * iota_s(xi_{e_u f_v})``.
    Lifting ``iota_s(xi) = iota_{s+1}(xi (x) e_{i_s} f_{j_s})`` is applied on demand, so
    every operation is exact: no truncation is ever involved.
    """

    def __init__(self, rel, tail: Tail):
        self.rel = as_unitary(rel)
        self.tail = tail
        for i, j in itertools.chain(tail.prefix, tail.cycle):
            if not (1 <= i <= self.rel.m and 1 <= j <= self.rel.n):
                raise ValueError(f"tail block {(i, j)} out of range")
        self._f_cache: dict = {}
        self._lift_cache: dict = {}
        self._fstar_cache: dict = {}

    # single-word moves, cached

    def _terms(self, letters, k: int):
        """e-first expansion of a raw letter sequence with ``k`` e's."""
        src = TensorCoeffs.basis(self.rel, letters)
        l = len(letters) - k
        dst = pattern_transform(self.rel, src, (E,) * k + (F,) * l).data
        idx = np.argwhere(np.abs(dst) > PRUNE)
        return tuple((tuple(int(x) + 1 for x in r[:k]), tuple(int(x) + 1 for x in r[k:]), complex(dst[tuple(r)]))
                     for r in idx)

    def f_through_e(self, j: int, u: tuple):
        key = (j, u)
        if key not in self._f_cache:
            self._f_cache[key] = self._terms([("f", j)] + [("e", i) for i in u], len(u))
        return self._f_cache[key]

    def e_through_f(self, v: tuple, i: int):
        key = (v, i)
        if key not in self._lift_cache:
            self._lift_cache[key] = self._terms([("f", j) for j in v] + [("e", i)], 1)
        return self._lift_cache[key]

    def strip_f(self, j: int, u: tuple, v: tuple):
        """``L_{f_j}^* xi_{e_u f_v}`` for ``|v| >= 1`` as e-first terms."""
        key = (j, u, v)
        if key not in self._fstar_cache:
            k, l = len(u), len(v)
            src = TensorCoeffs.basis(self.rel, [("e", i) for i in u] + [("f", b) for b in v])
            ffirst = pattern_transform(self.rel, src, (F,) * l + (E,) * k)
            rest = TensorCoeffs((F,) * (l - 1) + (E,) * k, ffirst.data[j - 1])
            dst = pattern_transform(self.rel, rest, (E,) * k + (F,) * (l - 1)).data
            idx = np.argwhere(np.abs(dst) > PRUNE)
            self._fstar_cache[key] = tuple(
                (tuple(int(x) + 1 for x in r[:k]), tuple(int(x) + 1 for x in r[k:]), complex(dst[tuple(r)]))
                for r in idx)
        return self._fstar_cache[key]

    # vector operations

    @staticmethod
    def basis_vector(s: int, word: NormalWord) -> dict:
        return {(s, word.u, word.v): 1.0 + 0j}

    @staticmethod
    def _add(out: dict, key, c: complex) -> None:
        val = out.get(key, 0.0) + c
        if abs(val) > PRUNE:
            out[key] = val
        else:
            out.pop(key, None)

    def lift_key(self, s: int, u: tuple, v: tuple) -> dict:
        i_s, j_s = self.tail.block(s)
        out: dict = {}
        for (ip,), vp, c in self.e_through_f(v, i_s):
            self._add(out, (s + 1, u + (ip,), vp + (j_s,)), c)
        return out

    def lift(self, vec: dict, level: int) -> dict:
        """Rewrite every term at a level below ``level`` as a level-``level`` combination."""
        out: dict = {}
        for (s, u, v), c in vec.items():
            if s > level:
                raise ValueError(f"cannot lower level {s} to {level}")
            part = {(s, u, v): c}
            for t in range(s, level):
                nxt: dict = {}
                for (t_, uu, vv), cc in part.items():
                    for key, c2 in self.lift_key(t_, uu, vv).items():
                        self._add(nxt, key, cc * c2)
                part = nxt
            for key, cc in part.items():
                self._add(out, key, cc)
        return out

    def apply(self, kind: str, idx: int, vec: dict, star: bool = False) -> dict:
        out: dict = {}
        if not star:
            for (s, u, v), c in vec.items():
                if kind == "e":
                    self._add(out, (s, (idx,) + u, v), c)
                else:
                    for up, (jp,), c2 in self.f_through_e(idx, u):
                        self._add(out, (s, up, (jp,) + v), c * c2)
            return out
        for (s, u, v), c in vec.items():
            terms = {(s, u, v): c}
            if (kind == "e" and not u) or (kind == "f" and not v):
                terms = self.lift_key(s, u, v)
                terms = {k: c * x for k, x in terms.items()}
            for (t, uu, vv), cc in terms.items():
                if kind == "e":
                    if uu[0] == idx:
                        self._add(out, (t, uu[1:], vv), cc)
                else:
                    for up, vp, c2 in self.strip_f(idx, uu, vv):
                        self._add(out, (t, up, vp), cc * c2)
        return out

    def apply_tokens(self, tokens: Sequence[tuple[str, int, bool]], vec: dict) -> dict:
        """Apply a product of (possibly adjoint) generators, rightmost token first."""
        for kind, idx, star in reversed(list(tokens)):
            vec = self.apply(kind, idx, vec, star)
        return vec

    def top_level(self, *vecs: dict) -> int:
        return max((s for vec in vecs for (s, _, _) in vec), default=0)

    def inner(self, a: dict, b: dict) -> complex:
        """``<a, b>``, linear in the second argument."""
        level = self.top_level(a, b)
        la, lb = self.lift(a, level), self.lift(b, level)
        return complex(sum(np.conj(c) * lb[k] for k, c in la.items() if k in lb))

    def distance(self, a: dict, b: dict) -> float:
        level = self.top_level(a, b)
        la, lb = self.lift(a, level), self.lift(b, level)
        diff = dict(la)
        for k, c in lb.items():
            diff[k] = diff.get(k, 0.0) - c
        return float(np.sqrt(sum(abs(c) ** 2 for c in diff.values())))

    @staticmethod
    def bigrade(key) -> tuple[int, int]:
        s, u, v = key
        return (len(u) - s, len(v) - s)


@dataclass(frozen=True, eq=False)
class TailRep:
    """Compression of a tail representation to a finite span of lifted basis vectors.

    ``columns[k]`` is the k-th orthonormal basis vector written at level ``top``;
    ``labels[k]`` is the candidate ``(s, word)`` that introduced it (the one with
    minimal level).  ``interior`` is an orthonormal basis, in these coordinates, of
    the span of candidates with ``s <= top - 1`` and length ``<= cutoff - 1``; on it
    the representation is row isometric and defect free.
    """

    rep: FiniteRep
    space: TailSpace
    top: int
    cutoff: int
    labels: tuple
    bigrades: np.ndarray
    columns: tuple
    interior: np.ndarray

    def column_of(self, s: int, word: NormalWord) -> np.ndarray:
        """Coordinates of ``iota_s(xi_word)`` in the basis."""
        vec = self.space.lift(TailSpace.basis_vector(s, word), self.top)
        return np.array([sum(np.conj(col.get(k, 0.0)) * c for k, c in vec.items()) for col in self.columns])

    def copy_indices(self, s: int) -> list[int]:
        """Basis positions of the level-``s`` copy ``iota_s(xi_g)``, ``|g| <= cutoff``.

        Only meaningful when those vectors are basis vectors themselves, which is
        always the case for ``s = 0`` and for permutation relations.
        """
        out = []
        for word in words_up_to_length(self.space.rel.m, self.space.rel.n, self.cutoff):
            col = self.column_of(s, word)
            k = int(np.argmax(np.abs(col)))
            if abs(abs(col[k]) - 1) > 1e-10:
                raise ValueError(f"iota_{s}({word}) is not a basis vector")
            out.append(k)
        return out


def words_up_to_length(m: int, n: int, c: int) -> list[NormalWord]:
    """Normal words of length at most ``c``, ordered by length then degree then lex."""
    out = []
    for length in range(c + 1):
        for k in range(length, -1, -1):
            out.extend(words_of_degree(m, n, k, length - k))
    return out


def tail_rep(rel, tail: Tail, depth: int, word_cutoff: int, tol: float = 1e-10) -> TailRep:
    """Truncated tail representation on levels ``0..depth-1`` and words of length ``<= word_cutoff``."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    if word_cutoff < 0:
        raise ValueError("word cutoff must be nonnegative")
    space = TailSpace(rel, tail)
    rel = space.rel
    top = depth - 1
    words = words_up_to_length(rel.m, rel.n, word_cutoff)
    cands = [(s, w) for s in range(depth) for w in words]
    lifted = [space.lift(TailSpace.basis_vector(s, w), top) for s, w in cands]
    keys: dict = {}
    for vec in lifted:
        for key in vec:
            keys.setdefault(key, len(keys))
    x = np.zeros((len(keys), len(cands)), dtype=complex)
    for c, vec in enumerate(lifted):
        for key, val in vec.items():
            x[keys[key], c] = val

    # Gram-Schmidt in candidate order (levels ascending), with one re-orthogonalisation
    basis: list[np.ndarray] = []
    labels = []
    for c, (s, w) in enumerate(cands):
        r = x[:, c].copy()
        for _ in range(2):
            for q in basis:
                r -= np.vdot(q, r) * q
        nrm = np.linalg.norm(r)
        if nrm > tol:
            basis.append(r / nrm)
            labels.append((s, w))
    q_mat = np.column_stack(basis)
    inv_keys = {v: k for k, v in keys.items()}
    col_dicts = tuple(_undense(q_mat[:, k], inv_keys) for k in range(q_mat.shape[1]))

    def project(vec):
        out = np.zeros(q_mat.shape[1], dtype=complex)
        for key, val in vec.items():
            r = keys.get(key)
            if r is not None:
                out += np.conj(q_mat[r]) * val
        return out

    def gen(kind, idx):
        return np.column_stack([project(space.apply(kind, idx, col)) for col in col_dicts])

    # the relation only holds on the interior, so skip the construction-time warning
    rep = FiniteRep(rel, [gen("e", i) for i in range(1, rel.m + 1)],
                    [gen("f", j) for j in range(1, rel.n + 1)], tol=np.inf)
    flags = [s <= top - 1 and w.length <= word_cutoff - 1 for s, w in cands]
    if any(flags):
        interior = orth(q_mat.conj().T @ x[:, flags])
    else:
        interior = np.zeros((q_mat.shape[1], 0), dtype=complex)
    bigrades = np.array([(len(w.u) - s, len(w.v) - s) for s, w in labels], dtype=int).reshape(-1, 2)
    return TailRep(rep, space, top, word_cutoff, tuple(labels), bigrades, col_dicts, interior)


def _undense(x: np.ndarray, inv_keys: dict) -> dict:
    return {inv_keys[r]: x[r] for r in np.nonzero(np.abs(x) > PRUNE)[0]}


def gauge_unitary(tr: TailRep, alpha: complex, beta: complex) -> np.ndarray:
    """Diagonal unitary ``alpha^(|u|-s) beta^(|v|-s)`` on the tail basis."""
    if abs(abs(alpha) - 1) > 1e-12 or abs(abs(beta) - 1) > 1e-12:
        raise ValueError("gauge scalars must be unimodular")
    a, b = tr.bigrades[:, 0], tr.bigrades[:, 1]
    return np.diag(np.power(complex(alpha), a) * np.power(complex(beta), b))


def interior_residuals(tr: TailRep) -> dict:
    """Row-isometry and defect residuals of the tail compression on its interior."""
    rep, p = tr.rep, tr.interior
    if p.shape[1] == 0:
        return {"isometry_e": 0.0, "isometry_f": 0.0, "defect_e": 0.0, "defect_f": 0.0}
    out = {}
    for name, mats in (("e", rep.E), ("f", rep.F)):
        iso = 0.0
        for a, x in enumerate(mats):
            for b, y in enumerate(mats):
                target = p if a == b else 0 * p
                iso = max(iso, opnorm(x.conj().T @ y @ p - target))
        out[f"isometry_{name}"] = iso
        out[f"defect_{name}"] = opnorm(sum(x @ x.conj().T for x in mats) @ p - p)
    return out

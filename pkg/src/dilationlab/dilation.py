"""Dilation engines.

* :func:`fbp_dilate` builds Schaeffer's row-isometric dilation of a row contraction
  ``[A_1 ... A_p]`` over the free semigroup, truncated at word length ``N``.
* :func:`solel_dilate` dilates a row contractive representation of the two-family
  semigroup by conjugating the two Schaeffer tuples with an explicit unitary.
* :func:`star_dilate_defect_free` realizes the minimal *-dilation of a defect-free
  representation as a chain of level spaces.
* :func:`atomic_star_dilate` does the same for atomic representations at the level
  of labelled graphs.

Every construction is finite; the residuals it reports are measured on a
documented interior away from the truncation boundary.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .fock import build_fock
from .numkernel import (NotContractiveError, cmatrix, dense, null_space_of, opnorm, orth,
                        psd_sqrt, triples)
from .reps import AtomicRep, FiniteRep, in_degrees, validate
from .semigroup import EMPTY, NormalWord, normalize, words_of_degree
from .urelations import (UnitaryRelation, as_unitary, canonical_route, normal_terms,
                         swap_axes)

TAU_CONTRACT = 1e-9
TAU_INT = 1e-9


@dataclass(frozen=True, eq=False)
class DilationResult:
    """Generator matrices on ``H (+) K`` with ``H`` sitting in the first ``d`` coordinates."""

    mode: str
    S: tuple
    T: tuple
    J: np.ndarray
    interior: np.ndarray
    depth: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.J.shape[0]

    def to_json(self) -> dict:
        def ops(mats):
            return [[[r, c, [v.real, v.imag]] for r, c, v in triples(a)] for a in mats]
        return {
            "mode": self.mode,
            "dim": self.dim,
            "d": self.J.shape[1],
            "depth": self.depth,
            "S": ops(self.S),
            "T": ops(self.T),
            "interior": [int(k) for k in np.nonzero(self.interior)[0]],
            "diagnostics": {k: _jsonable(v) for k, v in self.diagnostics.items()},
        }

    @classmethod
    def from_json(cls, data: dict) -> "DilationResult":
        dim, d = int(data["dim"]), int(data["d"])

        def ops(raw):
            return tuple(sp.csr_matrix(
                ([complex(*v) for _, _, v in t] or np.zeros(0), ([r for r, _, _ in t], [c for _, c, _ in t])),
                shape=(dim, dim), dtype=complex) for t in raw)
        interior = np.zeros(dim, dtype=bool)
        interior[data["interior"]] = True
        j = np.zeros((dim, d), dtype=complex)
        j[:d, :d] = np.eye(d)
        return cls(data["mode"], ops(data["S"]), ops(data["T"]), j, interior, int(data["depth"]),
                   dict(data.get("diagnostics", {})))


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer, int)) and not isinstance(v, bool):
        return int(v)
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def free_words(p: int, max_len: int) -> list[tuple[int, ...]]:
    """Words over ``1..p`` of length at most ``max_len``, shortest first then lexicographic."""
    out = []
    for k in range(max_len + 1):
        out.extend(itertools.product(range(1, p + 1), repeat=k))
    return out


def word_product(mats: Sequence, w: Sequence[int]):
    """``X_{w_1} X_{w_2} ... X_{w_k}``; the empty word gives ``None`` meaning identity."""
    out = None
    for k in w:
        out = mats[k - 1] if out is None else out @ mats[k - 1]
    return out


def _apply_word(mats, w, x):
    for k in reversed(w):
        x = mats[k - 1] @ x
    return x


def check_row_contraction(mats: Sequence[np.ndarray], tol: float = TAU_CONTRACT) -> float:
    norm = opnorm(np.hstack(mats))
    if norm > 1 + tol:
        raise NotContractiveError(f"row norm {norm:.12g} exceeds 1 + {tol:g}")
    return norm


def defect_operator(mats: Sequence[np.ndarray]) -> np.ndarray:
    """``D = (I - R^* R)^{1/2}`` for the row ``R = [X_1 ... X_p]``; column block ``i`` is ``D^{(i)}``."""
    row = np.hstack(mats)
    return psd_sqrt(np.eye(row.shape[1]) - row.conj().T @ row)


# --- free semigroup dilation --------------------------------------------------


def gram_oracle(A: Sequence[np.ndarray], w: Sequence[int], w2: Sequence[int]) -> np.ndarray:
    """Gram block ``J^* S_{w2}^* S_w J`` of any minimal row-isometric dilation.

    ``A_v`` when ``w = w2 v``, ``A_v^*`` when ``w2 = w v``, and zero otherwise.
    """
    A = [cmatrix(a) for a in A]
    d = A[0].shape[0]
    w, w2 = tuple(w), tuple(w2)
    if w[: len(w2)] == w2:
        v = w[len(w2):]
        g = word_product(A, v)
        return np.eye(d, dtype=complex) if g is None else g
    if w2[: len(w)] == w:
        v = w2[len(w):]
        g = word_product(A, v)
        return np.eye(d, dtype=complex) if g is None else g.conj().T
    return np.zeros((d, d), dtype=complex)


def fbp_dilate(A: Sequence[np.ndarray], depth: int, tol: float = TAU_CONTRACT) -> DilationResult:
    """Schaeffer blocks ``S_i = [[A_i, 0], [D^{(i)} (x) xi_0, I (x) L_i]]``.

    ``K = C^{pd} (x) span{xi_w : |w| <= N}``, so the multiplicity space has dimension
    ``p*d``.  The interior is ``H`` together with the words of length ``<= N - 1``;
    there every ``S_i^* S_j = delta_ij``.  Compressions ``J^* S_w J = A_w`` hold for
    every word, and Gram blocks of ``S_w J`` are exact for ``|w| <= N + 1``.
    """
    A = [cmatrix(a) for a in A]
    p, d = len(A), A[0].shape[0]
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    row_norm = check_row_contraction(A, tol)
    D = defect_operator(A)
    words = free_words(p, depth)
    pos = {w: k for k, w in enumerate(words)}
    wdim = p * d
    dim = d + wdim * len(words)

    def kidx(w, a):
        return d + pos[w] * wdim + a

    S = []
    for i in range(1, p + 1):
        rows, cols, vals = [], [], []
        blk = A[i - 1]
        for r in range(d):
            for c in range(d):
                if blk[r, c] != 0:
                    rows.append(r); cols.append(c); vals.append(blk[r, c])
        col = D[:, (i - 1) * d: i * d]
        for a in range(wdim):
            for c in range(d):
                if col[a, c] != 0:
                    rows.append(kidx((), a)); cols.append(c); vals.append(col[a, c])
        for w in words:
            if len(w) < depth:
                for a in range(wdim):
                    rows.append(kidx((i,) + w, a)); cols.append(kidx(w, a)); vals.append(1.0)
        S.append(sp.csr_matrix((np.array(vals, dtype=complex), (rows, cols)), shape=(dim, dim)))
    J = np.zeros((dim, d), dtype=complex)
    J[:d, :d] = np.eye(d)
    interior = np.zeros(dim, dtype=bool)
    interior[:d] = True
    for w in words:
        if len(w) <= depth - 1:
            interior[d + pos[w] * wdim: d + (pos[w] + 1) * wdim] = True
    result = DilationResult("fbp", tuple(S), (), J, interior, depth)
    diag = {
        "row_norm": row_norm,
        "defect_rank": int(np.linalg.matrix_rank(D, tol=1e-10)) if D.size else 0,
        "isometry_residual": isometry_residual(S, interior),
        "compression_residual": compression_residual(S, J, A, depth),
        "gram_deviation": gram_deviation(S, J, A, min(depth + 1, 3)),
    }
    wd = wandering_decomposition(S, J, depth + 1)
    diag.update({"minimal_dim": wd.minimal.shape[1], "minimality_gap": dim - wd.minimal.shape[1],
                 "wandering_multiplicity": wd.multiplicity,
                 "defect_residual": _free_defect_residual(S, J, max(depth - 1, 0))})
    object.__setattr__(result, "diagnostics", diag)
    return result


def _free_defect_residual(ops: Sequence, J: np.ndarray, max_len: int) -> float:
    """``|(sum S_i S_i^* - I) x|`` over ``x = S_w J h`` with ``|w| <= max_len``; zero iff the minimal part is defect free there."""
    x = np.hstack([dense(_apply_word(ops, w, J)) for w in free_words(len(ops), max_len)])
    total = sum(dense(a @ (a.conj().T @ x)) for a in ops)
    return float(np.abs(total - x).max())


def isometry_residual(ops: Sequence, interior: np.ndarray) -> float:
    """``max |(X_i^* X_j - delta_ij) P|`` with ``P`` the interior coordinates."""
    cols = np.nonzero(interior)[0]
    dim = ops[0].shape[0]
    basis = np.zeros((dim, len(cols)), dtype=complex)
    basis[cols, np.arange(len(cols))] = 1.0
    images = [dense(x @ basis) for x in ops]
    worst = 0.0
    for a, xa in enumerate(images):
        for b, xb in enumerate(images):
            g = xa.conj().T @ xb
            if a == b:
                g = g - np.eye(len(cols))
            worst = max(worst, float(np.abs(g).max(initial=0.0)))
    return worst


def compression_residual(ops: Sequence, J: np.ndarray, A: Sequence[np.ndarray], max_len: int) -> float:
    worst = 0.0
    d = J.shape[1]
    for w in free_words(len(ops), max_len):
        target = word_product(A, w)
        target = np.eye(d) if target is None else target
        worst = max(worst, float(np.abs(J.conj().T @ _apply_word(ops, w, J) - target).max()))
    return worst


def gram_deviation(ops: Sequence, J: np.ndarray, A: Sequence[np.ndarray], max_len: int) -> float:
    words = free_words(len(ops), max_len)
    vecs = [dense(_apply_word(ops, w, J)) for w in words]
    worst = 0.0
    for a, w in enumerate(words):
        for b, w2 in enumerate(words):
            got = vecs[b].conj().T @ vecs[a]
            worst = max(worst, float(np.abs(got - gram_oracle(A, w, w2)).max()))
    return worst


@dataclass(frozen=True, eq=False)
class WanderingData:
    minimal: np.ndarray          # orthonormal basis of M
    complement: np.ndarray       # orthonormal basis of M-perp
    wandering: np.ndarray        # orthonormal basis of the wandering space of M-perp
    reducing_residual: float
    orbit_rank: int
    spans: bool

    @property
    def multiplicity(self) -> int:
        return self.wandering.shape[1]


def wandering_decomposition(ops: Sequence, J: np.ndarray, depth: int,
                            orbit_depth: int | None = None, tol: float = 1e-9) -> WanderingData:
    """Split the space into ``M = span{S_w H : |w| <= depth}`` and its complement.

    ``M`` is tested for being reducing, the wandering space ``N (-) sum S_i N`` of the
    complement ``N`` is computed as ``N`` intersected with every ``ker S_i^*``, and
    ``spans`` records whether the orbit ``{S_w L : |w| <= orbit_depth}`` fills ``N``.
    """
    dim = J.shape[0]
    vecs = [dense(_apply_word(ops, w, J)) for w in free_words(len(ops), depth)]
    q = orth(np.hstack(vecs), tol=1e-10)
    proj_out = lambda x: x - q @ (q.conj().T @ x)
    red = max(float(np.abs(proj_out(dense(x.conj().T @ q))).max(initial=0.0)) for x in ops)
    comp = null_space_of(q, dim)
    if comp.shape[1] == 0:
        empty = np.zeros((dim, 0), dtype=complex)
        return WanderingData(q, comp, empty, red, 0, True)
    stacked = np.vstack([dense(x.conj().T @ comp) for x in ops])
    _, s, vh = np.linalg.svd(stacked, full_matrices=True)
    rank = int(np.sum(s > 1e-10))
    wand = comp @ vh[rank:].conj().T
    if orbit_depth is None:
        orbit_depth = max(depth - 1, 0)
    if wand.shape[1]:
        orbit = np.hstack([dense(_apply_word(ops, w, wand)) for w in free_words(len(ops), orbit_depth)])
        orbit_rank = int(np.linalg.matrix_rank(orbit, tol=1e-9))
        resid = float(np.abs(orbit - comp @ (comp.conj().T @ orbit)).max(initial=0.0))
    else:
        orbit_rank, resid = 0, 0.0
    spans = orbit_rank == comp.shape[1] and resid <= tol
    return WanderingData(q, comp, wand, red, orbit_rank, spans)


# --- tensor reindexing helpers ------------------------------------------------


_TRANSFORM_CACHE: dict = {}


def transform_matrix(rel: UnitaryRelation, src: str, dst: str) -> np.ndarray:
    """Unitary taking coefficient vectors over pattern ``src`` to pattern ``dst``.

    Columns are indexed by the C-order flattening of the source tensor, rows by
    that of the destination.
    """
    key = (id(rel), src, dst)
    hit = _TRANSFORM_CACHE.get(key)
    if hit is not None and hit[0] is rel:
        return hit[1]
    shape = tuple(rel.m if c == "E" else rel.n for c in src)
    size = int(np.prod(shape, dtype=int))
    data = np.eye(size, dtype=complex).reshape((size,) + shape)
    pattern = list(src)
    for p in canonical_route(src, dst):
        pair = pattern[p] + pattern[p + 1]
        data = swap_axes(rel, data, p + 1, pair)
        pattern[p], pattern[p + 1] = pattern[p + 1], pattern[p]
    mat = data.reshape(size, size).T.copy()
    if len(_TRANSFORM_CACHE) > 256:
        _TRANSFORM_CACHE.clear()
    _TRANSFORM_CACHE[key] = (rel, mat)
    return mat


def word_rank(word: NormalWord, m: int, n: int) -> int:
    r = 0
    for i in word.u:
        r = r * m + (i - 1)
    for j in word.v:
        r = r * n + (j - 1)
    return r


# --- minimal *-dilation of a defect-free representation -------------------------


@dataclass(frozen=True, eq=False)
class LevelChain:
    """Level ``s`` holds pairs ``(w, h)`` with ``d(w) = (s, s)``; index ``rank(w) * d + a``.

    ``V[s]`` embeds level ``s`` into level ``s + 1`` and ``Pe[s][i]``, ``Pf[s][j]`` send
    level ``s`` to level ``s + 1`` as the generators do.  All maps exist for
    ``s = 0..s_max``, so level ``s_max + 1`` is the largest space touched.
    """

    rep: FiniteRep
    s_max: int
    V: tuple
    Pe: tuple
    Pf: tuple
    order: str = "ef"

    @property
    def d(self) -> int:
        return self.rep.d

    def dim(self, s: int) -> int:
        return self.d * (self.rep.m * self.rep.n) ** s

    def embedding(self, s: int, t: int | None = None) -> np.ndarray:
        """Level ``s`` inside level ``t`` (default ``s_max``)."""
        t = self.s_max if t is None else t
        out = np.eye(self.dim(s), dtype=complex)
        for k in range(s, t):
            out = self.V[k] @ out
        return out

    def compressed(self, s: int | None = None) -> FiniteRep:
        """Compression of the dilation to the level-``s`` copy: ``V_s^* Pi^{(s)}``."""
        s = self.s_max if s is None else s
        vh = self.V[s].conj().T
        return FiniteRep(self.rep.rel, [vh @ x for x in self.Pe[s]], [vh @ y for y in self.Pf[s]], tol=np.inf)

    def v_residual(self, s: int) -> float:
        v = self.V[s]
        return opnorm(v.conj().T @ v - np.eye(v.shape[1]))

    def interior(self, r: int = 1) -> np.ndarray:
        """Image of level ``s_max - r``: the vectors kept exact by words of length ``r``."""
        if r > self.s_max:
            return np.zeros((self.dim(self.s_max), 0), dtype=complex)
        return self.embedding(self.s_max - r)

    def diagnostics(self) -> dict:
        g = self.compressed()
        out = {"v_residual": max(self.v_residual(s) for s in range(self.s_max + 1)),
               "block_defect": block_defect_residual(self.rep)}
        x = self.interior(1)
        if x.shape[1]:
            out["defect_residual_e"] = opnorm(sum(a @ a.conj().T for a in g.E) @ x - x)
            out["defect_residual_f"] = opnorm(sum(b @ b.conj().T for b in g.F) @ x - x)
            iso = 0.0
            for mats in (g.E, g.F):
                for a, xa in enumerate(mats):
                    for b, xb in enumerate(mats):
                        target = x if a == b else 0 * x
                        iso = max(iso, opnorm(xa.conj().T @ xb @ x - target))
            out["isometry_residual"] = iso
        else:
            out["defect_residual_e"] = out["defect_residual_f"] = out["isometry_residual"] = 0.0
        x2 = self.interior(2)
        if x2.shape[1]:
            rel = self.rep.rel
            worst = 0.0
            for i in range(rel.m):
                for j in range(rel.n):
                    rhs = sum(rel.u[i * rel.n + j, a * rel.n + b] * (g.F[b] @ g.E[a])
                              for a in range(rel.m) for b in range(rel.n))
                    worst = max(worst, opnorm((g.E[i] @ g.F[j] - rhs) @ x2))
            out["commutation_residual"] = worst
        else:
            out["commutation_residual"] = 0.0
        j0 = self.embedding(0)
        out["compression_residual"] = max(
            float(np.abs(j0.conj().T @ a @ j0 - b).max()) for a, b in zip(g.E + g.F, self.rep.E + self.rep.F))
        return out


def block_defect_residual(rep: FiniteRep) -> float:
    """``|| sum_{i,j} s(e_i f_j) s(e_i f_j)^* - I ||``, the obstruction to isometric ``V_s``."""
    total = sum((a @ b) @ (a @ b).conj().T for a in rep.E for b in rep.F)
    return opnorm(total - np.eye(rep.d))


def star_dilate_defect_free(rep: FiniteRep, s_max: int, strict: bool = True,
                            order: str = "ef", tol: float = TAU_INT) -> LevelChain:
    """Level chain of the minimal *-dilation of a defect-free ``rep``.

    ``V_s(w, h) = sum_{d(v)=(1,1)} (wv, s(v)^* h)`` with ``v`` running over ``e_i f_j``
    (``order="ef"``) or over ``f_j e_i`` (``order="fe"``, used as an independent
    second construction).  With ``strict=False`` a non-defect-free input is accepted
    and the failure shows up in ``v_residual``.
    """
    if order not in ("ef", "fe"):
        raise ValueError("order must be 'ef' or 'fe'")
    if s_max < 0:
        raise ValueError("s_max must be nonnegative")
    report = validate(rep, tol)
    if strict and not (report.defect_free and report.row_contractive):
        raise ValueError(
            f"representation is not defect free and row contractive (defect residuals "
            f"{report.defect_residual_e:.3e}, {report.defect_residual_f:.3e}; row norms "
            f"{report.row_norm_e:.6g}, {report.row_norm_f:.6g})")
    rel = rep.rel
    m, n = rel.m, rel.n
    mn = m * n
    V, Pe, Pf = [], [], []
    for s in range(s_max + 1):
        base = "E" * s + "F" * s
        dst = "E" * (s + 1) + "F" * (s + 1)
        size = mn ** s
        if order == "ef":
            t = transform_matrix(rel, base + "EF", dst).reshape(mn ** (s + 1), size, m, n)
            v = sum(np.kron(t[:, :, i, j], (rep.E[i] @ rep.F[j]).conj().T) for i in range(m) for j in range(n))
        else:
            t = transform_matrix(rel, base + "FE", dst).reshape(mn ** (s + 1), size, n, m)
            v = sum(np.kron(t[:, :, j, i], (rep.F[j] @ rep.E[i]).conj().T) for i in range(m) for j in range(n))
        V.append(v)
        # e_i (x) w (x) f_j is already in e-first order
        ts = transform_matrix(rel, "E" + base + "F", dst).reshape(mn ** (s + 1), m, size, n)
        Pe.append(tuple(sum(np.kron(ts[:, i, :, j], rep.F[j].conj().T) for j in range(n)) for i in range(m)))
        tf = transform_matrix(rel, "F" + base + "E", dst).reshape(mn ** (s + 1), n, size, m)
        Pf.append(tuple(sum(np.kron(tf[:, j, :, i], rep.E[i].conj().T) for i in range(m)) for j in range(n)))
    return LevelChain(rep, s_max, tuple(V), tuple(Pe), tuple(Pf), order)


def closed_form_vectors(rep: FiniteRep, s_max: int) -> tuple[list, np.ndarray]:
    """Coordinates at level ``s_max`` of every spanning vector ``(w, h_a)``, ``d(w) <= (s_max, s_max)``.

    Computed from ``pi(w) h = sum_{d(v)=(t,t)} pi(wv) s(v)^* h`` with the normal forms
    of ``wv`` taken from :func:`normal_terms`, independently of the level chain.
    """
    rel = rep.rel
    m, n, d = rel.m, rel.n, rep.d
    labels, cols = [], []
    top = words_of_degree(m, n, s_max, s_max)
    size = len(top) * d
    for s in range(s_max + 1):
        pad = words_of_degree(m, n, s_max - s, s_max - s)
        adj = [rep.word(v).conj().T for v in pad]
        for w in words_of_degree(m, n, s, s):
            for a in range(d):
                col = np.zeros(size, dtype=complex)
                for v, av in zip(pad, adj):
                    for x, c in normal_terms(rel, w.letters() + v.letters()):
                        r = word_rank(x, m, n)
                        col[r * d: (r + 1) * d] += c * av[:, a]
                cols.append(col)
                labels.append((s, w, a))
    return labels, np.column_stack(cols)


def chain_vectors(chain: LevelChain) -> np.ndarray:
    rel = chain.rep.rel
    cols = []
    for s in range(chain.s_max + 1):
        emb = chain.embedding(s)
        for w in words_of_degree(rel.m, rel.n, s, s):
            r = word_rank(w, rel.m, rel.n)
            for a in range(chain.d):
                cols.append(emb[:, r * chain.d + a])
    return np.column_stack(cols)


def uniqueness_check(rep: FiniteRep, s_max: int, trials: int = 0,
                     rng: np.random.Generator | None = None) -> dict:
    """Gram matrix of the spanning vectors computed three ways.

    (a) from the e-first level chain, (b) from the closed-form common-degree lifting,
    (c) from an independently built f-first level chain; the correspondence
    ``(w, h) -> (w, h)`` between the two chains is inner-product preserving exactly
    when (a) and (c) agree.
    """
    chain_a = star_dilate_defect_free(rep, s_max, order="ef")
    chain_c = star_dilate_defect_free(rep, s_max, order="fe")
    xa = chain_vectors(chain_a)
    xc = chain_vectors(chain_c)
    _, xb = closed_form_vectors(rep, s_max)
    ga, gb, gc = xa.conj().T @ xa, xb.conj().T @ xb, xc.conj().T @ xc
    # random combinations: <x a, x a'> computed in each chain without forming the Gram
    rng = np.random.default_rng(0) if rng is None else rng
    worst_trial = 0.0
    for _ in range(trials):
        c1 = rng.normal(size=xa.shape[1]) + 1j * rng.normal(size=xa.shape[1])
        c2 = rng.normal(size=xa.shape[1]) + 1j * rng.normal(size=xa.shape[1])
        worst_trial = max(worst_trial, abs(np.vdot(xa @ c1, xa @ c2) - np.vdot(xc @ c1, xc @ c2)))
    return {
        "trial_deviation": float(worst_trial),
        "vectors": xa.shape[1],
        "gram_chain_vs_formula": float(np.abs(ga - gb).max()),
        "gram_chain_vs_second_chain": float(np.abs(ga - gc).max()),
        "deviation": float(max(np.abs(ga - gb).max(), np.abs(ga - gc).max(), worst_trial)),
    }


# --- Solel's two-family dilation ----------------------------------------------------


def _gs_complete(q: np.ndarray, order: Sequence[int], tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis of ``span(q)^perp`` from standard basis vectors taken in ``order``."""
    dim = q.shape[0]
    basis = [q[:, k] for k in range(q.shape[1])]
    extra = []
    for k in order:
        if len(basis) == dim:
            break
        x = np.zeros(dim, dtype=complex)
        x[k] = 1.0
        for _ in range(2):
            for b in basis:
                x = x - np.vdot(b, x) * b
        nrm = np.linalg.norm(x)
        if nrm > tol:
            x = x / nrm
            basis.append(x)
            extra.append(x)
    if not extra:
        return np.zeros((dim, 0), dtype=complex)
    return np.column_stack(extra)


def solel_dilate(rep: FiniteRep, depth: int, tol: float = TAU_CONTRACT) -> DilationResult:
    """Row-isometric dilation ``pi(e_i) = S_i W``, ``pi(f_j) = W^* T_j``.

    ``K = W (x) H_u`` truncated at bidegree ``(N, N)``, with the multiplicity space
    ``W = C^{md} (+) C^{nd}`` holding the defect columns of ``A`` and ``B``.  The two
    tuples ``S_i T_j`` and ``sum u T_j' S_i'`` agree on ``K``, so the intertwining
    unitary is ``I_H (+) (Omega (x) I)`` in orbit coordinates, where ``Omega`` is a
    unitary on ``W (x) span{xi_0, xi_{e_i}, xi_{f_j}}``.  The interior is ``H`` plus
    Fock degree ``<= (N-2, N-2)``.
    """
    rel = rep.rel
    m, n, d = rel.m, rel.n, rep.d
    if depth < 2:
        raise ValueError("solel_dilate needs depth >= 2")
    norm_a = check_row_contraction(rep.E, tol)
    norm_b = check_row_contraction(rep.F, tol)
    DA, DB = defect_operator(rep.E), defect_operator(rep.F)
    fk = build_fock(rel, depth, depth)
    fdim = fk.dim
    wdim = (m + n) * d
    dim = d + wdim * fdim

    def generator(blk, col_block, w_offset, creation):
        top = sp.csr_matrix(blk)
        col = np.zeros((wdim * fdim, d), dtype=complex)
        for a in range(col_block.shape[0]):
            col[(w_offset + a) * fdim + 0] = col_block[a]
        shift = sp.kron(sp.identity(wdim, dtype=complex, format="csr"), creation, format="csr")
        return sp.bmat([[top, None], [sp.csr_matrix(col), shift]], format="csr")

    S = tuple(generator(rep.E[i], DA[:, i * d:(i + 1) * d], 0, fk.creation_e[i]) for i in range(m))
    T = tuple(generator(rep.F[j], DB[:, j * d:(j + 1) * d], m * d, fk.creation_f[j]) for j in range(n))
    J = np.zeros((dim, d), dtype=complex)
    J[:d, :d] = np.eye(d)

    pairs = [(i, j) for i in range(m) for j in range(n)]
    pi1 = [S[i] @ T[j] for i, j in pairs]
    pi2 = [sum(rel.u[i * n + j, a * n + b] * (T[b] @ S[a]) for a in range(m) for b in range(n)) for i, j in pairs]

    # Z = W (x) span{xi_0, xi_{e_1..m}, xi_{f_1..n}}, coordinates (a, t)
    zwords = [EMPTY] + [NormalWord((i,), ()) for i in range(1, m + 1)] + [NormalWord((), (j,)) for j in range(1, n + 1)]
    z = len(zwords)
    zidx = np.array([d + a * fdim + fk.index(x) for a in range(wdim) for x in zwords])

    def z_part(vecs):
        arr = dense(vecs)
        outside = arr.copy()
        outside[zidx] = 0
        outside[:d] = 0
        return arr[zidx], float(np.abs(outside).max(initial=0.0))

    x1, leak1 = z_part(sp.hstack([p @ sp.csr_matrix(J) for p in pi1]))
    x2, leak2 = z_part(sp.hstack([p @ sp.csr_matrix(J) for p in pi2]))
    gram_gap = float(np.abs(x1.conj().T @ x1 - x2.conj().T @ x2).max())
    q1, q2 = orth(x1), orth(x2)
    if q1.shape[1] != q2.shape[1]:
        raise RuntimeError("defect vectors of the two tuples span spaces of different dimension")
    # graded lexicographic order on Z: Fock degree of the Z word, then the word, then a
    order = sorted(range(wdim * z), key=lambda k: (zwords[k % z].length, zwords[k % z], k // z))
    c1 = _gs_complete(q1, order)
    c2 = _gs_complete(q2, order)
    omega = x2 @ np.linalg.pinv(x1, rcond=1e-10) @ (q1 @ q1.conj().T) + c2 @ c1.conj().T
    omega_resid = {
        "unitarity": float(np.abs(omega.conj().T @ omega - np.eye(wdim * z)).max()),
        "intertwining": float(np.abs(omega @ x1 - x2).max()),
    }

    # orbit coordinates: B_r columns (t, v) -> xi_{v x_t}, v over (e f)^r words
    wk = sp.csr_matrix((wdim * fdim, wdim * fdim), dtype=complex)
    covered = sp.csr_matrix((wdim * fdim, wdim * fdim), dtype=complex)
    for r in range(depth):
        words_r = list(itertools.product(pairs, repeat=r))
        cols = []
        for t, x in enumerate(zwords):
            base = fk.vector(x)
            for v in words_r:
                vec = base
                for i, j in reversed(v):
                    vec = fk.creation_e[i] @ (fk.creation_f[j] @ vec)
                cols.append(vec)
        b = sp.csr_matrix(np.column_stack(cols))
        b.data[np.abs(b.data) < 1e-15] = 0
        b.eliminate_zeros()
        g = sp.kron(sp.identity(wdim, dtype=complex, format="csr"), b, format="csr")
        om = sp.kron(sp.csr_matrix(omega), sp.identity(len(words_r), dtype=complex, format="csr"), format="csr")
        wk = wk + g @ om @ g.conj().T
        covered = covered + g @ g.conj().T
    wk = wk + sp.identity(wdim * fdim, dtype=complex, format="csr") - covered
    wk.data[np.abs(wk.data) < 1e-15] = 0
    wk.eliminate_zeros()
    Wop = sp.bmat([[sp.identity(d, dtype=complex, format="csr"), None], [None, wk]], format="csr")
    Wh = Wop.conj().T.tocsr()
    pe = tuple((s @ Wop).tocsr() for s in S)
    pf = tuple((Wh @ t).tocsr() for t in T)

    deg = fk.degrees()
    fock_in = (deg[:, 0] <= depth - 2) & (deg[:, 1] <= depth - 2)
    interior = np.concatenate([np.ones(d, dtype=bool), np.tile(fock_in, wdim)])
    result = DilationResult("solel", pe, pf, J, interior, depth)

    diag = {
        "row_norm_e": norm_a,
        "row_norm_f": norm_b,
        "isometry_residual": max(isometry_residual(pe, interior), isometry_residual(pf, interior)),
        "commutation_residual": _commutation_residual(rel, pe, pf, interior),
        "compression_residual": max(
            compression_residual(pe, J, rep.E, 2), compression_residual(pf, J, rep.F, 2),
            _mixed_compression(rep, pe, pf, J)),
        "defect_leak": max(leak1, leak2),
        "defect_gram_gap": gram_gap,
        "omega_unitarity": omega_resid["unitarity"],
        "omega_intertwining": omega_resid["intertwining"],
    }
    blocks = [a @ b for a in rep.E for b in rep.F]
    tup_len = 2 if depth >= 4 else 1
    diag["pi1_gram_deviation"] = gram_deviation(pi1, J, blocks, tup_len)
    diag["pi2_gram_deviation"] = gram_deviation(pi2, J, blocks, tup_len)
    worst = 0.0
    for w in free_words(len(pairs), tup_len):
        worst = max(worst, float(np.abs(dense(Wop @ _apply_word(pi1, w, J)) - dense(_apply_word(pi2, w, J))).max()))
    diag["minimal_correspondence"] = worst
    object.__setattr__(result, "diagnostics", diag)
    return result


def _commutation_residual(rel, pe, pf, interior) -> float:
    cols = np.nonzero(interior)[0]
    dim = pe[0].shape[0]
    basis = sp.csr_matrix((np.ones(len(cols)), (cols, np.arange(len(cols)))), shape=(dim, len(cols)))
    worst = 0.0
    for i in range(rel.m):
        for j in range(rel.n):
            lhs = pe[i] @ (pf[j] @ basis)
            rhs = sum(rel.u[i * rel.n + j, a * rel.n + b] * (pf[b] @ (pe[a] @ basis))
                      for a in range(rel.m) for b in range(rel.n))
            worst = max(worst, float(np.abs(dense(lhs - rhs)).max(initial=0.0)))
    return worst


def _mixed_compression(rep: FiniteRep, pe, pf, J) -> float:
    gens = [("e", i + 1) for i in range(rep.m)] + [("f", j + 1) for j in range(rep.n)]
    ops = {("e", i + 1): pe[i] for i in range(rep.m)} | {("f", j + 1): pf[j] for j in range(rep.n)}
    worst = 0.0
    for length in (1, 2, 3):
        for word in itertools.product(gens, repeat=length):
            x = J
            for g in reversed(word):
                x = ops[g] @ x
            worst = max(worst, float(np.abs(J.conj().T @ dense(x) - rep.word(list(word))).max()))
    return worst


def minimal_part_gram(result: DilationResult, rel, s_max: int) -> np.ndarray:
    """Gram matrix of ``pi(w) h`` for normal words with ``d(w) = (s, s)``, ``s <= s_max``,
    in the same order as :func:`chain_vectors`."""
    rel = as_unitary(rel)
    d = result.J.shape[1]
    cols = []
    for s in range(s_max + 1):
        for w in words_of_degree(rel.m, rel.n, s, s):
            x = result.J
            for kind, idx in reversed(w.letters()):
                x = (result.S[idx - 1] if kind == "e" else result.T[idx - 1]) @ x
            x = dense(x)
            for a in range(d):
                cols.append(x[:, a])
    x = np.column_stack(cols)
    return x.conj().T @ x


def minimal_defect_residual(result: DilationResult, rel, max_len: int) -> float:
    """Defect residual of the row isometric dilation on vectors ``pi(w) h``, ``|w| <= max_len``."""
    rel = as_unitary(rel)
    gens = [("e", i + 1) for i in range(rel.m)] + [("f", j + 1) for j in range(rel.n)]
    ops = {("e", i + 1): result.S[i] for i in range(rel.m)} | {("f", j + 1): result.T[j] for j in range(rel.n)}
    vecs = []
    for length in range(max_len + 1):
        for word in itertools.product(gens, repeat=length):
            x = result.J
            for g in reversed(word):
                x = ops[g] @ x
            vecs.append(dense(x))
    x = np.hstack(vecs)
    worst = 0.0
    for fam in (result.S, result.T):
        total = sum(dense(a @ (a.conj().T @ x)) for a in fam)
        worst = max(worst, float(np.abs(total - x).max()))
    return worst


# --- atomic *-dilation --------------------------------------------------------------


def _in_edges(a: AtomicRep) -> tuple[dict, dict]:
    """Vertex -> (source, label, scalar) of its unique incoming e- and f-edge."""
    ine, inf = {}, {}
    for i, mp in enumerate(a.e_edges, 1):
        for src, (dst, c) in mp.items():
            ine[dst] = (src, i, c)
    for j, mp in enumerate(a.f_edges, 1):
        for src, (dst, c) in mp.items():
            inf[dst] = (src, j, c)
    return ine, inf


class _Lifter:
    """Rewrites ``pi(x) xi_k`` as ``c * pi(z) xi_zeta`` with ``d(z)`` as large as requested."""

    def __init__(self, a: AtomicRep):
        deg = in_degrees(a)
        for x, (de, df) in deg.items():
            if (de, df) != (1, 1):
                raise ValueError(f"vertex {x!r} has in-degrees (e={de}, f={df}); the input is not defect free")
        self.a = a
        self.ine, self.inf = _in_edges(a)

    def lift(self, x: NormalWord, k, target: tuple[int, int]):
        ke, kf = target[0] - x.degree[0], target[1] - x.degree[1]
        if ke < 0 or kf < 0:
            raise ValueError("cannot lift to a smaller degree")
        scal = 1.0 + 0j
        ys, yf = [], []
        cur = k
        for _ in range(ke):
            src, i, c = self.ine[cur]
            ys.append(i)
            scal *= np.conj(c)
            cur = src
        for _ in range(kf):
            src, j, c = self.inf[cur]
            yf.append(j)
            scal *= np.conj(c)
            cur = src
        z = normalize(self.a.rel, x.letters() + [("e", i) for i in ys] + [("f", j) for j in yf])
        # pi(x) xi_k = pi(x y) s(y)^* xi_k and s(y)^* xi_k = conj(scalars) xi_cur
        return z, cur, scal


@dataclass(frozen=True, eq=False)
class AtomicDilation:
    graph: AtomicRep
    depth: int
    classes: dict          # output vertex -> (level-D word, input vertex, scalar of the representative)
    interior: tuple        # output vertices coming from level depth - 1
    original: dict         # input vertex -> output vertex


def atomic_star_dilate(a: AtomicRep, depth: int) -> AtomicDilation:
    """Atomic minimal *-dilation truncated to the level-``depth`` copy.

    Vertices are the basis vectors ``pi(z) xi_zeta`` with ``d(z) = (depth, depth)``.
    Each is named after its least representative ``(x, k)`` in the order
    ``(|x|, d(x), x, k)``, and the representative carries scalar 1.  An edge is kept
    when its target still lies in the level-``depth`` copy.
    """
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    lifter = _Lifter(a)
    rel = a.rel
    m, n = rel.m, rel.n
    D = depth
    vpos = {k: idx for idx, k in enumerate(a.vertices)}
    best: dict = {}
    for s_e in range(D + 1):
        for s_f in range(D + 1):
            for x in words_of_degree(m, n, s_e, s_f):
                for k in a.vertices:
                    z, zeta, c = lifter.lift(x, k, (D, D))
                    key = (x.length, x.degree, x, vpos[k])
                    cur = best.get((z, zeta))
                    if cur is None or key < cur[0]:
                        best[(z, zeta)] = (key, x, k, c)
    # level-D pairs -> their lift at level D + 1
    up = {}
    for (z, zeta) in best:
        zz, cur, c = lifter.lift(z, zeta, (D + 1, D + 1))
        up[(zz, cur)] = ((z, zeta), c)

    def name(x: NormalWord, k) -> str:
        return str(k) if x == EMPTY else f"{x}|{k}"

    order = sorted(best, key=lambda pz: best[pz][0])
    names = {pz: name(best[pz][1], best[pz][2]) for pz in order}
    classes = {names[pz]: (pz[0], pz[1], best[pz][3]) for pz in order}
    e_edges = [dict() for _ in range(m)]
    f_edges = [dict() for _ in range(n)]
    for pz in order:
        z, zeta = pz
        c_src = best[pz][3]   # rep vector = c_src * pi(z) xi_zeta
        for kind, count, maps in (("e", m, e_edges), ("f", n, f_edges)):
            for g in range(1, count + 1):
                gz = normalize(rel, [(kind, g)] + z.letters())
                zz, cur, c = lifter.lift(gz, zeta, (D + 1, D + 1))
                hit = up.get((zz, cur))
                if hit is None:
                    continue
                tgt, c_up = hit
                # pi(g) pi(z) xi = c pi(zz) xi' = (c / c_up) pi(z') xi''
                c_tgt = best[tgt][3]
                scal = c_src * (c / c_up) / c_tgt
                maps[g - 1][names[pz]] = (names[tgt], complex(scal))
    verts = tuple(names[pz] for pz in order)
    labels = {names[pz]: names[pz] for pz in order}
    graph = AtomicRep(rel, verts, tuple(e_edges), tuple(f_edges), labels)
    interior = []
    if D >= 1:
        for s_e_pairs in _level_pairs(a, D - 1):
            z, zeta, _ = lifter.lift(s_e_pairs[0], s_e_pairs[1], (D, D))
            interior.append(names[(z, zeta)])
    original = {}
    for k in a.vertices:
        z, zeta, _ = lifter.lift(EMPTY, k, (D, D))
        original[k] = names[(z, zeta)]
    return AtomicDilation(graph, D, classes, tuple(sorted(set(interior), key=verts.index)), original)


def _level_pairs(a: AtomicRep, s: int):
    for w in words_of_degree(a.rel.m, a.rel.n, s, s):
        for k in a.vertices:
            yield (w, k)


def atomic_lift_unitary(dil: AtomicDilation, a: AtomicRep) -> np.ndarray:
    """Monomial unitary from the graph basis to level-``depth`` chain coordinates."""
    rel = a.rel
    d = len(a.vertices)
    vpos = {k: idx for idx, k in enumerate(a.vertices)}
    size = d * (rel.m * rel.n) ** dil.depth
    u = np.zeros((size, len(dil.graph.vertices)), dtype=complex)
    for col, v in enumerate(dil.graph.vertices):
        z, zeta, c = dil.classes[v]
        u[word_rank(z, rel.m, rel.n) * d + vpos[zeta], col] = c
    return u


def match_monomial(first: Sequence, second: Sequence, tol: float = 1e-9) -> np.ndarray | None:
    """Monomial unitary ``U`` with ``U X_k U^* = Y_k`` for scaled partial permutations.

    Both tuples must consist of matrices with at most one unimodular entry per row
    and column.  Each connected component of the first graph is matched by trying
    every unused target for its root and propagating along edges in both directions;
    ``None`` means no matching exists.
    """
    X = [dense(a) for a in first]
    Y = [dense(b) for b in second]
    dim = X[0].shape[0]
    if Y[0].shape[0] != dim or len(X) != len(Y):
        return None

    def edges(mats):
        out_e, in_e = [dict() for _ in mats], [dict() for _ in mats]
        for k, a in enumerate(mats):
            rows, cols = np.nonzero(np.abs(a) > tol)
            for r, c in zip(rows, cols):
                out_e[k][c] = (r, a[r, c])
                in_e[k][r] = (c, a[r, c])
        return out_e, in_e
    xo, xi = edges(X)
    yo, yi = edges(Y)
    if any(len(a) != len(b) for a, b in zip(xo, yo)):
        return None
    perm: dict = {}
    phase: dict = {}
    used: set = set()

    def propagate(root, target):
        local_p, local_ph = {root: target}, {root: 1.0 + 0j}
        taken = set(used) | {target}
        stack = [root]
        while stack:
            v = stack.pop()
            w, ph = local_p[v], local_ph[v]
            for k in range(len(X)):
                for src, dst in ((xo[k], yo[k]), (xi[k], yi[k])):
                    hx, hy = src.get(v), dst.get(w)
                    if hx is None and hy is None:
                        continue
                    if hx is None or hy is None:
                        return None
                    (v2, s1), (w2, s2) = hx, hy
                    # forward edges: phi' = phi s2/s1; backward edges: phi' = phi s1/s2
                    new_ph = ph * s2 / s1 if src is xo[k] else ph * s1 / s2
                    if v2 in local_p:
                        if local_p[v2] != w2 or abs(local_ph[v2] - new_ph) > 1e-9:
                            return None
                        continue
                    if w2 in taken or v2 in perm:
                        return None
                    local_p[v2], local_ph[v2] = w2, new_ph
                    taken.add(w2)
                    stack.append(v2)
        return local_p, local_ph

    for root in range(dim):
        if root in perm:
            continue
        for target in range(dim):
            if target in used:
                continue
            hit = propagate(root, target)
            if hit is not None:
                perm.update(hit[0])
                phase.update(hit[1])
                used.update(hit[0].values())
                break
        else:
            return None
    u = np.zeros((dim, dim), dtype=complex)
    for v, w in perm.items():
        u[w, v] = phase[v]
    return u


def atomic_cross_check(a: AtomicRep, depth: int) -> dict:
    """Compare the graph dilation with the matrix chain of ``atomic_to_matrices(a)`` at equal depth."""
    from .reps import atomic_to_matrices
    dil = atomic_star_dilate(a, depth)
    graph_mats = atomic_to_matrices(dil.graph, tol=np.inf)
    chain = star_dilate_defect_free(atomic_to_matrices(a), depth)
    g = chain.compressed(depth)
    first = list(graph_mats.E) + list(graph_mats.F)
    second = list(g.E) + list(g.F)
    u = match_monomial(first, second)
    if u is None:
        return {"matched": False, "deviation": float("inf"), "vertices": len(dil.graph.vertices)}
    dev = max(float(np.abs(u @ x @ u.conj().T - y).max()) for x, y in zip(first, second))
    return {"matched": True, "deviation": dev, "vertices": len(dil.graph.vertices)}

"""Unitary commutation data and reindexing between E/F tensor patterns.

A unitary ``u`` of size ``mn x mn`` identifies ``E (x) F`` with ``F (x) E`` through

    e_i (x) f_j = sum u[(i,j),(i',j')] f_j' (x) e_i'.

Rows and columns are indexed by pairs in lexicographic order, so pair ``(i, j)``
(1-based) sits at position ``(i-1)*n + (j-1)``.  Coefficient arrays are 0-based.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .semigroup import E, F, NormalWord, PermRelation

TAU_UNITARY = 1e-10


@dataclass(frozen=True, eq=False)
class UnitaryRelation:
    m: int
    n: int
    u: np.ndarray
    tol: float = TAU_UNITARY
    perm: PermRelation | None = field(default=None, compare=False)

    def __post_init__(self):
        u = np.array(self.u, dtype=complex)
        size = self.m * self.n
        if u.shape != (size, size):
            raise ValueError(f"u must be {size}x{size}, got {u.shape}")
        if not np.all(np.isfinite(u)):
            raise ValueError("u has non-finite entries")
        eye = np.eye(size)
        resid = max(np.abs(u.conj().T @ u - eye).max(), np.abs(u @ u.conj().T - eye).max())
        if resid > self.tol:
            raise ValueError(f"u is not unitary (residual {resid:.3e} > {self.tol:.1e})")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)

    @property
    def is_permutation(self) -> bool:
        return self.perm is not None

    def entry(self, i: int, j: int, i2: int, j2: int) -> complex:
        """``u[(i,j),(i',j')]`` with 1-based indices."""
        n = self.n
        return self.u[(i - 1) * n + (j - 1), (i2 - 1) * n + (j2 - 1)]

    def to_json(self) -> dict:
        return {"m": self.m, "n": self.n,
                "u": [[[float(z.real), float(z.imag)] for z in row] for row in self.u]}

    @classmethod
    def from_json(cls, data: dict, tol: float = TAU_UNITARY) -> "UnitaryRelation":
        if "theta" in data:
            return from_perm(PermRelation.from_json(data))
        u = np.array([[complex(re_, im) for re_, im in row] for row in data["u"]])
        return cls(int(data["m"]), int(data["n"]), u, tol=tol)


def from_perm(rel: PermRelation) -> UnitaryRelation:
    size = rel.m * rel.n
    u = np.zeros((size, size), dtype=complex)
    for i in range(1, rel.m + 1):
        for j in range(1, rel.n + 1):
            i2, j2 = rel.theta(i, j)
            u[(i - 1) * rel.n + (j - 1), (i2 - 1) * rel.n + (j2 - 1)] = 1.0
    return UnitaryRelation(rel.m, rel.n, u, perm=rel)


def as_unitary(rel) -> UnitaryRelation:
    if isinstance(rel, UnitaryRelation):
        return rel
    if isinstance(rel, PermRelation):
        return from_perm(rel)
    raise TypeError(f"expected a PermRelation or UnitaryRelation, got {type(rel).__name__}")


def random_unitary(m: int, n: int, rng: np.random.Generator) -> UnitaryRelation:
    size = m * n
    z = rng.normal(size=(size, size)) + 1j * rng.normal(size=(size, size))
    q, r = np.linalg.qr(z)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    return UnitaryRelation(m, n, q)


def ef_to_fe(rel: UnitaryRelation, c: np.ndarray) -> np.ndarray:
    """Coefficients over ``e_i (x) f_j`` (shape m x n) to coefficients over ``f_j' (x) e_i'`` (n x m)."""
    c = np.asarray(c)
    if c.shape != (rel.m, rel.n):
        raise ValueError(f"expected shape {(rel.m, rel.n)}, got {c.shape}")
    out = c.reshape(-1) @ rel.u
    return out.reshape(rel.m, rel.n).T.copy()


def fe_to_ef(rel: UnitaryRelation, c: np.ndarray) -> np.ndarray:
    """Coefficients over ``f_l (x) e_k`` (shape n x m) to coefficients over ``e_i (x) f_j`` (m x n)."""
    c = np.asarray(c)
    if c.shape != (rel.n, rel.m):
        raise ValueError(f"expected shape {(rel.n, rel.m)}, got {c.shape}")
    out = rel.u.conj() @ c.T.reshape(-1)
    return out.reshape(rel.m, rel.n)


def swap_axes(rel: UnitaryRelation, data: np.ndarray, pos: int, kind: str) -> np.ndarray:
    """Apply one adjacent move to axes ``pos, pos+1`` of ``data``.

    ``kind`` is ``"EF"`` (an E,F pair becomes F,E) or ``"FE"``.  Leading batch axes
    are allowed: ``pos`` counts from the first axis of ``data``.
    """
    m, n = rel.m, rel.n
    moved = np.moveaxis(data, (pos, pos + 1), (-2, -1))
    lead = moved.shape[:-2]
    if kind == "EF":
        if moved.shape[-2:] != (m, n):
            raise ValueError("axes do not hold an E,F pair")
        out = moved.reshape(lead + (m * n,)) @ rel.u
        out = np.swapaxes(out.reshape(lead + (m, n)), -1, -2)
    elif kind == "FE":
        if moved.shape[-2:] != (n, m):
            raise ValueError("axes do not hold an F,E pair")
        flat = np.swapaxes(moved, -1, -2).reshape(lead + (m * n,))
        out = (flat @ rel.u.conj().T).reshape(lead + (m, n))
    else:
        raise ValueError(f"unknown move kind {kind!r}")
    return np.moveaxis(out, (-2, -1), (pos, pos + 1))


@dataclass(frozen=True, eq=False)
class TensorCoeffs:
    pattern: tuple[str, ...]
    data: np.ndarray

    def __post_init__(self):
        pattern = tuple(p.upper() for p in self.pattern)
        if any(p not in (E, F) for p in pattern):
            raise ValueError(f"bad pattern {pattern}")
        object.__setattr__(self, "pattern", pattern)
        object.__setattr__(self, "data", np.asarray(self.data, dtype=complex))

    def check(self, rel: UnitaryRelation) -> None:
        want = tuple(rel.m if p == E else rel.n for p in self.pattern)
        if self.data.shape != want:
            raise ValueError(f"coefficient array shape {self.data.shape} does not match pattern extents {want}")

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    @classmethod
    def basis(cls, rel: UnitaryRelation, letters: Sequence[tuple[str, int]]) -> "TensorCoeffs":
        """Indicator tensor of a raw generator sequence such as ``[("e", 1), ("f", 2)]``."""
        pattern = tuple(E if g == "e" else F for g, _ in letters)
        shape = tuple(rel.m if p == E else rel.n for p in pattern)
        data = np.zeros(shape, dtype=complex)
        data[tuple(k - 1 for _, k in letters)] = 1.0
        return cls(pattern, data)


def canonical_route(src: Sequence[str], dst: Sequence[str]) -> list[int]:
    """Adjacent-swap positions taking ``src`` to ``dst``, always fixing the leftmost mismatch."""
    cur = list(src)
    dst = list(dst)
    if sorted(cur) != sorted(dst):
        raise ValueError(f"patterns {''.join(src)} and {''.join(dst)} have different E/F counts")
    route = []
    for p in range(len(cur)):
        if cur[p] == dst[p]:
            continue
        q = cur.index(dst[p], p)
        for r in range(q - 1, p - 1, -1):
            cur[r], cur[r + 1] = cur[r + 1], cur[r]
            route.append(r)
    return route


def random_route(src: Sequence[str], dst: Sequence[str], rng: np.random.Generator) -> list[int]:
    """A random sequence of useful adjacent swaps from ``src`` to ``dst``."""
    cur = list(src)
    dst = list(dst)
    if sorted(cur) != sorted(dst):
        raise ValueError("patterns have different E/F counts")
    # the k-th E of src ends at the k-th E position of dst; same for F
    target = {}
    for letter in (E, F):
        for a, b in zip([i for i, x in enumerate(cur) if x == letter],
                        [i for i, x in enumerate(dst) if x == letter]):
            target[a] = b
    where = [target[i] for i in range(len(cur))]  # final position of the letter now at i
    route = []
    while True:
        moves = [p for p in range(len(cur) - 1) if where[p] > where[p + 1]]
        if not moves:
            break
        p = int(rng.choice(moves))
        cur[p], cur[p + 1] = cur[p + 1], cur[p]
        where[p], where[p + 1] = where[p + 1], where[p]
        route.append(p)
    return route


def apply_route(rel: UnitaryRelation, src: TensorCoeffs, route: Sequence[int]) -> TensorCoeffs:
    src.check(rel)
    pattern = list(src.pattern)
    data = src.data
    for p in route:
        pair = pattern[p] + pattern[p + 1]
        if pair not in ("EF", "FE"):
            raise ValueError(f"move at {p} swaps equal letters {pair}")
        data = swap_axes(rel, data, p, pair)
        pattern[p], pattern[p + 1] = pattern[p + 1], pattern[p]
    return TensorCoeffs(tuple(pattern), data)


def pattern_transform(rel: UnitaryRelation, src: TensorCoeffs, dst_pattern: Sequence[str]) -> TensorCoeffs:
    dst_pattern = tuple(p.upper() for p in dst_pattern)
    if (src.pattern.count(E), src.pattern.count(F)) != (dst_pattern.count(E), dst_pattern.count(F)):
        raise ValueError(f"pattern {''.join(dst_pattern)} has different E/F counts from {''.join(src.pattern)}")
    return apply_route(rel, src, canonical_route(src.pattern, dst_pattern))


def load_unitary(path) -> UnitaryRelation:
    with open(path) as fh:
        return UnitaryRelation.from_json(json.load(fh))


PRUNE = 1e-14


def normal_terms(rel: UnitaryRelation, letters: Sequence[tuple[str, int]]) -> list[tuple[NormalWord, complex]]:
    """Expand a raw generator word into e-first basis words with coefficients.

    For a permutation relation this is a single word with coefficient 1.
    """
    return list(_normal_terms(rel, tuple(letters)))


def _normal_terms(rel: UnitaryRelation, letters: tuple) -> tuple:
    key = (id(rel), letters)
    hit = _TERMS_CACHE.get(key)
    if hit is not None and hit[0] is rel:
        return hit[1]
    from .semigroup import normalize
    if rel.perm is not None:
        out = ((normalize(rel.perm, letters), 1.0 + 0j),)
    else:
        src = TensorCoeffs.basis(rel, letters)
        k = src.pattern.count(E)
        l = src.pattern.count(F)
        dst = pattern_transform(rel, src, (E,) * k + (F,) * l)
        idx = np.argwhere(np.abs(dst.data) > PRUNE)
        out = tuple(
            (NormalWord(tuple(int(x) + 1 for x in row[:k]), tuple(int(x) + 1 for x in row[k:])),
             complex(dst.data[tuple(row)]))
            for row in idx
        )
    if len(_TERMS_CACHE) > 100_000:
        _TERMS_CACHE.clear()
    _TERMS_CACHE[key] = (rel, out)
    return out


_TERMS_CACHE: dict = {}

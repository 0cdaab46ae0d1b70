"""Numeric substrate: operator norms, PSD square roots and sparse helpers.

Dense matrices are plain complex ``numpy`` arrays; sparse operators are
``scipy.sparse`` CSR matrices.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

TAU_PSD = 1e-10
DENSE_LIMIT = 2000
ITER_RESIDUAL = 1e-10


class NotContractiveError(ValueError):
    """Raised when a defect operator would need the square root of a negative operator."""


def cmatrix(a) -> np.ndarray:
    a = np.array(a, dtype=complex)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def sparse_op(rows: int, cols: int, triples) -> sp.csr_matrix:
    """Build a CSR operator from ``(row, col, value)`` triples; duplicates are rejected."""
    triples = list(triples)
    seen = set()
    for r, c, _ in triples:
        if (r, c) in seen:
            raise ValueError(f"duplicate entry at {(r, c)}")
        seen.add((r, c))
    if not triples:
        return sp.csr_matrix((rows, cols), dtype=complex)
    r, c, v = zip(*triples)
    v = np.asarray(v, dtype=complex)
    if not np.all(np.isfinite(v)):
        raise ValueError("sparse operator has non-finite values")
    return sp.csr_matrix((v, (r, c)), shape=(rows, cols), dtype=complex)


def triples(a) -> list[tuple[int, int, complex]]:
    coo = sp.coo_matrix(a)
    return [(int(r), int(c), complex(v)) for r, c, v in zip(coo.row, coo.col, coo.data) if v != 0]


def dense(a) -> np.ndarray:
    if sp.issparse(a):
        return a.toarray()
    return np.asarray(a)


def opnorm(a) -> float:
    """Largest singular value.

    Small operators go through a dense SVD.  Larger sparse ones use Lanczos on the
    smaller Gram matrix and the result is accepted only if its eigen-residual is
    below ``ITER_RESIDUAL`` relative to the eigenvalue.
    """
    rows, cols = a.shape
    if rows == 0 or cols == 0:
        raise ValueError("operator norm of an empty matrix")
    if min(rows, cols) <= DENSE_LIMIT or not sp.issparse(a):
        d = dense(a)
        if d.size == 0:
            raise ValueError("operator norm of an empty matrix")
        return float(np.linalg.norm(d, 2))
    a = sp.csr_matrix(a)
    ah = a.conj().T.tocsr()
    if rows <= cols:
        gram = spla.LinearOperator((rows, rows), matvec=lambda x: a @ (ah @ x), dtype=complex)
        size = rows
    else:
        gram = spla.LinearOperator((cols, cols), matvec=lambda x: ah @ (a @ x), dtype=complex)
        size = cols
    v0 = np.ones(size, dtype=complex) / np.sqrt(size)
    vals, vecs = spla.eigsh(gram, k=1, which="LA", tol=1e-14, v0=v0, maxiter=20 * size)
    lam = float(vals[0])
    x = vecs[:, 0]
    resid = np.linalg.norm(gram.matvec(x) - lam * x)
    if lam > 0 and resid > ITER_RESIDUAL * max(lam, 1.0):
        raise RuntimeError(f"Lanczos norm did not converge (residual {resid:.2e})")
    return float(np.sqrt(max(lam, 0.0)))


def psd_sqrt(a, tol: float = TAU_PSD) -> np.ndarray:
    """Positive square root.  Eigenvalues within rounding of zero are set to zero so
    that an exact isometry gives an exactly zero defect instead of ``sqrt(eps)`` noise."""
    a = cmatrix(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError("psd_sqrt needs a square matrix")
    herm = 0.5 * (a + a.conj().T)
    if np.abs(herm - a).max(initial=0.0) > 1e-9:
        raise ValueError("psd_sqrt needs a Hermitian matrix")
    w, v = np.linalg.eigh(herm)
    if w.size and w.min() < -tol:
        raise NotContractiveError(f"matrix has eigenvalue {w.min():.3e} below -{tol:.0e}")
    floor = 64 * np.finfo(float).eps * max(1.0, float(np.abs(w).max(initial=0.0)))
    w = np.where(w > floor, w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def orth(vectors: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis of the column span, via SVD with a relative rank cut."""
    if vectors.shape[1] == 0:
        return np.zeros((vectors.shape[0], 0), dtype=complex)
    uu, s, _ = np.linalg.svd(vectors, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((vectors.shape[0], 0), dtype=complex)
    rank = int(np.sum(s > tol * max(1.0, s[0])))
    return uu[:, :rank]


def null_space_of(q: np.ndarray, dim: int, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of ``span(q)`` in ``C^dim``."""
    if q.shape[1] == 0:
        return np.eye(dim, dtype=complex)
    uu, s, _ = np.linalg.svd(q, full_matrices=True)
    rank = int(np.sum(s > tol))
    return uu[:, rank:]


def hstack_ops(ops) -> np.ndarray:
    return np.hstack([dense(o) for o in ops])


def max_abs(a) -> float:
    a = dense(a)
    return float(np.abs(a).max()) if a.size else 0.0


def round12(obj):
    """Round every float to 12 significant digits for deterministic output."""
    if isinstance(obj, bool) or obj is None:
        return obj
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if not np.isfinite(x) else float(f"{x:.12g}")
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, dict):
        return {k: round12(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round12(v) for v in obj]
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj

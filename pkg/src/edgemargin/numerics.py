"""Small dense real linear algebra.

Matrices are plain ``float64`` numpy arrays; complex scalars are Python
``complex``.  The heavy lifting lives in :mod:`edgemargin.kernels`.
"""
import numpy as np

from . import kernels
from .errors import NoConvergence, SingularMatrix

PIVOT_TOL = 1e-12
NULL_REL_TOL = 1e-9


def as_matrix(a, name="matrix"):
    """Coerce to a finite 2-D float array (1-D input becomes a single row)."""
    arr = np.array(a, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def solve_linear(a, b, pivot_tol=PIVOT_TOL):
    """Solve ``a x = b`` by LU with row pivoting.

    ``b`` may be a vector or a matrix; the result has the same shape.
    """
    a = as_matrix(a, "a")
    b_arr = np.asarray(b, dtype=float)
    vector = b_arr.ndim == 1
    b2 = b_arr[:, None] if vector else as_matrix(b_arr, "b")
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"a must be square, got {a.shape}")
    if b2.shape[0] != a.shape[0]:
        raise ValueError(f"b has {b2.shape[0]} rows, expected {a.shape[0]}")
    if a.shape[0] == 0:
        return b_arr.copy()
    x, ok = kernels.lu_solve(a, np.ascontiguousarray(b2), pivot_tol)
    if not ok:
        raise SingularMatrix("pivot below tolerance in LU factorisation")
    return x[:, 0] if vector else x


def inverse(a, pivot_tol=PIVOT_TOL):
    a = as_matrix(a, "a")
    return solve_linear(a, np.eye(a.shape[0]), pivot_tol)


def eigenvalues(a, max_sweeps=None):
    """All eigenvalues of a real square matrix, with multiplicity.

    Balancing, Householder reduction to Hessenberg form, then Francis
    double-shift QR.  The sweep budget defaults to ``100 * n``.
    Complex pairs come out as exact conjugates.
    """
    a = as_matrix(a, "a")
    n = a.shape[0]
    if n != a.shape[1]:
        raise ValueError(f"a must be square, got {a.shape}")
    if n == 0:
        return np.zeros(0, dtype=complex)
    budget = 100 * n if max_sweeps is None else int(max_sweeps)
    wr, wi, ok = kernels.eig_real(np.ascontiguousarray(a), budget)
    if not ok:
        raise NoConvergence(f"QR iteration did not deflate within {budget} sweeps")
    return wr + 1j * wi


def spectral_radius(a):
    ev = eigenvalues(a)
    return float(np.max(np.abs(ev))) if ev.size else 0.0


def _default_tol(a):
    if a.size == 0:
        return 0.0
    return NULL_REL_TOL * float(np.max(np.linalg.norm(a, axis=0)))


def _row_space_qr(a, tol):
    """QR of ``a.T``; returns ``(q, numerical rank)``."""
    q, r, _ = kernels.qr_pivoted(np.ascontiguousarray(a.T))
    k = min(r.shape)
    diag = np.abs(np.diag(r)[:k])
    return q, int(np.sum(diag > tol))


def null_space_orthonormal(a, tol=None):
    """Orthonormal basis (as columns) of the numerical null space of ``a``.

    ``tol`` is an absolute threshold on the pivoted-QR diagonal; the default
    is ``1e-9`` times the largest column norm.
    """
    a = as_matrix(a, "a")
    if tol is None:
        tol = _default_tol(a)
    elif tol <= 0:
        raise ValueError("tol must be positive")
    cols = a.shape[1]
    if a.shape[0] == 0:
        return np.eye(cols)
    q, rk = _row_space_qr(a, tol)
    return q[:, rk:].copy()


def rank(a, tol=None):
    """Numerical rank; consistent with :func:`null_space_orthonormal` at the same ``tol``."""
    a = as_matrix(a, "a")
    if tol is None:
        tol = _default_tol(a)
    elif tol <= 0:
        raise ValueError("tol must be positive")
    if a.shape[0] == 0 or a.shape[1] == 0:
        return 0
    return _row_space_qr(a, tol)[1]


def orthonormalize(vectors):
    """Modified Gram-Schmidt (twice) on the columns of ``vectors``."""
    v = np.array(vectors, dtype=float)
    out = np.zeros_like(v)
    for j in range(v.shape[1]):
        x = v[:, j].copy()
        for _ in range(2):
            for i in range(j):
                x -= (out[:, i] @ x) * out[:, i]
        norm = np.linalg.norm(x)
        if norm == 0.0:
            raise SingularMatrix("columns are linearly dependent")
        out[:, j] = x / norm
    return out

"""Sparse SPD linear solver for the Picard-linearized diffusion systems.

CSR matrix-vector products run thread-parallel over rows with sequential
per-row accumulation, and every dot product reduces over fixed-size
blocks followed by an in-order sum of the partials. The result is
bit-identical no matter how many threads execute the kernels, which is
what makes whole simulations reproducible across thread counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

__all__ = [
    "SparseSystem",
    "CgResult",
    "LinearSolveError",
    "spmv",
    "solve_cg",
]

_BLOCK = 8192  # fixed reduction block; independent of the thread count


@nb.njit(parallel=True, cache=True)
def _spmv_kernel(indptr, indices, data, x, out):
    n = indptr.shape[0] - 1
    for row in nb.prange(n):
        acc = 0.0
        for k in range(indptr[row], indptr[row + 1]):
            acc += data[k] * x[indices[k]]
        out[row] = acc


@nb.njit(parallel=True, cache=True)
def _dot_kernel(a, b):
    n = a.shape[0]
    nblocks = (n + _BLOCK - 1) // _BLOCK
    partial = np.empty(nblocks)
    for ib in nb.prange(nblocks):
        lo = ib * _BLOCK
        hi = min(lo + _BLOCK, n)
        s = 0.0
        for i in range(lo, hi):
            s += a[i] * b[i]
        partial[ib] = s
    total = 0.0
    for ib in range(nblocks):
        total += partial[ib]
    return total


@nb.njit(parallel=True, cache=True)
def _axpy_kernel(y, alpha, x):
    for i in nb.prange(y.shape[0]):
        y[i] += alpha * x[i]


@nb.njit(parallel=True, cache=True)
def _xpay_kernel(p, beta, z):
    for i in nb.prange(p.shape[0]):
        p[i] = z[i] + beta * p[i]


@nb.njit(parallel=True, cache=True)
def _residual_kernel(b, ax, out):
    for i in nb.prange(b.shape[0]):
        out[i] = b[i] - ax[i]


@nb.njit(parallel=True, cache=True)
def _jacobi_kernel(z, r, inv_diag):
    for i in nb.prange(z.shape[0]):
        z[i] = r[i] * inv_diag[i]


@nb.njit(parallel=True, cache=True)
def _extract_diag(indptr, indices, data, out):
    n = indptr.shape[0] - 1
    for row in nb.prange(n):
        d = 0.0
        for k in range(indptr[row], indptr[row + 1]):
            if indices[k] == row:
                d = data[k]
                break
        out[row] = d


@nb.njit(parallel=True, cache=True)
def _all_finite(a):
    n = a.shape[0]
    nblocks = (n + _BLOCK - 1) // _BLOCK
    flags = np.ones(nblocks, dtype=np.uint8)
    for ib in nb.prange(nblocks):
        lo = ib * _BLOCK
        hi = min(lo + _BLOCK, n)
        ok = True
        for i in range(lo, hi):
            if not np.isfinite(a[i]):
                ok = False
        flags[ib] = 1 if ok else 0
    return bool(flags.min() == 1) if nblocks else True


def all_finite(a: np.ndarray) -> bool:
    """Thread-parallel finiteness scan."""
    return _all_finite(np.ascontiguousarray(a, dtype=np.float64))


@dataclass
class SparseSystem:
    """Row-compressed linear system A x = b.

    The Picard assembly produces an M-matrix: strictly positive
    diagonal, non-positive off-diagonals, structurally symmetric.
    """

    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    rhs: np.ndarray
    symmetric: bool = True

    def __post_init__(self):
        self.indptr = np.ascontiguousarray(self.indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(self.indices, dtype=np.int32)
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        self.rhs = np.ascontiguousarray(self.rhs, dtype=np.float64)
        if self.indptr.ndim != 1 or self.indptr[0] != 0:
            raise ValueError("malformed CSR indptr")
        if self.rhs.shape[0] != self.n:
            raise ValueError(
                f"rhs has {self.rhs.shape[0]} entries for a {self.n}-row matrix"
            )

    @property
    def n(self) -> int:
        return self.indptr.shape[0] - 1

    def diagonal(self) -> np.ndarray:
        out = np.empty(self.n)
        _extract_diag(self.indptr, self.indices, self.data, out)
        return out

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return spmv(self, x)


def spmv(system: SparseSystem, x: np.ndarray) -> np.ndarray:
    """Matrix-vector product with fixed-order per-row accumulation."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.shape[0] != system.n:
        raise ValueError(f"vector length {x.shape[0]} != matrix dimension {system.n}")
    out = np.empty_like(x)
    _spmv_kernel(system.indptr, system.indices, system.data, x, out)
    return out


@dataclass
class CgResult:
    x: np.ndarray
    n_iter: int
    residual: float  # final relative 2-norm residual
    history: np.ndarray  # relative |b - A x| per iteration, incl. start
    precond_history: np.ndarray  # sqrt(r' M^-1 r) per iteration


class LinearSolveError(RuntimeError):
    """CG failed; carries the relative-residual history."""

    def __init__(self, message: str, history):
        super().__init__(message)
        self.history = np.asarray(history)


def solve_cg(
    system: SparseSystem,
    x0: np.ndarray,
    rel_tol: float,
    max_iter: int,
    preconditioner: str = "jacobi",
    check_finite: bool = True,
) -> CgResult:
    """Preconditioned conjugate gradients for SPD systems.

    Converged when |b - A x|_2 / |b|_2 <= rel_tol; raises
    :class:`LinearSolveError` after ``max_iter`` iterations otherwise.
    ``check_finite=False`` skips the entry scan when the caller has just
    validated the system.
    """
    if not (0.0 < rel_tol < 1.0):
        raise ValueError(f"rel_tol must be in (0, 1), got {rel_tol}")
    if preconditioner not in ("jacobi", "none"):
        raise ValueError(f"unknown preconditioner {preconditioner!r}")
    if not system.symmetric:
        raise ValueError("solve_cg requires a symmetric system")
    if check_finite and (not all_finite(system.data) or not all_finite(system.rhs)):
        raise ValueError("system contains non-finite entries")
    x = np.array(x0, dtype=np.float64, copy=True)
    if x.shape[0] != system.n:
        raise ValueError(f"x0 length {x.shape[0]} != matrix dimension {system.n}")
    if not np.all(np.isfinite(x)):
        raise ValueError("initial guess contains non-finite entries")

    b = system.rhs
    b_norm = np.sqrt(_dot_kernel(b, b))
    if b_norm == 0.0:
        zeros = np.zeros_like(x)
        return CgResult(zeros, 0, 0.0, np.array([0.0]), np.array([0.0]))

    if preconditioner == "jacobi":
        diag = system.diagonal()
        if np.any(diag <= 0):
            raise ValueError("Jacobi preconditioner requires a positive diagonal")
        inv_diag = 1.0 / diag
    else:
        inv_diag = None

    r = np.empty_like(x)
    _residual_kernel(b, spmv(system, x), r)
    z = np.empty_like(x)
    if inv_diag is None:
        z[:] = r
    else:
        _jacobi_kernel(z, r, inv_diag)
    rz = _dot_kernel(r, z)
    rel = np.sqrt(_dot_kernel(r, r)) / b_norm
    history = [rel]
    precond_history = [np.sqrt(max(rz, 0.0))]
    if rel <= rel_tol:
        return CgResult(x, 0, rel, np.array(history), np.array(precond_history))

    p = z.copy()
    q = np.empty_like(x)
    for k in range(1, max_iter + 1):
        _spmv_kernel(system.indptr, system.indices, system.data, p, q)
        pq = _dot_kernel(p, q)
        if pq <= 0.0 or not np.isfinite(pq):
            raise LinearSolveError(
                f"matrix is not positive definite (p'Ap = {pq:.3e} at iteration {k})",
                history,
            )
        alpha = rz / pq
        _axpy_kernel(x, alpha, p)
        _axpy_kernel(r, -alpha, q)
        rel = np.sqrt(_dot_kernel(r, r)) / b_norm
        history.append(rel)
        if inv_diag is None:
            z[:] = r
        else:
            _jacobi_kernel(z, r, inv_diag)
        rz_new = _dot_kernel(r, z)
        precond_history.append(np.sqrt(max(rz_new, 0.0)))
        if rel <= rel_tol:
            return CgResult(x, k, rel, np.array(history), np.array(precond_history))
        beta = rz_new / rz
        rz = rz_new
        _xpay_kernel(p, beta, z)

    raise LinearSolveError(
        f"CG did not reach rel_tol={rel_tol:.3e} in {max_iter} iterations "
        f"(final residual {history[-1]:.3e})",
        history,
    )

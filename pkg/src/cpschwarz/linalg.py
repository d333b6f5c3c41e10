"""Sparse storage helpers, direct factorization and right-preconditioned GMRES.

Compressed sparse row storage is scipy's ``csr_matrix``; the direct solver
is SuperLU with a column approximate-minimum-degree ordering.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import Breakdown, DimensionMismatch, SingularMatrix

PIVOT_THRESHOLD = 0.1
SINGULAR_RTOL = 1e-14


@dataclass
class SolveReport:
    iterations: int = 0
    residual_history: list = field(default_factory=list)
    converged: bool = False
    wall_time: float = 0.0
    status: str = "running"
    config: dict = field(default_factory=dict)

    @property
    def initial_residual(self):
        return self.residual_history[0] if self.residual_history else float("nan")

    @property
    def final_residual(self):
        return self.residual_history[-1] if self.residual_history else float("nan")

    @property
    def relative_residual(self):
        r0 = self.initial_residual
        return self.final_residual / r0 if r0 > 0 else 0.0

    def to_dict(self):
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "status": self.status,
            "wall_time": self.wall_time,
            "initial_residual": self.initial_residual,
            "final_residual": self.final_residual,
            "relative_residual": self.relative_residual,
            "config": dict(self.config),
        }

    def write_csv(self, path):
        r0 = self.initial_residual
        with open(path, "w") as fh:
            fh.write("iteration,residual_2norm,relative_residual\n")
            for k, r in enumerate(self.residual_history):
                rel = r / r0 if r0 > 0 else 0.0
                fh.write(f"{k},{r!r},{rel!r}\n")


def as_csr(A):
    """Canonical CSR: merged duplicates, sorted column indices."""
    A = sp.csr_matrix(A)
    A.sum_duplicates()
    A.sort_indices()
    return A


def check_csr(A):
    """Validate the CSR invariants; returns ``A`` for chaining."""
    ptr, idx = A.indptr, A.indices
    if ptr[0] != 0 or np.any(np.diff(ptr) < 0) or ptr[-1] != len(idx):
        raise ValueError("row offsets are not nondecreasing")
    if len(idx) and (idx.min() < 0 or idx.max() >= A.shape[1]):
        raise ValueError("column index out of bounds")
    for i in range(A.shape[0]):
        row = idx[ptr[i]:ptr[i + 1]]
        if np.any(np.diff(row) <= 0):
            raise ValueError(f"row {i} has unsorted or repeated column indices")
    return A


def spmv(A, x):
    x = np.asarray(x)
    if x.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"matrix has {A.shape[1]} columns, vector has {x.shape[0]} entries")
    return A @ x


class Factorization:
    """Sparse LU ``Pr A Pc = L U`` with threshold partial pivoting."""

    def __init__(self, A, pivot_threshold=PIVOT_THRESHOLD):
        A = sp.csc_matrix(A)
        if A.shape[0] != A.shape[1]:
            raise DimensionMismatch(f"cannot factor a {A.shape} matrix")
        self.shape = A.shape
        self.pivot_threshold = pivot_threshold
        self.scale = float(abs(A).max()) if A.nnz else 0.0
        if self.scale == 0.0:
            raise SingularMatrix("matrix is identically zero")
        try:
            self._lu = spla.splu(A, permc_spec="COLAMD", diag_pivot_thresh=pivot_threshold)
        except RuntimeError as exc:
            raise SingularMatrix(str(exc)) from None
        piv = np.abs(self._lu.U.diagonal())
        if piv.min() < SINGULAR_RTOL * self.scale:
            raise SingularMatrix(
                f"pivot {piv.min():.3e} below {SINGULAR_RTOL:g} * max|A| = {SINGULAR_RTOL * self.scale:.3e}"
            )

    @property
    def perm_r(self):
        return self._lu.perm_r

    @property
    def perm_c(self):
        return self._lu.perm_c

    @property
    def L(self):
        return self._lu.L

    @property
    def U(self):
        return self._lu.U

    @property
    def nnz(self):
        return self._lu.L.nnz + self._lu.U.nnz

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.shape[0]:
            raise DimensionMismatch(f"rhs has {b.shape[0]} entries, expected {self.shape[0]}")
        return self._lu.solve(b)


def lu_factor(A, pivot_threshold=PIVOT_THRESHOLD):
    return Factorization(A, pivot_threshold)


def _as_operator(A):
    if callable(A):
        return A
    return lambda x: A @ x


def gmres(A, b, M=None, rtol=1e-6, restart=30, max_iter=1000, x0=None, callback=None):
    """Restarted GMRES with right preconditioning.

    Solves ``A M y = b`` and returns ``x = M y``, so the tracked residual
    norms are those of the unpreconditioned system. ``A`` and ``M`` may be
    matrices or callables. Convergence is declared when
    ``||b - A x|| <= rtol ||b||`` holds for the true residual.

    Returns ``(x, report)``; on hitting ``max_iter`` the best iterate is
    returned with ``report.converged = False``.
    """
    if not 0.0 < rtol < 1.0:
        raise ValueError("rtol must lie in (0, 1)")
    if restart < 1:
        raise ValueError("restart must be at least 1")
    t0 = time.perf_counter()
    apply_A = _as_operator(A)
    apply_M = (lambda v: v) if M is None else _as_operator(M)
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    report = SolveReport(config={"restart": restart, "rtol": rtol})

    bnorm = np.linalg.norm(b)
    r = b - apply_A(x) if x0 is not None else b.copy()
    beta = np.linalg.norm(r)
    report.residual_history.append(beta)
    target = rtol * bnorm
    if beta <= target:
        report.converged = True
        report.status = "converged"
        report.wall_time = time.perf_counter() - t0
        return x, report

    iters = 0
    while iters < max_iter:
        m = min(restart, max_iter - iters)
        V = np.zeros((m + 1, n))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        k = 0
        broke = False
        for j in range(m):
            w = apply_A(apply_M(V[j]))
            wnorm = np.linalg.norm(w)
            for i in range(j + 1):
                H[i, j] = np.dot(V[i], w)
                w -= H[i, j] * V[i]
            H[j + 1, j] = np.linalg.norm(w)
            broke = H[j + 1, j] <= 1e-14 * max(wnorm, np.finfo(float).tiny)
            if not broke:
                V[j + 1] = w / H[j + 1, j]
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            denom = np.hypot(H[j, j], H[j + 1, j])
            if denom == 0.0:
                raise Breakdown("Arnoldi produced a zero column; the operator is singular on the Krylov space")
            cs[j] = H[j, j] / denom
            sn[j] = H[j + 1, j] / denom
            H[j, j] = denom
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            k = j + 1
            iters += 1
            est = abs(g[j + 1])
            report.residual_history.append(est)
            if callback is not None:
                callback(iters, est)
            if est <= target or broke:
                break
        y = np.linalg.solve(np.triu(H[:k, :k]), g[:k])
        x = x + apply_M(V[:k].T @ y)
        r = b - apply_A(x)
        beta = np.linalg.norm(r)
        report.residual_history[-1] = beta
        if beta <= target:
            report.converged = True
            break
        if broke:
            raise Breakdown(
                f"Arnoldi breakdown at iteration {iters} with true residual {beta:.3e} above target {target:.3e}"
            )
    report.iterations = iters
    report.status = "converged" if report.converged else "max_iter"
    report.wall_time = time.perf_counter() - t0
    return x, report

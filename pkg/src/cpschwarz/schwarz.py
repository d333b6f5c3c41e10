"""Stationary (optimized) restricted additive Schwarz and its preconditioner form."""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import ConfigError, Diverged, SingularBlock, SingularMatrix
from .linalg import Factorization, SolveReport

DIVERGENCE_FACTOR = 1e8


def check_cover(subdomains, n_active):
    """The owned pieces must tile the active nodes exactly once."""
    owned = np.concatenate([s.disjoint for s in subdomains]) if subdomains else np.zeros(0, int)
    counts = np.bincount(owned, minlength=n_active)
    if len(counts) != n_active or np.any(counts != 1):
        raise ConfigError("subdomain pieces do not form a disjoint cover of the active nodes")


class SchwarzPreconditioner:
    """One additive sweep: sum over subdomains of the restricted local solves."""

    def __init__(self, subdomains, n_active, threads=1, audit=False):
        check_cover(subdomains, n_active)
        self.subdomains = list(subdomains)
        self.n = n_active
        self.threads = threads
        self.audit = audit
        self._pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None

    def corrections(self, r):
        work = lambda s: s.correction(r)
        if self._pool is not None:
            return list(self._pool.map(work, self.subdomains))
        return [work(s) for s in self.subdomains]

    def apply(self, r, out=None):
        z = np.zeros(self.n) if out is None else out
        if self.audit:
            writes = np.zeros(self.n, dtype=np.int64)
        for idx, vals in self.corrections(r):
            z[idx] += vals
            if self.audit:
                writes[idx] += 1
        if self.audit and np.any(writes != 1):
            raise AssertionError("restricted update touched a node owned by another subdomain")
        return z

    __call__ = apply

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None


def apply_schwarz_preconditioner(r, subdomains, threads=1):
    return SchwarzPreconditioner(subdomains, len(r), threads).apply(np.asarray(r, dtype=float))


def schwarz_solve(A, f, subdomains, rtol=1e-6, max_iter=1000, u0=None, threads=1,
                  audit=False, config=None, callback=None):
    """Stationary RAS/ORAS iteration in correction form.

    Each iteration computes the true residual ``r = f - A u``, solves every
    local problem with the restricted residual and zero transmission data,
    and adds each local correction on the owned piece only. Stops when
    ``||r|| <= rtol ||r_0||``; reaching ``max_iter`` returns the iterate
    with ``report.converged = False``.

    Raises
    ------
    Diverged
        If the residual grows beyond ``1e8`` times its initial value.
    """
    t0 = time.perf_counter()
    f = np.asarray(f, dtype=float)
    n = f.shape[0]
    u = np.zeros(n) if u0 is None else np.array(u0, dtype=float)
    M = SchwarzPreconditioner(subdomains, n, threads, audit)
    report = SolveReport(config=dict(config or {}, rtol=rtol, max_iter=max_iter))
    try:
        r = f - A @ u
        r0 = np.linalg.norm(r)
        report.residual_history.append(r0)
        it = 0
        while True:
            rn = report.residual_history[-1]
            if rn <= rtol * r0:
                report.converged = True
                break
            if rn > DIVERGENCE_FACTOR * r0:
                report.status = "diverged"
                report.iterations = it
                report.wall_time = time.perf_counter() - t0
                raise Diverged(
                    f"residual grew from {r0:.3e} to {rn:.3e} after {it} iterations", report
                )
            if it >= max_iter:
                break
            u += M.apply(r)
            it += 1
            r = f - A @ u
            report.residual_history.append(np.linalg.norm(r))
            if callback is not None:
                callback(it, report.residual_history[-1])
    finally:
        M.close()
    report.iterations = it
    report.status = "converged" if report.converged else "max_iter"
    report.wall_time = time.perf_counter() - t0
    return u, report


class BlockJacobi:
    """Non-overlapping block diagonal preconditioner over the partition pieces."""

    def __init__(self, A, partition):
        self.n = A.shape[0]
        self.blocks = []
        A = A.tocsr()
        for k, idx in enumerate(partition.parts()):
            try:
                F = Factorization(A[idx][:, idx])
            except SingularMatrix as exc:
                raise SingularBlock(f"diagonal block {k} is singular: {exc}") from None
            self.blocks.append((idx, F))

    def apply(self, r):
        z = np.zeros(self.n)
        for idx, F in self.blocks:
            z[idx] = F.solve(r[idx])
        return z

    __call__ = apply


def block_jacobi_baseline(A, partition):
    return BlockJacobi(A, partition)

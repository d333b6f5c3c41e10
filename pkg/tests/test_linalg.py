import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from hypothesis import given, strategies as st

from cpschwarz.errors import Breakdown, DimensionMismatch, SingularMatrix
from cpschwarz.linalg import SolveReport, as_csr, check_csr, gmres, lu_factor, spmv


def test_spmv():
    x = np.array([1.0, -2.0, 3.0])
    assert np.array_equal(spmv(sp.identity(3, format="csr"), x), x)
    assert np.array_equal(spmv(sp.csr_matrix((3, 3)), x), np.zeros(3))
    D = np.array([[1.0, 0, 2], [0, 3, 0], [4, 0, 5]])
    assert np.array_equal(spmv(as_csr(D), x), [7.0, -6.0, 19.0])
    with pytest.raises(DimensionMismatch):
        spmv(as_csr(D), np.ones(4))


def test_csr_invariants():
    A = as_csr(sp.coo_matrix(([1.0, 2.0, 3.0], ([0, 0, 1], [2, 2, 0])), shape=(2, 3)))
    check_csr(A)
    assert A[0, 2] == 3.0 and A.nnz == 2
    bad = sp.csr_matrix((np.ones(2), np.array([1, 0]), np.array([0, 2])), shape=(1, 2))
    with pytest.raises(ValueError):
        check_csr(bad)


def _plu_residual(F, A):
    n = A.shape[0]
    Pr = sp.csc_matrix((np.ones(n), (F.perm_r, np.arange(n))))
    Pc = sp.csc_matrix((np.ones(n), (np.arange(n), F.perm_c)))
    return abs(Pr @ A @ Pc - F.L @ F.U).max() / abs(A).max()


def test_lu_identity_and_permutation():
    F = lu_factor(sp.identity(4, format="csr"))
    assert np.allclose(F.L.toarray(), np.eye(4)) and np.allclose(F.U.toarray(), np.eye(4))
    P = as_csr(np.array([[0.0, 1.0], [1.0, 0.0]]))
    F = lu_factor(P)
    assert np.allclose(F.solve([1.0, 2.0]), [2.0, 1.0])
    assert _plu_residual(F, P) <= 1e-14


def test_lu_random_sparse(rng):
    A = sp.random(50, 50, density=0.1, random_state=3, format="csr") + 10 * sp.identity(50)
    F = lu_factor(A)
    b = rng.normal(size=50)
    assert np.linalg.norm(A @ F.solve(b) - b) / np.linalg.norm(b) < 1e-10
    assert _plu_residual(F, A) < 1e-10
    assert F.pivot_threshold == 0.1


def test_lu_errors():
    with pytest.raises(SingularMatrix):
        lu_factor(as_csr(np.array([[1.0, 2.0], [2.0, 4.0]])))
    with pytest.raises(SingularMatrix):
        lu_factor(sp.csr_matrix((3, 3)))
    with pytest.raises(DimensionMismatch):
        lu_factor(sp.csr_matrix((2, 3)))
    with pytest.raises(DimensionMismatch):
        lu_factor(sp.identity(3)).solve(np.ones(2))


def test_gmres_identity():
    b = np.array([1.0, -4.0, 2.0])
    x, rep = gmres(sp.identity(3), b)
    assert rep.converged and rep.iterations == 1 and np.allclose(x, b)


def test_gmres_diagonal_monotone():
    A = sp.diags(np.linspace(1.0, 10.0, 40))
    b = np.ones(40)
    x, rep = gmres(A, b, rtol=1e-10, restart=50)
    h = np.array(rep.residual_history)
    assert rep.converged and np.all(np.diff(h) < 0)
    assert len(h) == rep.iterations + 1


def test_gmres_matches_direct_on_circle(circle):
    A, f = circle.A, circle.f
    xd = spla.spsolve(A.tocsc(), f)
    x, rep = gmres(A, f, rtol=1e-10, restart=50, max_iter=5000)
    assert rep.converged
    assert np.linalg.norm(x - xd) / np.linalg.norm(xd) < 1e-8
    assert np.linalg.norm(f - A @ x) <= 1e-10 * np.linalg.norm(f) * (1 + 1e-9)


def test_gmres_right_preconditioning_exact():
    A = sp.random(30, 30, density=0.2, random_state=1) + 5 * sp.identity(30)
    F = lu_factor(A)
    x, rep = gmres(A, np.ones(30), M=F.solve)
    assert rep.iterations == 1 and np.allclose(A @ x, 1.0)


def test_gmres_max_iter_and_arguments():
    A = sp.diags(np.linspace(1.0, 1e4, 200))
    x, rep = gmres(A, np.ones(200), rtol=1e-12, restart=5, max_iter=10)
    assert not rep.converged and rep.status == "max_iter" and rep.iterations == 10
    with pytest.raises(ValueError):
        gmres(A, np.ones(200), rtol=0.0)
    with pytest.raises(ValueError):
        gmres(A, np.ones(200), restart=0)


def test_gmres_zero_rhs_and_breakdown():
    x, rep = gmres(sp.identity(3), np.zeros(3))
    assert rep.converged and rep.iterations == 0 and np.all(x == 0)
    with pytest.raises(Breakdown):
        gmres(as_csr(np.array([[0.0, 0.0], [0.0, 1.0]])), np.array([1.0, 0.0]))


@given(st.integers(0, 10_000), st.integers(1, 8))
def test_gmres_monotone_within_cycles(seed, restart):
    r = np.random.default_rng(seed)
    n = 25
    A = np.eye(n) * 4 + r.normal(size=(n, n)) * 0.5
    b = r.normal(size=n)
    seen = []
    x, rep = gmres(A, b, rtol=1e-8, restart=restart, max_iter=200, callback=lambda k, e: seen.append((k, e)))
    est = [e for _, e in seen]
    for start in range(0, len(est), restart):
        cyc = est[start:start + restart]
        assert all(b2 <= a2 * (1 + 1e-12) for a2, b2 in zip(cyc, cyc[1:]))
    if rep.converged:
        assert np.linalg.norm(b - A @ x) <= 1e-8 * np.linalg.norm(b) * (1 + 1e-9)


def test_report_csv(tmp_path):
    rep = SolveReport(iterations=2, residual_history=[4.0, 2.0, 1.0], converged=True)
    rep.write_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "iteration,residual_2norm,relative_residual"
    assert lines[-1] == "2,1.0,0.25"
    assert rep.to_dict()["relative_residual"] == 0.25

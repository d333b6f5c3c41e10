import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from hypothesis import given, strategies as st

from cpschwarz.band import build_band
from cpschwarz.geometry import Circle, Sphere
from cpschwarz.operators import (
    EXACT_SOLUTIONS, RHS_PRESETS, assemble_extension, assemble_helmholtz, assemble_laplacian,
    export_matrix_market, import_matrix_market, interp_weights_1d, polar_angles, sample_rhs,
)


def lagrange_basis(p, t):
    # direct product formula, independent of the barycentric form
    nodes = np.arange(p + 1)
    return np.array([np.prod([(t - m) / (j - m) for m in nodes if m != j]) for j in nodes])


def test_weight_examples():
    assert np.allclose(interp_weights_1d(1, 0.5), [0.5, 0.5])
    assert np.array_equal(interp_weights_1d(2, 1.0), [0.0, 1.0, 0.0])
    assert np.allclose(interp_weights_1d(2, 0.5), [0.375, 0.75, -0.125], atol=1e-15)
    with pytest.raises(ValueError):
        interp_weights_1d(7, 0.5)


@given(st.integers(0, 6), st.floats(-0.5, 6.5, allow_nan=False))
def test_weights_match_lagrange_basis(p, t):
    t = min(t, p + 0.5)
    w = interp_weights_1d(p, t)
    assert abs(w.sum() - 1.0) <= 1e-12
    assert np.allclose(w, lagrange_basis(p, t), atol=1e-9)


def test_extension_rows(circle):
    E = circle.E
    b = circle.band
    assert E.shape == (b.n_nodes, b.n_active)
    assert np.all(np.diff(E.indptr) == (b.degree + 1) ** b.dim)
    assert np.abs(np.asarray(E.sum(axis=1)).ravel() - 1).max() <= 1e-12
    assert np.allclose(E @ np.ones(b.n_active), 1.0, atol=1e-12)


@pytest.mark.parametrize("kind", ["circle", "sphere"])
def test_extension_reproduces_polynomials(kind, circle, sphere_coarse):
    prob = circle if kind == "circle" else sphere_coarse
    b, E = prob.band, prob.E
    P = b.points
    Q = b.cp
    rng = np.random.default_rng(7)
    coef = rng.normal(size=6)
    def poly(X):
        x, y = X[:, 0], X[:, 1]
        return coef[0] + coef[1] * x + coef[2] * y + coef[3] * x * x + coef[4] * x * y + coef[5] * y * y
    v = poly(P[: b.n_active])
    assert np.abs(E @ v - poly(Q)).max() <= 1e-10 * np.abs(v).max()


def test_laplacian_rows(circle):
    L = circle.ops.laplacian
    b = circle.band
    assert L.shape == (b.n_active, b.n_nodes)
    assert np.all(np.diff(L.indptr) <= 2 * b.dim + 1)
    assert np.abs(L @ np.ones(b.n_nodes)).max() <= 1e-10
    x = b.points[:, 0]
    assert np.allclose(L @ x ** 2, 2.0, atol=1e-10)
    diag = L.diagonal()
    assert np.allclose(diag, -2 * b.dim / b.dx ** 2)


def test_helmholtz_entrywise(circle):
    b, ops = circle.band, circle.ops
    k = 2 * b.dim / b.dx ** 2
    Ld = ops.laplacian.toarray()
    Ed = ops.extension.toarray()
    I = np.eye(b.n_active, b.n_nodes)
    ref = (circle.c + k) * np.eye(b.n_active) - (k * I + Ld) @ Ed
    assert np.allclose(circle.A.toarray(), ref, atol=1e-9)
    assert np.allclose(circle.A @ np.ones(b.n_active), circle.c, atol=1e-10 * circle.c * k)


def test_helmholtz_requires_positive_c(circle):
    with pytest.raises(ValueError):
        assemble_helmholtz(circle.band, 0.0)


def test_stabilized_identity(circle, rng):
    b, ops = circle.band, circle.ops
    na = b.n_active
    k = 2 * b.dim / b.dx ** 2
    LB = ops.laplace_beltrami(b.dim, b.dx)
    for _ in range(5):
        v = rng.normal(size=na)
        Ev = ops.extension @ v
        assert np.allclose(LB @ v, ops.laplacian @ Ev + k * (Ev[:na] - v), atol=1e-8)
    one = np.ones(na)
    assert np.abs(LB @ one - ops.laplacian @ (ops.extension @ one)).max() <= 1e-10


def _residual_errors(kind, dxs):
    errs = []
    for dx in dxs:
        b = build_band(Circle() if kind == "circle" else Sphere(), dx, 2)
        A = assemble_helmholtz(b, 1.0)
        u = EXACT_SOLUTIONS[f"eigen-{kind}"](b.cp[: b.n_active])
        f = sample_rhs(b, RHS_PRESETS[f"eigen-{kind}"](1.0))
        errs.append(np.abs(A @ u - f).max())
    return np.array(errs)


def test_circle_consistency_first_order():
    # O(dx^3) interpolation error divided by dx^2: the truncation error is
    # first order even though the solution error is second order
    e = _residual_errors("circle", [0.1, 0.05, 0.025])
    assert np.all(np.log2(e[:-1] / e[1:]) >= 0.9)


def test_sphere_consistency_first_order():
    e = _residual_errors("sphere", [0.2, 0.1])
    assert np.log2(e[0] / e[1]) >= 0.9


def test_circle_solution_second_order():
    errs = []
    for dx in (0.1, 0.05, 0.025):
        b = build_band(Circle(), dx, 2)
        u = spla.spsolve(assemble_helmholtz(b, 1.0).tocsc(), sample_rhs(b, RHS_PRESETS["eigen-circle"](1.0)))
        errs.append(np.abs(u - EXACT_SOLUTIONS["eigen-circle"](b.cp[: b.n_active])).max())
    errs = np.array(errs)
    assert np.all(np.log2(errs[:-1] / errs[1:]) >= 1.8)


def test_sample_rhs(sphere_coarse):
    b = sphere_coarse.band
    assert np.array_equal(sample_rhs(b, lambda P: np.ones(len(P))), np.ones(b.n_active))
    z = sample_rhs(b, lambda P: P[:, 2])
    assert z.min() >= -1 - 1e-15 and z.max() <= 1 + 1e-15


def test_bunny_preset():
    P = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    phi, theta = polar_angles(P)
    assert np.allclose(phi, [np.pi / 2, np.pi / 2, 0.0]) and np.allclose(theta[:2], [0.0, np.pi / 2])
    f = RHS_PRESETS["bunny-spherical"](1.0)(P)
    ref = phi * (np.pi - phi) * np.sin(3 * phi) * (np.sin(theta) + np.cos(10 * theta)) / 2
    assert np.allclose(f, ref)
    assert f[0] == pytest.approx((np.pi / 2) ** 2 * -1 * 1 / 2)


def test_matrix_market_round_trip(tmp_path, circle):
    export_matrix_market(tmp_path / "A.mtx", circle.A)
    B = import_matrix_market(tmp_path / "A.mtx")
    assert (abs(B - circle.A)).max() == 0.0


def test_assembly_is_sorted_csr(circle):
    for M in (circle.A, circle.E, circle.ops.laplacian, assemble_extension(circle.band),
              assemble_laplacian(circle.band)):
        assert sp.isspmatrix_csr(M) and M.has_sorted_indices
    # the product keeps no numerical zeros; E keeps its full stencil pattern
    assert np.all(circle.A.data != 0.0) and np.all(circle.ops.laplacian.data != 0.0)

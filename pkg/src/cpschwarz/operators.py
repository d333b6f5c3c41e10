"""Discrete Laplacian, closest point extension and the stabilized Helmholtz operator."""
from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
import scipy.io
import scipy.sparse as sp

from .band import stencil_offsets
from .errors import StencilIncomplete
from .linalg import as_csr


def barycentric_weights(degree):
    """Second-form barycentric weights for equispaced nodes 0..p."""
    return np.array([(-1) ** j * comb(degree, j) for j in range(degree + 1)], dtype=float)


def interp_weights_1d(degree, t):
    """Lagrange weights on nodes 0..p evaluated at ``t``.

    ``t`` may be a scalar or an array; the result has a trailing axis of
    length p+1. An exact node hit returns the corresponding unit vector.
    """
    if not 0 <= degree <= 6:
        raise ValueError("supported interpolation degrees are 0..6")
    t = np.asarray(t, dtype=float)
    nodes = np.arange(degree + 1, dtype=float)
    w = barycentric_weights(degree)
    diff = t[..., None] - nodes
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        q = w / diff
        out = q / q.sum(axis=-1, keepdims=True)
    # exact node hits (and offsets so small that w/diff overflows) take the
    # limit: the unit vector of the nearest node
    rows = ~np.isfinite(out).all(axis=-1)
    if np.any(rows):
        near = np.argmin(np.abs(diff[rows]), axis=-1)
        out[rows] = np.eye(degree + 1)[near]
    return out


def extension_weights(band, points, base):
    """Tensor-product weights, shape (n, (p+1)^d), for ``points`` on stencils at ``base``."""
    p, d = band.degree, band.dim
    t = np.asarray(points, dtype=float) / band.dx - base
    w1 = interp_weights_1d(p, t)                     # (n, d, p+1)
    offs = stencil_offsets(p, d)                      # (S, d)
    W = np.ones((len(t), len(offs)))
    for k in range(d):
        W *= w1[:, k, offs[:, k]]
    return W


def assemble_extension(band):
    """Extension matrix E, shape (N_A + N_G) x N_A."""
    st = band.stencil
    if np.any((st < 0) | (st >= band.n_active)):
        raise StencilIncomplete("a node's interpolation stencil leaves the active set")
    W = extension_weights(band, band.cp, band.stencil_base)
    n, s = st.shape
    E = sp.csr_matrix((W.ravel(), st.ravel(), np.arange(0, n * s + 1, s)),
                      shape=(n, band.n_active))
    E.sort_indices()
    return E


def assemble_laplacian(band):
    """Centered 2d+1 point Laplacian, shape N_A x (N_A + N_G)."""
    na, d, h2 = band.n_active, band.dim, band.dx ** 2
    nb = band.neighbors[:na]
    if np.any(nb < 0):
        raise StencilIncomplete("an active node is missing a Laplacian neighbor")
    rows = np.concatenate([np.arange(na), np.repeat(np.arange(na), 2 * d)])
    cols = np.concatenate([np.arange(na), nb.ravel()])
    vals = np.concatenate([np.full(na, -2.0 * d / h2), np.full(na * 2 * d, 1.0 / h2)])
    return as_csr(sp.coo_matrix((vals, (rows, cols)), shape=(na, band.n_nodes)))


def _finish(A):
    A = as_csr(A)
    A.eliminate_zeros()
    return A


def stabilized_helmholtz(laplacian, extension, c, dim, dx):
    """``(c + 2d/dx^2) I - (2d/dx^2 I + L) E`` with I selecting the row nodes."""
    na = laplacian.shape[0]
    k = 2.0 * dim / dx ** 2
    select = sp.eye(na, laplacian.shape[1], format="csr")
    M = as_csr(k * select + laplacian)
    A = (c + k) * sp.eye(na, format="csr") - M @ extension
    return _finish(A)


@dataclass(frozen=True, eq=False)
class GlobalOperators:
    laplacian: sp.csr_matrix
    extension: sp.csr_matrix
    helmholtz: sp.csr_matrix
    c: float

    def laplace_beltrami(self, dim, dx):
        """Stabilized Laplace-Beltrami matrix, N_A x N_A."""
        na = self.laplacian.shape[0]
        k = 2.0 * dim / dx ** 2
        select = sp.eye(na, self.laplacian.shape[1], format="csr")
        return _finish(-k * sp.eye(na, format="csr") + (k * select + self.laplacian) @ self.extension)


def assemble_helmholtz(band, c, laplacian=None, extension=None):
    if not c > 0:
        raise ValueError("the shift c must be positive")
    L = assemble_laplacian(band) if laplacian is None else laplacian
    E = assemble_extension(band) if extension is None else extension
    return stabilized_helmholtz(L, E, c, band.dim, band.dx)


def assemble_operators(band, c):
    L = assemble_laplacian(band)
    E = assemble_extension(band)
    return GlobalOperators(laplacian=L, extension=E,
                           helmholtz=assemble_helmholtz(band, c, L, E), c=float(c))


def sample_rhs(band, f):
    """Right-hand side on active nodes: ``f`` evaluated at their closest points."""
    return np.asarray(f(band.cp[: band.n_active]), dtype=float)


def export_matrix_market(path, A, comment=""):
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), comment=comment)


def import_matrix_market(path):
    return as_csr(scipy.io.mmread(str(path)))


# ---------------------------------------------------------------------------
# right-hand side presets


def polar_angles(points):
    """Polar angle from +z and azimuth in the xy-plane."""
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    r = np.linalg.norm(points, axis=1)
    phi = np.arccos(np.clip(z / np.where(r > 0, r, 1.0), -1.0, 1.0))
    theta = np.arctan2(y, x)
    return phi, theta


def rhs_eigen_circle(c):
    """(c + 1) sin(theta): exact solution sin(theta) on the unit circle."""
    return lambda P: (c + 1.0) * P[:, 1] / np.hypot(P[:, 0], P[:, 1])


def exact_eigen_circle(P):
    return P[:, 1] / np.hypot(P[:, 0], P[:, 1])


def rhs_eigen_sphere(c):
    """(c + 2) z: exact solution z on the unit sphere."""
    return lambda P: (c + 2.0) * P[:, 2] / np.linalg.norm(P, axis=1)


def exact_eigen_sphere(P):
    return P[:, 2] / np.linalg.norm(P, axis=1)


def rhs_bunny_spherical(P):
    phi, theta = polar_angles(P)
    return phi * (np.pi - phi) * np.sin(3.0 * phi) * (np.sin(theta) + np.cos(10.0 * theta)) / 2.0


RHS_PRESETS = {
    "eigen-circle": rhs_eigen_circle,
    "eigen-sphere": rhs_eigen_sphere,
    "bunny-spherical": lambda c: rhs_bunny_spherical,
}

EXACT_SOLUTIONS = {
    "eigen-circle": exact_eigen_circle,
    "eigen-sphere": exact_eigen_sphere,
}

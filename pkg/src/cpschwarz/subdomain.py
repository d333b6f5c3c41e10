"""Overlapping subdomains with Dirichlet or Robin transmission conditions.

Each subdomain owns a disjoint piece of the active nodes, grown by a number
of breadth-first overlap layers. Its outer boundary is sampled by the
closest points of the last overlap layer; nodes just beyond the subdomain
(``bc`` nodes) carry a modified extension that imposes the transmission
condition. Local unknowns are ordered interior nodes first, then bc nodes.
"""
from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import (
    ConfigError, EmptySubdomain, OverlapExceedsDomain, SingularLocal,
    SingularMatrix, StencilEscapesSubdomain,
)
from .linalg import Factorization, as_csr

log = logging.getLogger(__name__)

CONORMAL_EPS = 1e-10


@dataclass(frozen=True)
class TransmissionCondition:
    kind: str = "dirichlet"
    alpha: float | None = None

    def __post_init__(self):
        if self.kind not in ("dirichlet", "robin"):
            raise ConfigError(f"unknown transmission condition {self.kind!r}")
        if self.kind == "robin" and not (self.alpha is not None and self.alpha > 0):
            raise ConfigError("Robin transmission conditions need alpha > 0")

    @classmethod
    def dirichlet(cls):
        return cls("dirichlet")

    @classmethod
    def robin(cls, alpha):
        return cls("robin", float(alpha))

    @property
    def is_robin(self):
        return self.kind == "robin"

    def __str__(self):
        return f"robin(alpha={self.alpha:g})" if self.is_robin else "dirichlet"


@dataclass(frozen=True)
class BoundarySample:
    y: np.ndarray
    n_hat: np.ndarray


def compute_conormal(x, y, n_hat, eps=CONORMAL_EPS):
    """Unit tangential part of ``x - y`` with respect to ``n_hat``.

    Works on single vectors or row-stacked arrays. Returns zeros where the
    tangential part is below ``eps * |x - y|`` (including ``x == y``).
    """
    x, y, n_hat = (np.asarray(a, dtype=float) for a in (x, y, n_hat))
    d = x - y
    tan = d - np.sum(d * n_hat, axis=-1, keepdims=True) * n_hat
    tn = np.linalg.norm(tan, axis=-1, keepdims=True)
    dn = np.linalg.norm(d, axis=-1, keepdims=True)
    ok = (tn > eps * dn) & (dn > 0)
    return np.where(ok, tan / np.where(ok, tn, 1.0), 0.0)


@dataclass(eq=False)
class Subdomain:
    index: int
    disjoint: np.ndarray          # global active ids of the owned piece
    interior: np.ndarray          # owned piece plus overlap layers, sorted
    layers: list                  # overlap layers, innermost first
    ghosts: np.ndarray            # global ghost ids adjacent to the interior
    bc: np.ndarray                # global ids with modified extension; unknowns first
    n_bc_unknown: int             # leading bc nodes that are local unknowns
    bc_source: np.ndarray         # last-layer node whose closest point is y_i
    bc_y: np.ndarray
    bc_normal: np.ndarray
    bc_d: np.ndarray
    bc_conormal: np.ndarray
    lambda_nodes: np.ndarray      # last-layer nodes sampling the boundary
    lambda_points: np.ndarray
    lambda_normals: np.ndarray
    n_overlap: int
    tc: TransmissionCondition
    robin_scale: np.ndarray = None
    operator: sp.csr_matrix = None
    factorization: Factorization = None
    disjoint_local: np.ndarray = field(init=False)

    def __post_init__(self):
        self.disjoint_local = np.searchsorted(self.interior, self.disjoint)

    @property
    def n_interior(self):
        return len(self.interior)

    @property
    def n_unknowns(self):
        return len(self.interior) + self.n_bc_unknown

    @property
    def bc_ring(self):
        return self.bc[self.n_bc_unknown:]

    @property
    def local_to_global(self):
        return np.concatenate([self.interior, self.bc[: self.n_bc_unknown]])

    @property
    def disjoint_mask(self):
        m = np.zeros(self.n_unknowns, dtype=bool)
        m[self.disjoint_local] = True
        return m

    @property
    def lambda_samples(self):
        return [BoundarySample(y, n) for y, n in zip(self.lambda_points, self.lambda_normals)]

    def global_to_local(self, n_nodes):
        g2l = np.full(n_nodes, -1, dtype=np.int64)
        g2l[self.local_to_global] = np.arange(self.n_unknowns)
        return g2l

    def local_rhs(self, r):
        """Residual restricted to the interior, zeros on bc rows."""
        rhs = np.zeros(self.n_unknowns)
        rhs[: self.n_interior] = r[self.interior]
        return rhs

    def solve(self, rhs):
        return self.factorization.solve(rhs)

    def correction(self, r):
        """Local solve restricted to the owned piece: (global ids, values)."""
        v = self.factorization.solve(self.local_rhs(r))
        return self.disjoint, v[self.disjoint_local]

    def write_diagnostics(self, path, band):
        d = band.dim
        axes = "xyz"[:d]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["role", "layer", "node"] + list(axes)
                       + [f"y{a}" for a in axes] + [f"q{a}" for a in axes] + ["robin_scale"])
            blank = [""] * (2 * d + 1)
            owned = set(self.disjoint.tolist())
            for i in self.interior:
                if i in owned:
                    w.writerow(["disjoint", 0, i] + band.points[i].tolist() + blank)
            for k, layer in enumerate(self.layers, 1):
                for i in layer:
                    w.writerow(["overlap", k, i] + band.points[i].tolist() + blank)
            for i in self.ghosts:
                w.writerow(["ghost", "", i] + band.points[i].tolist() + blank)
            scale = self.robin_scale if self.robin_scale is not None else np.ones(len(self.bc))
            for k, i in enumerate(self.bc):
                w.writerow(["bc", 1 if k < self.n_bc_unknown else 2, i] + band.points[i].tolist() + self.bc_y[k].tolist()
                           + self.bc_conormal[k].tolist() + [repr(float(scale[k]))])
            for i, y in zip(self.lambda_nodes, self.lambda_points):
                w.writerow(["lambda", self.n_overlap, i] + y.tolist() + blank)


def _neighbors_of(band, nodes):
    nb = band.neighbors[nodes].ravel()
    return np.unique(nb[nb >= 0])


def _nearest(points, samples, chunk=2048):
    out = np.empty(len(points), dtype=np.int64)
    for s in range(0, len(points), chunk):
        P = points[s:s + chunk]
        d2 = ((P[:, None, :] - samples[None, :, :]) ** 2).sum(axis=2)
        out[s:s + chunk] = np.argmin(d2, axis=1)
    return out


def grow_subdomain(band, partition, j, n_overlap, tc, lambda_normals="pseudo"):
    """Node sets of subdomain ``j``; the operator is not assembled yet."""
    if n_overlap < 1:
        raise ConfigError("at least one overlap layer is required")
    if tc.is_robin and n_overlap < 2:
        raise ConfigError("Robin transmission conditions require at least two overlap layers")
    na = band.n_active
    disjoint = np.flatnonzero(partition.labels == j)
    if len(disjoint) == 0:
        raise EmptySubdomain(f"subdomain {j} owns no nodes")

    # (1)-(2) owned piece plus breadth-first overlap layers over active nodes
    inside = np.zeros(band.n_nodes, dtype=bool)
    inside[disjoint] = True
    layers = []
    front = disjoint
    for k in range(n_overlap):
        cand = _neighbors_of(band, front)
        cand = cand[(cand < na) & ~inside[cand]]
        if len(cand) == 0:
            break
        inside[cand] = True
        layers.append(cand)
        front = cand
        if partition.n_subdomains > 1 and inside[:na].all():
            raise OverlapExceedsDomain(
                f"overlap layer {k + 1} of subdomain {j} swallows the whole domain"
            )
    interior = np.flatnonzero(inside)
    if partition.n_subdomains > 1 and len(layers) < n_overlap:
        raise OverlapExceedsDomain(f"subdomain {j} ran out of nodes after {len(layers)} layers")

    # (3) ghosts adjacent to the interior
    nb = _neighbors_of(band, interior)
    ghosts = nb[nb >= na]

    # (4) boundary samples from the last overlap layer
    lambda_nodes = layers[-1] if len(layers) == n_overlap else np.zeros(0, dtype=np.int64)
    lambda_points = band.cp[lambda_nodes]
    if len(lambda_nodes) == 0:
        lambda_n = np.zeros((0, band.dim))
    elif lambda_normals == "pseudo":
        lambda_n = band.surface.normals_at(lambda_points)
    elif lambda_normals == "query":
        lambda_n = band.normal[lambda_nodes]
    else:
        raise ConfigError("lambda_normals must be 'pseudo' or 'query'")

    # (5) nodes completing Laplacian and extension stencils; these are unknowns
    need = np.zeros(band.n_nodes, dtype=bool)
    need[nb[nb < na]] = True
    need[band.stencil[np.concatenate([interior, ghosts])].ravel()] = True
    need[interior] = False
    core = np.flatnonzero(need)
    # (6) one more layer of nodes around the bc set completing the Laplacian
    # stencils of bc rows; these only receive values by modified extension
    ring = _neighbors_of(band, core) if len(core) else np.zeros(0, dtype=np.int64)
    outside = np.ones(band.n_nodes, dtype=bool)
    outside[interior] = False
    outside[ghosts] = False
    outside[core] = False
    ring = ring[outside[ring]]
    bc = np.concatenate([core, ring])

    if len(bc):
        src = lambda_nodes[_nearest(band.points[bc], lambda_points)]
        pos = np.searchsorted(lambda_nodes, src)
        y = band.cp[src]
        n_hat = lambda_n[pos]
        d = band.points[bc] - y
        q = compute_conormal(band.points[bc], y, n_hat)
    else:
        src = np.zeros(0, dtype=np.int64)
        y = n_hat = d = q = np.zeros((0, band.dim))

    return Subdomain(
        index=j, disjoint=disjoint, interior=interior, layers=layers, ghosts=ghosts,
        bc=bc, n_bc_unknown=len(core), bc_source=src, bc_y=y, bc_normal=n_hat, bc_d=d,
        bc_conormal=q, lambda_nodes=lambda_nodes, lambda_points=lambda_points,
        lambda_normals=lambda_n, n_overlap=n_overlap, tc=tc,
    )


def robin_scale(sub, alpha):
    dq = np.sum(sub.bc_d * sub.bc_conormal, axis=1)
    return 1.0 / (1.0 + alpha * dq)


def transmission_rows(sub, extension, g2l, tc):
    """Modified extension over all bc nodes, in local unknown columns.

    Dirichlet extends zeros (empty rows). Robin interpolates at the paired
    boundary sample and divides by ``1 + alpha d.q``.
    """
    nbc, nU = len(sub.bc), sub.n_unknowns
    if not tc.is_robin or nbc == 0:
        return sp.csr_matrix((nbc, nU)), np.ones(nbc)
    s = robin_scale(sub, tc.alpha)
    rows = extension[sub.bc_source].tocoo()
    cols = g2l[rows.col]
    if np.any((cols < 0) | (cols >= nU)):
        raise StencilEscapesSubdomain(f"Robin stencil of subdomain {sub.index} leaves the unknowns")
    T = sp.csr_matrix((rows.data * s[rows.row], (rows.row, cols)), shape=(nbc, nU))
    return as_csr(T), s


def assemble_local_operator(sub, band, extension, c, tc=None):
    """``(c + 2d/h^2) I - (2d/h^2 I + L_j) [E_j; T_j]`` over interior + bc unknowns.

    Interior and adjacent ghost nodes inherit the global extension rows;
    every bc node (including the outer ring, which is not an unknown) takes
    the modified extension. The local Laplacian has a row for every unknown.
    """
    tc = sub.tc if tc is None else tc
    d, h2 = band.dim, band.dx ** 2
    k = 2.0 * d / h2
    nI, nU, nB = sub.n_interior, sub.n_unknowns, len(sub.bc)
    nG = len(sub.ghosts)
    # local node order: interior, bc unknowns, ghosts, bc ring
    core, ring = sub.bc[: sub.n_bc_unknown], sub.bc[sub.n_bc_unknown:]
    nodes = np.concatenate([sub.interior, core, sub.ghosts, ring])
    nL = len(nodes)
    g2l = np.full(band.n_nodes, -1, dtype=np.int64)
    g2l[nodes] = np.arange(nL)

    inherit = np.concatenate([sub.interior, sub.ghosts])
    E = extension[inherit].tocoo()
    ecols = g2l[E.col]
    if np.any((ecols < 0) | (ecols >= nU)):
        raise StencilEscapesSubdomain(f"extension stencil of subdomain {sub.index} leaves the unknowns")
    erows = np.where(E.row < nI, E.row, E.row + len(core))
    Ej = sp.csr_matrix((E.data, (erows, ecols)), shape=(nL, nU))
    T, s = transmission_rows(sub, extension, g2l, tc)
    T = T.tocoo()
    trows = g2l[sub.bc[T.row]]
    Tj = sp.csr_matrix((T.data, (trows, T.col)), shape=(nL, nU))
    X = as_csr(Ej + Tj)

    unknowns = nodes[:nU]
    nb = band.neighbors[unknowns]
    lcols = g2l[nb]
    if np.any((nb < 0) | (lcols < 0)):
        raise StencilEscapesSubdomain(f"Laplacian stencil of subdomain {sub.index} leaves the local node set")
    rows = np.concatenate([np.arange(nU), np.repeat(np.arange(nU), 2 * d)])
    cols = np.concatenate([np.arange(nU), lcols.ravel()])
    vals = np.concatenate([np.full(nU, -k), np.full(nU * 2 * d, 1.0 / h2)])
    Lj = sp.csr_matrix((vals, (rows, cols)), shape=(nU, nL))

    M = k * sp.eye(nU, nL, format="csr") + Lj
    A = (c + k) * sp.eye(nU, format="csr") - M @ X
    A = as_csr(A)
    A.eliminate_zeros()
    return A, s


def build_subdomain(band, extension, partition, j, n_overlap, tc, c, lambda_normals="pseudo"):
    sub = grow_subdomain(band, partition, j, n_overlap, tc, lambda_normals)
    A, s = assemble_local_operator(sub, band, extension, c, tc)
    sub.operator = A
    sub.robin_scale = s
    try:
        sub.factorization = Factorization(A)
    except SingularMatrix as exc:
        raise SingularLocal(f"local operator of subdomain {j} is singular: {exc}") from None
    return sub


def build_subdomains(band, extension, partition, n_overlap, tc, c, threads=1, lambda_normals="pseudo"):
    """Construct and factor every subdomain; ``threads`` caps the parallel map."""
    def one(j):
        return build_subdomain(band, extension, partition, j, n_overlap, tc, c, lambda_normals)

    jobs = range(partition.n_subdomains)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, jobs))
    return [one(j) for j in jobs]

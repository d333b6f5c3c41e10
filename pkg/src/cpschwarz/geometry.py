"""Closest point oracles for analytic surfaces and triangle meshes.

Every surface answers batched queries through ``closest_points(X)`` which
returns ``(cp, dist, normal)`` arrays; ``closest_point`` wraps a single
query in a :class:`SurfaceQuery`.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import EmptyMesh, MedialAxisPoint, MeshFormatError, OffSurface

log = logging.getLogger(__name__)

MEDIAL_EPS = 1e-12
_MACHINE_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class SurfaceQuery:
    query_point: np.ndarray
    closest_point: np.ndarray
    distance: float
    normal: np.ndarray


class Surface:
    """Common interface. Subclasses set ``dim``, ``curvature_bound``, ``scale``."""

    dim: int
    curvature_bound: float | None = None
    scale: float = 1.0

    def closest_points(self, X):
        raise NotImplementedError

    def normals_at(self, Y):
        raise NotImplementedError

    def default_seeds(self):
        raise NotImplementedError

    def _check_on_surface(self, Y):
        cp, dist, _ = self.closest_points(Y)
        tol = 10.0 * _MACHINE_EPS * self.scale
        bad = dist > tol
        if np.any(bad):
            i = int(np.argmax(dist))
            raise OffSurface(
                f"point {Y[i]} is {dist[i]:.3e} from the surface (tolerance {tol:.3e})"
            )
        return cp


def _as_points(X, dim):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != dim:
        raise ValueError(f"expected points in R^{dim}, got shape {X.shape}")
    return X


@dataclass(frozen=True)
class _Ball(Surface):
    center: tuple
    radius: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if len(self.center) != self.dim:
            raise ValueError(f"center must have {self.dim} coordinates")

    @property
    def curvature_bound(self):
        return 1.0 / self.radius

    @property
    def scale(self):
        return self.radius + float(np.max(np.abs(self.center)))

    def closest_points(self, X):
        X = _as_points(X, self.dim)
        c = np.asarray(self.center, dtype=float)
        v = X - c
        rho = np.linalg.norm(v, axis=1)
        if np.any(rho < MEDIAL_EPS * self.radius):
            raise MedialAxisPoint(f"query at the center {self.center} has no unique closest point")
        normal = v / rho[:, None]
        cp = c + self.radius * normal
        return cp, np.abs(rho - self.radius), normal

    def normals_at(self, Y):
        Y = _as_points(Y, self.dim)
        self._check_on_surface(Y)
        return (Y - np.asarray(self.center, dtype=float)) / self.radius

    def default_seeds(self):
        seed = np.array(self.center, dtype=float)
        seed[0] += self.radius
        return [seed]


@dataclass(frozen=True)
class Circle(_Ball):
    center: tuple = (0.0, 0.0)
    dim = 2


@dataclass(frozen=True)
class Sphere(_Ball):
    center: tuple = (0.0, 0.0, 0.0)
    dim = 3


@dataclass(frozen=True)
class Torus(Surface):
    """Torus with symmetry axis parallel to z."""

    center: tuple = (0.0, 0.0, 0.0)
    major: float = 1.0
    minor: float = 0.3
    dim = 3

    def __post_init__(self):
        if not (self.major > 0 and self.minor > 0):
            raise ValueError("torus radii must be positive")
        if not self.minor < self.major:
            raise ValueError("torus requires minor < major radius")

    @property
    def curvature_bound(self):
        # reach is limited by the core circle and, for fat tori, by the axis
        return 1.0 / min(self.minor, self.major - self.minor)

    @property
    def scale(self):
        return self.major + self.minor + float(np.max(np.abs(self.center)))

    def _core_points(self, X):
        v = X - np.asarray(self.center, dtype=float)
        rho = np.hypot(v[:, 0], v[:, 1])
        if np.any(rho < MEDIAL_EPS * self.major):
            raise MedialAxisPoint("query on the torus symmetry axis")
        core = np.zeros_like(v)
        core[:, 0] = self.major * v[:, 0] / rho
        core[:, 1] = self.major * v[:, 1] / rho
        return v, core

    def closest_points(self, X):
        X = _as_points(X, 3)
        v, core = self._core_points(X)
        w = v - core
        s = np.linalg.norm(w, axis=1)
        if np.any(s < MEDIAL_EPS * self.minor):
            raise MedialAxisPoint("query on the torus core circle")
        normal = w / s[:, None]
        cp = np.asarray(self.center, dtype=float) + core + self.minor * normal
        return cp, np.abs(s - self.minor), normal

    def normals_at(self, Y):
        Y = _as_points(Y, 3)
        self._check_on_surface(Y)
        v, core = self._core_points(Y)
        return (v - core) / self.minor

    def default_seeds(self):
        c = np.array(self.center, dtype=float)
        c[0] += self.major + self.minor
        return [c]


# ---------------------------------------------------------------------------
# triangle meshes


@dataclass(frozen=True)
class MeshIndex:
    """Flattened axis-aligned bounding volume hierarchy over triangles."""

    lo: np.ndarray
    hi: np.ndarray
    left: np.ndarray
    right: np.ndarray
    start: np.ndarray
    count: np.ndarray
    order: np.ndarray

    @property
    def n_nodes(self):
        return len(self.left)

    @property
    def n_leaves(self):
        return int(np.sum(self.left < 0))


def build_mesh_index(vertices, triangles, leaf_size=4):
    """Build a median-split AABB tree; queries cost O(log n) on average."""
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    if len(triangles) == 0 or len(vertices) == 0:
        raise EmptyMesh("mesh has no triangles")
    corners = vertices[triangles]
    tri_lo = corners.min(axis=1)
    tri_hi = corners.max(axis=1)
    centroid = corners.mean(axis=1)

    order = np.arange(len(triangles), dtype=np.int64)
    lo, hi, left, right, start, count = [], [], [], [], [], []

    def new_node(s, e):
        idx = order[s:e]
        lo.append(tri_lo[idx].min(axis=0))
        hi.append(tri_hi[idx].max(axis=0))
        left.append(-1)
        right.append(-1)
        start.append(s)
        count.append(e - s)
        return len(left) - 1

    stack = [(new_node(0, len(order)), 0, len(order))]
    while stack:
        node, s, e = stack.pop()
        if e - s <= leaf_size:
            continue
        idx = order[s:e]
        c = centroid[idx]
        axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
        mid = (e - s) // 2
        part = np.argpartition(c[:, axis], mid, kind="introselect")
        order[s:e] = idx[part]
        m = s + mid
        left[node] = new_node(s, m)
        right[node] = new_node(m, e)
        count[node] = 0
        stack.append((left[node], s, m))
        stack.append((right[node], m, e))

    return MeshIndex(
        lo=np.ascontiguousarray(lo, dtype=float),
        hi=np.ascontiguousarray(hi, dtype=float),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        start=np.asarray(start, dtype=np.int64),
        count=np.asarray(count, dtype=np.int64),
        order=order,
    )


def _unit(v):
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    return np.divide(v, n, out=np.zeros_like(v), where=n > 0)


class TriMesh(Surface):
    """Triangulated surface with angle-weighted pseudo-normals.

    Parameters
    ----------
    vertices : (n, 3) array
    triangles : (m, 3) int array
    curvature_bound : float, optional
        User-supplied bound on principal curvatures; meshes are never
        estimated.
    normal_mode : {"pseudo", "displacement"}
        Normal reported for off-surface queries. ``"displacement"`` uses
        the oriented direction from the closest point to the query when the
        query is not numerically on the surface.
    """

    dim = 3

    def __init__(self, vertices, triangles, curvature_bound=None, normal_mode="displacement"):
        V = np.ascontiguousarray(vertices, dtype=float)
        T = np.ascontiguousarray(triangles, dtype=np.int64)
        if V.ndim != 2 or V.shape[1] != 3 or T.ndim != 2 or T.shape[1] != 3:
            raise MeshFormatError("vertices must be (n, 3) and triangles (m, 3)")
        if len(T) == 0:
            raise EmptyMesh("mesh has no triangles")
        if T.min() < 0 or T.max() >= len(V):
            raise MeshFormatError("triangle references a vertex out of range")
        area2 = np.linalg.norm(
            np.cross(V[T[:, 1]] - V[T[:, 0]], V[T[:, 2]] - V[T[:, 0]]), axis=1
        )
        diag = float(np.linalg.norm(V.max(axis=0) - V.min(axis=0)))
        keep = area2 > 1e-14 * max(diag, 1e-300) ** 2
        if not np.all(keep):
            log.warning("dropping %d zero-area triangles", int(np.sum(~keep)))
            T = np.ascontiguousarray(T[keep])
        if len(T) == 0:
            raise EmptyMesh("mesh has only degenerate triangles")
        if normal_mode not in ("pseudo", "displacement"):
            raise ValueError("normal_mode must be 'pseudo' or 'displacement'")
        self.vertices = V
        self.triangles = T
        self.curvature_bound = curvature_bound
        self.normal_mode = normal_mode
        self.bbox_diagonal = diag
        self.scale = max(diag, float(np.max(np.abs(V))))
        self.index = build_mesh_index(V, T)
        self._build_pseudo_normals()

    def _build_pseudo_normals(self):
        V, T = self.vertices, self.triangles
        a, b, c = V[T[:, 0]], V[T[:, 1]], V[T[:, 2]]
        fn = _unit(np.cross(b - a, c - a))
        self.face_normals = fn

        # angle-weighted vertex normals
        vn = np.zeros_like(V)
        for k in range(3):
            p = V[T[:, k]]
            e1 = _unit(V[T[:, (k + 1) % 3]] - p)
            e2 = _unit(V[T[:, (k + 2) % 3]] - p)
            ang = np.arccos(np.clip(np.sum(e1 * e2, axis=1), -1.0, 1.0))
            np.add.at(vn, T[:, k], ang[:, None] * fn)
        self.vertex_normals = _unit(vn)

        # edges ab, bc, ca; each interior edge carries the sum of its two face normals
        edges = np.stack([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]], axis=1).reshape(-1, 2)
        edges = np.sort(edges, axis=1)
        uniq, inv = np.unique(edges, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        en = np.zeros((len(uniq), 3))
        np.add.at(en, inv, np.repeat(fn, 3, axis=0))
        self.edge_normals = _unit(en)
        self.triangle_edges = inv.reshape(-1, 3)

    def _feature_normals(self, tri, feat):
        out = np.empty((len(tri), 3))
        face = feat == 0
        out[face] = self.face_normals[tri[face]]
        vert = (feat >= 1) & (feat <= 3)
        out[vert] = self.vertex_normals[self.triangles[tri[vert], feat[vert] - 1]]
        edge = feat >= 4
        out[edge] = self.edge_normals[self.triangle_edges[tri[edge], feat[edge] - 4]]
        return out

    def query(self, X):
        """Raw kernel output: closest points, distances, triangle ids, feature codes."""
        X = np.ascontiguousarray(_as_points(X, 3))
        ix = self.index
        cp, d2, tri, feat = kernels.closest_points_mesh(
            X, self.vertices, self.triangles, ix.lo, ix.hi,
            ix.left, ix.right, ix.start, ix.count, ix.order,
        )
        return cp, np.sqrt(d2), tri, feat

    def closest_points(self, X):
        X = _as_points(X, 3)
        cp, dist, tri, feat = self.query(X)
        pseudo = self._feature_normals(tri, feat)
        if self.normal_mode == "pseudo":
            return cp, dist, pseudo
        normal = pseudo.copy()
        off = dist > 1e-8 * self.bbox_diagonal
        if np.any(off):
            disp = (X[off] - cp[off]) / dist[off, None]
            sign = np.where(np.sum(disp * pseudo[off], axis=1) < 0.0, -1.0, 1.0)
            normal[off] = sign[:, None] * disp
        return cp, dist, normal

    def normals_at(self, Y):
        Y = _as_points(Y, 3)
        _, dist, tri, feat = self.query(Y)
        tol = 10.0 * _MACHINE_EPS * self.scale
        if np.any(dist > tol):
            i = int(np.argmax(dist))
            raise OffSurface(f"point {Y[i]} is {dist[i]:.3e} from the mesh (tolerance {tol:.3e})")
        return self._feature_normals(tri, feat)

    def connected_components(self):
        """Vertex-connectivity labels per triangle, used to seed one flood fill per piece."""
        from scipy.sparse import coo_matrix
        from scipy.sparse.csgraph import connected_components

        T = self.triangles
        rows = np.concatenate([T[:, 0], T[:, 1], T[:, 2]])
        cols = np.concatenate([T[:, 1], T[:, 2], T[:, 0]])
        n = len(self.vertices)
        g = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        _, labels = connected_components(g, directed=False)
        return labels[T[:, 0]]

    def default_seeds(self):
        comp = self.connected_components()
        seeds = []
        for label in np.unique(comp):
            t = int(np.flatnonzero(comp == label)[0])
            seeds.append(self.vertices[self.triangles[t]].mean(axis=0))
        return seeds


def closest_point(surface, x):
    """Closest point query for a single point."""
    x = np.asarray(x, dtype=float)
    cp, dist, normal = surface.closest_points(x[None, :])
    return SurfaceQuery(query_point=x, closest_point=cp[0], distance=float(dist[0]), normal=normal[0])


def surface_normal(surface, y):
    """Unit normal at an on-surface point (pseudo-normal for meshes)."""
    return surface.normals_at(np.asarray(y, dtype=float)[None, :])[0]


# ---------------------------------------------------------------------------
# mesh I/O and generators


def _strip_comment(line):
    return line.split("#", 1)[0].strip()


def read_off(path):
    lines = [s for s in (_strip_comment(l) for l in Path(path).read_text().splitlines()) if s]
    if not lines:
        raise MeshFormatError(f"{path}: empty file")
    head = lines[0]
    if not head.startswith("OFF"):
        raise MeshFormatError(f"{path}: missing OFF header")
    rest = head[3:].split()
    pos = 1
    if not rest:
        rest = lines[1].split()
        pos = 2
    try:
        nv, nf = int(rest[0]), int(rest[1])
    except (IndexError, ValueError):
        raise MeshFormatError(f"{path}: bad OFF counts line") from None
    if len(lines) < pos + nv + nf:
        raise MeshFormatError(f"{path}: truncated OFF file")
    V = np.array([[float(t) for t in lines[pos + i].split()[:3]] for i in range(nv)])
    faces = []
    for i in range(nf):
        toks = lines[pos + nv + i].split()
        if int(toks[0]) != 3:
            raise MeshFormatError(f"{path}: face {i} has {toks[0]} vertices; only triangles are supported")
        if len(toks) != 4:
            raise MeshFormatError(f"{path}: face {i} carries extra records (colors are not supported)")
        faces.append([int(t) for t in toks[1:4]])
    return V, np.array(faces, dtype=np.int64)


def read_obj(path):
    V, F = [], []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = _strip_comment(raw)
        if not line:
            continue
        toks = line.split()
        if toks[0] == "v":
            V.append([float(t) for t in toks[1:4]])
        elif toks[0] == "f":
            if len(toks) != 4:
                raise MeshFormatError(f"{path}:{lineno}: only triangular faces are supported")
            try:
                F.append([int(t) - 1 for t in toks[1:]])
            except ValueError:
                raise MeshFormatError(
                    f"{path}:{lineno}: face indices must be plain vertex numbers"
                ) from None
        else:
            raise MeshFormatError(f"{path}:{lineno}: unsupported OBJ record {toks[0]!r}")
    return np.array(V, dtype=float), np.array(F, dtype=np.int64)


def load_mesh(path, scale_height=None, center=False, curvature_bound=None,
              normal_mode="displacement", up_axis=1):
    """Read an OFF/OBJ triangle mesh.

    ``center`` moves the bounding-box center to the origin and
    ``scale_height`` rescales uniformly so the extent along ``up_axis``
    equals the given height.
    """
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".off":
        V, T = read_off(path)
    elif suffix == ".obj":
        V, T = read_obj(path)
    else:
        raise MeshFormatError(f"{path}: unknown mesh format {suffix!r} (expected .off or .obj)")
    if len(T) == 0:
        raise EmptyMesh(f"{path}: no faces")
    if center:
        V = V - 0.5 * (V.min(axis=0) + V.max(axis=0))
    if scale_height is not None:
        extent = V[:, up_axis].max() - V[:, up_axis].min()
        V = V * (scale_height / extent)
    return TriMesh(V, T, curvature_bound=curvature_bound, normal_mode=normal_mode)


def write_off(path, vertices, triangles):
    with open(path, "w") as fh:
        fh.write(f"OFF\n{len(vertices)} {len(triangles)} 0\n")
        for v in vertices:
            fh.write(" ".join(repr(float(x)) for x in v[:3]) + "\n")
        for t in triangles:
            fh.write(f"3 {t[0]} {t[1]} {t[2]}\n")


def icosahedron():
    g = (1.0 + 5.0 ** 0.5) / 2.0
    V = np.array([
        [-1, g, 0], [1, g, 0], [-1, -g, 0], [1, -g, 0],
        [0, -1, g], [0, 1, g], [0, -1, -g], [0, 1, -g],
        [g, 0, -1], [g, 0, 1], [-g, 0, -1], [-g, 0, 1],
    ], dtype=float)
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    T = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ], dtype=np.int64)
    return V, T


def icosphere(subdivisions=2, radius=1.0):
    """Subdivided icosahedron projected to a sphere; 20*4**k triangles."""
    V, T = icosahedron()
    verts = [tuple(v) for v in V]
    for _ in range(subdivisions):
        cache = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = 0.5 * (np.asarray(verts[i]) + np.asarray(verts[j]))
                verts.append(tuple(m / np.linalg.norm(m)))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in T:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        T = np.array(new, dtype=np.int64)
    return radius * np.array(verts), T


def cube_mesh(half=1.0):
    V = half * np.array([
        [-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1],
        [-1, -1, 1], [1, -1, 1], [1, 1, 1], [-1, 1, 1],
    ], dtype=float)
    T = np.array([
        [0, 2, 1], [0, 3, 2], [4, 5, 6], [4, 6, 7],
        [0, 1, 5], [0, 5, 4], [2, 3, 7], [2, 7, 6],
        [1, 2, 6], [1, 6, 5], [0, 4, 7], [0, 7, 3],
    ], dtype=np.int64)
    return V, T


def make_surface(kind, **params):
    kinds = {"circle": Circle, "sphere": Sphere, "torus": Torus}
    if kind not in kinds:
        raise ValueError(f"unknown analytic surface {kind!r}")
    return kinds[kind](**params)

"""Computational tube around a surface: active nodes, ghost nodes, stencils."""
from __future__ import annotations

import csv
import io
import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import MedialAxisPoint, SeedOffTube, StencilIncomplete, TubeTooWide

log = logging.getLogger(__name__)

# integer lattice coordinates are packed into one int64 key whose order is
# lexicographic in the coordinates
_OFFSET = 1 << 20
_RADIX = 1 << 21


def encode(coords):
    coords = np.asarray(coords, dtype=np.int64)
    if np.any(np.abs(coords) >= _OFFSET):
        raise ValueError("lattice coordinate out of the supported range")
    key = np.zeros(coords.shape[:-1], dtype=np.int64)
    for k in range(coords.shape[-1]):
        key = key * _RADIX + (coords[..., k] + _OFFSET)
    return key


def decode(keys, dim):
    keys = np.asarray(keys, dtype=np.int64)
    out = np.empty(keys.shape + (dim,), dtype=np.int64)
    for k in range(dim - 1, -1, -1):
        out[..., k] = keys % _RADIX - _OFFSET
        keys = keys // _RADIX
    return out


def tube_radius(dx, degree, dim):
    return dx * (degree + 2) * math.sqrt(dim) / 2.0


def laplacian_offsets(dim):
    off = np.zeros((2 * dim, dim), dtype=np.int64)
    for k in range(dim):
        off[2 * k, k] = -1
        off[2 * k + 1, k] = 1
    return off


def laplacian_neighbors(coord):
    """The 2d lattice neighbors (unit offsets along each axis) of ``coord``."""
    coord = np.asarray(coord, dtype=np.int64)
    return coord + laplacian_offsets(len(coord))


def stencil_offsets(degree, dim):
    r = range(degree + 1)
    return np.array(list(itertools.product(r, repeat=dim)), dtype=np.int64)


def interp_stencil_base(cp, dx, degree):
    """Lower corner of the (p+1)^d interpolation stencil around ``cp``.

    Even degrees center on the nearest grid point, odd degrees on the
    containing cell.
    """
    s = np.asarray(cp, dtype=float) / dx
    if degree % 2 == 0:
        base = np.floor(s + 0.5) - degree // 2
    else:
        base = np.floor(s) - (degree - 1) // 2
    return base.astype(np.int64)


@dataclass(frozen=True, eq=False)
class Band:
    surface: object
    dx: float
    dim: int
    degree: int
    gamma: float
    coords: np.ndarray        # (N, d) lattice coordinates, actives first
    cp: np.ndarray            # (N, d) closest points
    dist: np.ndarray          # (N,)
    normal: np.ndarray        # (N, d)
    n_active: int
    n_ghost: int
    keys: np.ndarray          # packed coords per node
    neighbors: np.ndarray     # (N, 2d) node index of each Laplacian neighbor or -1
    stencil_base: np.ndarray  # (N, d)
    stencil: np.ndarray       # (N, (p+1)^d) active indices of the interpolation stencil

    @property
    def n_nodes(self):
        return self.n_active + self.n_ghost

    @property
    def points(self):
        return self.coords * self.dx

    @property
    def active(self):
        return self.coords[: self.n_active]

    @property
    def ghost(self):
        return self.coords[self.n_active:]

    def index_of(self, coords):
        """Node index of each lattice coordinate, -1 when not in the band."""
        return _lookup(self._sorted_keys, self._sorted_index, encode(coords))

    @property
    def lattice_map(self):
        return {tuple(c): i for i, c in enumerate(self.coords.tolist())}

    def __post_init__(self):
        order = np.argsort(self.keys, kind="stable")
        object.__setattr__(self, "_sorted_keys", self.keys[order])
        object.__setattr__(self, "_sorted_index", order)

    def bounding_box(self):
        pts = self.points
        return pts.min(axis=0), pts.max(axis=0)

    def summary(self):
        lo, hi = self.bounding_box()
        return {
            "n_active": self.n_active,
            "n_ghost": self.n_ghost,
            "gamma": self.gamma,
            "dx": self.dx,
            "degree": self.degree,
            "dim": self.dim,
            "bbox_min": lo.tolist(),
            "bbox_max": hi.tolist(),
        }

    def summary_text(self):
        s = self.summary()
        fmt = lambda v: " ".join(f"{x:.6g}" for x in v)
        return (
            f"N_A    {s['n_active']}\n"
            f"N_G    {s['n_ghost']}\n"
            f"gamma  {s['gamma']:.17g}\n"
            f"dx     {s['dx']:.17g}\n"
            f"p      {s['degree']}\n"
            f"bbox   [{fmt(s['bbox_min'])}] .. [{fmt(s['bbox_max'])}]\n"
        )

    def summary_csv(self):
        s = self.summary()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n_active", "n_ghost", "gamma", "dx", "degree", "dim"]
                   + [f"bbox_min_{k}" for k in range(self.dim)]
                   + [f"bbox_max_{k}" for k in range(self.dim)])
        w.writerow([s["n_active"], s["n_ghost"], repr(s["gamma"]), repr(s["dx"]), s["degree"], s["dim"]]
                   + [repr(v) for v in s["bbox_min"]] + [repr(v) for v in s["bbox_max"]])
        return buf.getvalue()


def _lookup(sorted_keys, sorted_index, keys):
    pos = np.searchsorted(sorted_keys, keys)
    pos = np.minimum(pos, len(sorted_keys) - 1)
    hit = sorted_keys[pos] == keys
    return np.where(hit, sorted_index[pos], -1)


def build_band(surface, dx, degree=2, seeds=None):
    """Flood-fill the tube of radius ``dx (p+2) sqrt(d) / 2`` around ``surface``.

    Starting from each snapped seed, lattice nodes within the tube radius
    are active and the fill continues through them; non-active lattice
    neighbors of active nodes become ghosts. Disconnected surfaces need one
    seed per component.
    """
    if not dx > 0:
        raise ValueError("dx must be positive")
    if not 1 <= degree <= 6:
        raise ValueError("interpolation degree must be in 1..6")
    dim = surface.dim
    gamma = tube_radius(dx, degree, dim)
    kappa = surface.curvature_bound
    if kappa is None:
        log.warning("no curvature bound for this surface; skipping the tube width check")
    elif gamma * kappa >= 1.0:
        raise TubeTooWide(
            f"tube radius {gamma:.4g} is not below the reach 1/kappa = {1.0 / kappa:.4g}; "
            "refine dx or lower the degree"
        )
    if seeds is None:
        seeds = surface.default_seeds()
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    offsets = laplacian_offsets(dim)

    visited = set()
    frontier = np.unique(encode(np.floor(seeds / dx + 0.5).astype(np.int64)))
    seed_set = set(frontier.tolist())
    act_keys, act_cp, act_dist, act_n = [], [], [], []
    gh_keys, gh_cp, gh_dist, gh_n = [], [], [], []
    first = True
    while len(frontier):
        visited.update(frontier.tolist())
        coords = decode(frontier, dim)
        try:
            cp, dist, normal = surface.closest_points(coords * dx)
        except MedialAxisPoint as exc:
            raise TubeTooWide(
                f"a band node lies on the medial axis of the surface ({exc}); "
                "the tube plus one grid cell must stay below the reach, so refine dx"
            ) from None
        inside = dist <= gamma
        if first:
            missing = [k for k, ok in zip(frontier.tolist(), inside) if not ok and k in seed_set]
            if missing:
                raise SeedOffTube(
                    f"seed snapped to lattice node {decode(missing[0], dim).tolist()} "
                    f"lies outside the tube (radius {gamma:.4g})"
                )
            first = False
        act_keys.append(frontier[inside]); act_cp.append(cp[inside])
        act_dist.append(dist[inside]); act_n.append(normal[inside])
        gh_keys.append(frontier[~inside]); gh_cp.append(cp[~inside])
        gh_dist.append(dist[~inside]); gh_n.append(normal[~inside])
        cand = np.unique(encode(coords[inside][:, None, :] + offsets[None, :, :]).ravel())
        frontier = np.array([k for k in cand.tolist() if k not in visited], dtype=np.int64)

    def gather(keys, cps, dists, normals):
        keys = np.concatenate(keys)
        order = np.argsort(keys, kind="stable")
        return (keys[order], np.concatenate(cps)[order],
                np.concatenate(dists)[order], np.concatenate(normals)[order])

    ak, acp, ad, an = gather(act_keys, act_cp, act_dist, act_n)
    gk, gcp, gd, gn = gather(gh_keys, gh_cp, gh_dist, gh_n)
    keys = np.concatenate([ak, gk])
    coords = decode(keys, dim)
    cp = np.concatenate([acp, gcp])
    n_active = len(ak)

    order = np.argsort(keys, kind="stable")
    sk, si = keys[order], order
    neighbors = _lookup(sk, si, encode(coords[:, None, :] + offsets[None, :, :]))

    base = interp_stencil_base(cp, dx, degree)
    stencil = _lookup(sk, si, encode(base[:, None, :] + stencil_offsets(degree, dim)[None, :, :]))
    bad = (stencil < 0) | (stencil >= n_active)
    if np.any(bad):
        i = int(np.flatnonzero(bad.any(axis=1))[0])
        raise StencilIncomplete(
            f"interpolation stencil of node {coords[i].tolist()} leaves the active set"
        )

    return Band(
        surface=surface, dx=float(dx), dim=dim, degree=degree, gamma=gamma,
        coords=coords, cp=cp, dist=np.concatenate([ad, gd]),
        normal=np.concatenate([an, gn]), n_active=n_active, n_ghost=len(gk),
        keys=keys, neighbors=neighbors, stencil_base=base, stencil=stencil,
    )

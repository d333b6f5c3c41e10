"""Node graph from the Laplacian stencil and a greedy graph-growing partitioner."""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import ConfigError, LabelOutOfRange, TooManyParts, WrongLength
from .linalg import as_csr

log = logging.getLogger(__name__)

BALANCE_TOL = 1.2
MAX_SWEEPS = 10


@dataclass(frozen=True, eq=False)
class NodeGraph:
    """Symmetric adjacency between active nodes that are lattice neighbors."""

    adjacency: sp.csr_matrix

    @property
    def n_nodes(self):
        return self.adjacency.shape[0]

    @property
    def n_edges(self):
        return self.adjacency.nnz // 2

    def neighbors(self, i):
        A = self.adjacency
        return A.indices[A.indptr[i]:A.indptr[i + 1]]

    def adjacency_lists(self):
        A = self.adjacency
        return [A.indices[A.indptr[i]:A.indptr[i + 1]].tolist() for i in range(self.n_nodes)]


def graph_from_edges(n_nodes, edges):
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    A = sp.csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n_nodes, n_nodes))
    A.sum_duplicates()
    A.data[:] = 1
    A.setdiag(0)
    A.eliminate_zeros()
    A.sort_indices()
    return NodeGraph(A)


def build_graph(band):
    na = band.n_active
    nb = band.neighbors[:na]
    rows = np.repeat(np.arange(na), nb.shape[1])
    cols = nb.ravel()
    keep = (cols >= 0) & (cols < na)
    return graph_from_edges(na, np.stack([rows[keep], cols[keep]], axis=1))


@dataclass(frozen=True, eq=False)
class DisjointPartition:
    labels: np.ndarray
    n_subdomains: int

    def sizes(self):
        return np.bincount(self.labels, minlength=self.n_subdomains)

    def balance(self):
        s = self.sizes()
        return float(s.max() / s.min())

    def parts(self):
        order = np.argsort(self.labels, kind="stable")
        bounds = np.searchsorted(self.labels[order], np.arange(self.n_subdomains + 1))
        return [order[bounds[k]:bounds[k + 1]] for k in range(self.n_subdomains)]

    def validate(self, balance_tol=BALANCE_TOL, strict_balance=True):
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.n_subdomains):
            raise LabelOutOfRange(f"labels must lie in 0..{self.n_subdomains - 1}")
        sizes = self.sizes()
        if np.any(sizes == 0):
            raise ConfigError(f"subdomain {int(np.argmin(sizes))} is empty")
        if self.balance() > balance_tol:
            msg = f"partition balance {self.balance():.3f} exceeds {balance_tol}"
            if strict_balance:
                raise ConfigError(msg)
            log.warning(msg)
        return self


def edge_cut(graph, labels):
    A = graph.adjacency.tocoo()
    return int(np.sum(labels[A.row] != labels[A.col]) // 2)


def part_components(graph, labels, part):
    idx = np.flatnonzero(labels == part)
    sub = graph.adjacency[idx][:, idx]
    return connected_components(sub, directed=False)[0]


def column_groups(band):
    """Group id per active node: nodes sharing the lattice point nearest their closest point.

    Such a group is one normal column of the band. Partitioning whole
    columns keeps piece boundaries transversal to the surface instead of
    letting a piece split the tube into inner and outer shells.
    """
    na = band.n_active
    rep = band.index_of(np.floor(band.cp[:na] / band.dx + 0.5).astype(np.int64))
    bad = (rep < 0) | (rep >= na)
    rep[bad] = np.flatnonzero(bad)
    return np.unique(rep, return_inverse=True)[1].astype(np.int64)


def _contract(graph, groups):
    """Quotient graph: edge weights count node edges between groups."""
    n = graph.n_nodes
    groups = np.asarray(groups, dtype=np.int64)
    if groups.shape != (n,):
        raise WrongLength(f"need one group id per node, got {groups.shape}")
    ng = int(groups.max()) + 1 if n else 0
    S = sp.csr_matrix((np.ones(n), (np.arange(n), groups)), shape=(n, ng))
    W = as_csr((S.T @ graph.adjacency.astype(float) @ S).tocsr())
    W.setdiag(0)
    W.eliminate_zeros()
    W.sort_indices()
    return W, np.bincount(groups, minlength=ng)


def _grow(adj, n_parts, groups=None):
    """Breadth-first growth from the lowest unassigned node up to cumulative targets.

    With ``groups``, reaching any node claims its whole group at once, so
    every group ends up in a single part.
    """
    n = adj.shape[0]
    if groups is None:
        members = None
    else:
        order = np.argsort(groups, kind="stable")
        bounds = np.searchsorted(groups[order], np.arange(groups.max() + 2))
        members = [order[bounds[k]:bounds[k + 1]] for k in range(len(bounds) - 1)]
    labels = np.full(n, -1, dtype=np.int64)
    next_free = 0
    taken = 0
    queue = deque()

    def claim(v, part):
        nodes = [v] if members is None else members[groups[v]]
        labels[nodes] = part
        queue.extend(nodes)
        return len(nodes)

    for part in range(n_parts):
        if part == n_parts - 1:
            labels[labels < 0] = part
            break
        target = (n * (part + 1)) // n_parts
        queue.clear()
        while taken < target:
            if not queue:
                while labels[next_free] >= 0:
                    next_free += 1
                taken += claim(next_free, part)
                continue
            v = queue.popleft()
            for w in adj.indices[adj.indptr[v]:adj.indptr[v + 1]]:
                if taken >= target:
                    break
                if labels[w] < 0:
                    taken += claim(w, part)
    return labels


def _weighted_cut(W, labels):
    coo = W.tocoo()
    return float(coo.data[labels[coo.row] != labels[coo.col]].sum() / 2)


def _refine(W, weights, labels, n_parts, rng, balance_tol, max_sweeps):
    coo = W.tocoo()
    sizes = np.bincount(labels, weights=weights, minlength=n_parts)
    cut = _weighted_cut(W, labels)
    for _ in range(max_sweeps):
        moved = 0
        boundary = np.unique(coo.row[labels[coo.row] != labels[coo.col]])
        for v in rng.permutation(boundary):
            a = labels[v]
            lo, hi = W.indptr[v], W.indptr[v + 1]
            counts = np.bincount(labels[W.indices[lo:hi]], weights=W.data[lo:hi], minlength=n_parts)
            gains = counts - counts[a]
            gains[a] = 0
            b = int(np.argmax(gains))
            wv = weights[v]
            if gains[b] <= 0 or sizes[a] - wv < 1:
                continue
            sizes[a] -= wv
            sizes[b] += wv
            if sizes.max() / sizes.min() > balance_tol:
                sizes[a] += wv
                sizes[b] -= wv
                continue
            labels[v] = b
            moved += 1
        new_cut = _weighted_cut(W, labels)
        assert new_cut <= cut, "refinement increased the edge cut"
        cut = new_cut
        if moved == 0:
            break
    return labels


def partition(graph, n_parts, seed=0, balance_tol=BALANCE_TOL, max_sweeps=MAX_SWEEPS, groups=None):
    """Split the active nodes into ``n_parts`` balanced, mostly contiguous pieces.

    Parts are grown breadth-first from the lowest-numbered unassigned node
    to their target size, then boundary nodes are moved to neighboring
    parts whenever that strictly lowers the edge cut without breaking the
    balance tolerance. ``seed`` fixes the visiting order of the refinement
    sweeps.

    ``groups`` (one id per node, e.g. from :func:`column_groups`) makes the
    grouped nodes move together: growth and refinement then run on the
    contracted graph with node counts as weights, and the edge cut is
    unchanged by the contraction.
    """
    n = graph.n_nodes
    if n_parts < 1:
        raise ConfigError("n_parts must be at least 1")
    if n_parts > n:
        raise TooManyParts(f"cannot split {n} nodes into {n_parts} parts")
    labels = _grow(graph.adjacency, n_parts, groups)
    if groups is None:
        W, weights = graph.adjacency.astype(float), np.ones(n, dtype=np.int64)
        glabels = labels
    else:
        groups = np.asarray(groups, dtype=np.int64)
        W, weights = _contract(graph, groups)
        glabels = np.zeros(len(weights), dtype=np.int64)
        glabels[groups] = labels
    if n_parts > 1 and max_sweeps > 0:
        glabels = _refine(W, weights, glabels, n_parts, np.random.default_rng(seed), balance_tol, max_sweeps)
    labels = glabels if groups is None else glabels[groups]
    if n_parts > 1:
        for k in range(n_parts):
            ncomp = part_components(graph, labels, k)
            if ncomp > 1:
                log.warning("part %d has %d connected components", k, ncomp)
    return DisjointPartition(labels=labels, n_subdomains=n_parts).validate(balance_tol)


def partition_band(band, n_parts, seed=0, balance_tol=BALANCE_TOL, max_sweeps=MAX_SWEEPS, columns=True):
    """Partition the active nodes of ``band``; ``columns`` keeps normal columns whole."""
    groups = column_groups(band) if columns else None
    return partition(build_graph(band), n_parts, seed, balance_tol, max_sweeps, groups)


def export_partition(path, part):
    np.savetxt(path, part.labels, fmt="%d")


def import_partition(path, n_nodes=None, n_parts=None, balance_tol=BALANCE_TOL):
    """Read one integer label per line; line i labels active node i."""
    try:
        labels = np.loadtxt(path, dtype=np.int64, ndmin=1)
    except ValueError as exc:
        raise ConfigError(f"{path}: labels must be integers ({exc})") from None
    if n_nodes is not None and len(labels) != n_nodes:
        raise WrongLength(f"{path}: {len(labels)} labels for {n_nodes} active nodes")
    if n_parts is None:
        n_parts = int(labels.max()) + 1 if len(labels) else 0
    if len(labels) and (labels.min() < 0 or labels.max() >= n_parts):
        raise LabelOutOfRange(f"{path}: labels must lie in 0..{n_parts - 1}")
    return DisjointPartition(labels=labels, n_subdomains=n_parts).validate(balance_tol, strict_balance=False)

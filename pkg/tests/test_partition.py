import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cpschwarz import partition as pt
from cpschwarz.errors import ConfigError, LabelOutOfRange, TooManyParts, WrongLength


def path_graph(n):
    return pt.graph_from_edges(n, [(i, i + 1) for i in range(n - 1)])


def test_graph_basics():
    g = path_graph(5)
    assert g.n_edges == 4 and g.neighbors(2).tolist() == [1, 3]
    g = pt.graph_from_edges(3, [(0, 1)])
    assert g.neighbors(2).tolist() == []


def test_circle_graph_pair_scan(circle):
    b = circle.band
    g = pt.build_graph(b)
    A = b.active
    count = 0
    for i in range(b.n_active):
        count += int(np.sum(np.abs(A[i + 1:] - A[i]).sum(axis=1) == 1))
    assert g.n_edges == count
    adj = g.adjacency
    assert (adj != adj.T).nnz == 0 and adj.diagonal().sum() == 0


def test_single_part():
    p = pt.partition(path_graph(7), 1)
    assert np.all(p.labels == 0)


def test_path_halves_optimal():
    g = path_graph(10)
    p = pt.partition(g, 2)
    assert p.labels.tolist() == [0] * 5 + [1] * 5
    assert pt.edge_cut(g, p.labels) == 1
    # exhaustive: no balanced bipartition has a smaller cut
    best = min(pt.edge_cut(g, np.isin(np.arange(10), c).astype(int))
               for c in itertools.combinations(range(10), 5))
    assert best == 1


def test_circle_eight_parts(circle, circle_part8):
    p = circle_part8
    assert p.n_subdomains == 8 and np.all(p.sizes() > 0) and p.balance() <= 1.2
    g = pt.build_graph(circle.band)
    for k in range(8):
        assert pt.part_components(g, p.labels, k) == 1      # arcs


def test_determinism(circle):
    a = pt.partition_band(circle.band, 6, seed=3)
    b = pt.partition_band(circle.band, 6, seed=3)
    assert np.array_equal(a.labels, b.labels)
    c = pt.partition(pt.build_graph(circle.band), 6, seed=3)
    d = pt.partition(pt.build_graph(circle.band), 6, seed=3)
    assert np.array_equal(c.labels, d.labels)


def test_too_many_parts():
    with pytest.raises(TooManyParts):
        pt.partition(path_graph(3), 4)


def test_refinement_does_not_increase_cut(sphere_coarse):
    g = pt.build_graph(sphere_coarse.band)
    grown = pt.partition(g, 8, max_sweeps=0)
    refined = pt.partition(g, 8)
    assert pt.edge_cut(g, refined.labels) <= pt.edge_cut(g, grown.labels)


@given(st.integers(0, 10_000), st.integers(2, 5))
def test_random_grid_graph_partitions(seed, n_parts):
    r = np.random.default_rng(seed)
    nx, ny = r.integers(4, 9, size=2)
    idx = np.arange(nx * ny).reshape(nx, ny)
    edges = [(idx[i, j], idx[i + 1, j]) for i in range(nx - 1) for j in range(ny)]
    edges += [(idx[i, j], idx[i, j + 1]) for i in range(nx) for j in range(ny - 1)]
    g = pt.graph_from_edges(nx * ny, edges)
    grown = pt.partition(g, n_parts, seed=seed, max_sweeps=0, balance_tol=2.0)
    p = pt.partition(g, n_parts, seed=seed, balance_tol=2.0)
    assert np.all(p.sizes() > 0) and p.balance() <= 2.0
    assert pt.edge_cut(g, p.labels) <= pt.edge_cut(g, grown.labels)


def test_column_groups(circle):
    b = circle.band
    groups = pt.column_groups(b)
    assert groups.shape == (b.n_active,)
    # nodes in one group share the lattice point nearest their closest point
    rep = np.floor(b.cp[: b.n_active] / b.dx + 0.5).astype(int)
    for gid in np.unique(groups)[:50]:
        members = np.flatnonzero(groups == gid)
        assert len({tuple(r) for r in rep[members]}) == 1


def test_group_partition_keeps_columns(circle):
    b = circle.band
    groups = pt.column_groups(b)
    p = pt.partition_band(b, 8)
    for gid in np.unique(groups):
        assert len(np.unique(p.labels[groups == gid])) == 1
    W, weights = pt._contract(pt.build_graph(b), groups)
    assert weights.sum() == b.n_active and (W != W.T).nnz == 0
    with pytest.raises(WrongLength):
        pt._contract(pt.build_graph(b), groups[:-1])


def test_node_level_partition_available(circle):
    p = pt.partition_band(circle.band, 8, columns=False)
    assert p.balance() <= 1.2 and np.all(p.sizes() > 0)


def test_export_import_round_trip(tmp_path, circle_part8):
    pt.export_partition(tmp_path / "p.txt", circle_part8)
    q = pt.import_partition(tmp_path / "p.txt", n_nodes=len(circle_part8.labels))
    assert np.array_equal(q.labels, circle_part8.labels) and q.n_subdomains == 8


def test_import_errors(tmp_path):
    (tmp_path / "z.txt").write_text("0\n0\n0\n")
    assert pt.import_partition(tmp_path / "z.txt", n_parts=1).n_subdomains == 1
    (tmp_path / "bad.txt").write_text("0\n1\n2\n")
    with pytest.raises(LabelOutOfRange):
        pt.import_partition(tmp_path / "bad.txt", n_parts=2)
    with pytest.raises(WrongLength):
        pt.import_partition(tmp_path / "z.txt", n_nodes=4)
    (tmp_path / "txt.txt").write_text("a\n")
    with pytest.raises(ConfigError):
        pt.import_partition(tmp_path / "txt.txt")
    (tmp_path / "gap.txt").write_text("0\n2\n")
    with pytest.raises(ConfigError):
        pt.import_partition(tmp_path / "gap.txt", n_parts=3)

import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sga import (
    Graph,
    apply_flips,
    bfs_within,
    flip_edge,
    generate_sbm,
    largest_connected_component,
    load_graph_bundle,
    random_split,
    row_normalize_features,
    save_graph_bundle,
)
from sga.graph import _decode_triangle, _sample_distinct

from conftest import graph_inputs, random_graph
from oracles import all_hop_distances, connected_component_of, dense_operator, dense_adjacency


# --- construction ---

def test_build_collapses_duplicates_and_symmetric_pairs():
    X = np.zeros((4, 2))
    y = [0, 1, 0, 1]
    g = Graph.build([(0, 1), (1, 0), (0, 1), (2, 3)], X, y)
    assert g.num_edges == 2
    assert g.has_edge(0, 1) and g.has_edge(1, 0) and g.has_edge(2, 3)
    assert not g.has_edge(0, 2)
    assert list(g.degrees) == [1, 1, 1, 1]


def test_build_rejects_self_loop():
    with pytest.raises(ValueError, match="self-loop"):
        Graph.build([(1, 1)], np.zeros((3, 2)), [0, 0, 0])


def test_build_rejects_out_of_range_endpoint():
    with pytest.raises(ValueError, match="out of range"):
        Graph.build([(0, 5)], np.zeros((3, 2)), [0, 0, 0])


def test_build_rejects_label_outside_num_classes():
    with pytest.raises(ValueError):
        Graph.build([(0, 1)], np.zeros((2, 2)), [0, 3], num_classes=2)


def test_build_infers_num_classes():
    g = Graph.build([(0, 1)], np.zeros((2, 2)), [0, 4])
    assert g.num_classes == 5


def test_edge_array_is_sorted_upper():
    g = random_graph(seed=0, n=15, p=0.3)
    e = g.edge_array()
    assert (e[:, 0] < e[:, 1]).all()
    assert e.shape[0] == g.num_edges
    order = np.lexsort((e[:, 1], e[:, 0]))
    assert (order == np.arange(e.shape[0])).all()


def test_arrays_are_read_only():
    g = random_graph(seed=0, n=8, p=0.4)
    with pytest.raises(ValueError):
        g.indices[0] = 99
    with pytest.raises(ValueError):
        g.features[0, 0] = 1.0


def test_normalized_adjacency_matches_dense_and_is_cached():
    g = random_graph(seed=1, n=12, p=0.3)
    P = g.normalized_adjacency()
    expected = dense_operator(dense_adjacency(g))
    assert np.allclose(P.toarray(), expected, atol=1e-12)
    assert g.normalized_adjacency() is P


# --- flips ---

@settings(max_examples=30, deadline=None)
@given(graph_inputs(min_n=4, max_n=25), st.integers(0, 10**6))
def test_flip_edge_is_an_involution(gi, pick):
    seed, n, p = gi
    g = random_graph(seed, n, p)
    rng = np.random.default_rng(pick)
    u, v = rng.choice(n, size=2, replace=False)
    u, v = int(u), int(v)
    g2 = flip_edge(g, u, v)
    assert g2.has_edge(u, v) != g.has_edge(u, v)
    g3 = flip_edge(g2, u, v)
    assert g3.num_edges == g.num_edges
    assert (g3.indices == g.indices).all()
    assert (g3.indptr == g.indptr).all()
    # value semantics: the original never moved
    assert g.has_edge(u, v) == (not g2.has_edge(u, v))


def test_flip_edge_updates_degrees_and_shares_features():
    g = random_graph(seed=2, n=10, p=0.2)
    u, v = 0, 5
    before = g.has_edge(u, v)
    g2 = flip_edge(g, u, v)
    step = -1 if before else 1
    assert g2.degrees[u] == g.degrees[u] + step
    assert g2.degrees[v] == g.degrees[v] + step
    assert g2.features is g.features
    assert g2.labels is g.labels


def test_flip_edge_rejects_self_loop_and_bad_ids():
    g = random_graph(seed=2, n=6, p=0.3)
    with pytest.raises(ValueError):
        flip_edge(g, 2, 2)
    with pytest.raises(ValueError):
        flip_edge(g, 0, 6)


def test_apply_flips_checks_declared_action():
    g = Graph.build([(0, 1)], np.zeros((3, 2)), [0, 0, 0])
    g2 = apply_flips(g, [(0, 1, "remove"), (1, 2, "add")])
    assert not g2.has_edge(0, 1) and g2.has_edge(1, 2)
    with pytest.raises(ValueError, match="inconsistent"):
        apply_flips(g, [(0, 1, "add")])


# --- bfs ---

@settings(max_examples=30, deadline=None)
@given(graph_inputs(min_n=4, max_n=30), st.integers(0, 3), st.integers(0, 10**6))
def test_bfs_within_matches_floyd_warshall(gi, radius, pick):
    seed, n, p = gi
    g = random_graph(seed, n, p)
    src = int(np.random.default_rng(pick).integers(n))
    dist = bfs_within(g, src, radius)
    D = all_hop_distances(g)
    expected = {v: int(D[src, v]) for v in range(g.n) if D[src, v] <= radius}
    assert dist == expected


def test_bfs_isolated_node():
    g = Graph.build([(1, 2)], np.zeros((3, 2)), [0, 0, 0])
    assert bfs_within(g, 0, 2) == {0: 0}


def test_bfs_radius_zero_and_errors():
    g = random_graph(seed=3, n=6, p=0.5)
    assert bfs_within(g, 4, 0) == {4: 0}
    with pytest.raises(ValueError):
        bfs_within(g, 9, 1)
    with pytest.raises(ValueError):
        bfs_within(g, 0, -1)


# --- largest connected component ---

@settings(max_examples=25, deadline=None)
@given(graph_inputs(min_n=4, max_n=30, min_p=0.05, max_p=0.3))
def test_lcc_matches_bfs_component_oracle(gi):
    seed, n, p = gi
    g = random_graph(seed, n, p)
    comps = []
    left = set(range(g.n))
    while left:
        c = connected_component_of(g, min(left))
        comps.append(c)
        left -= c
    best = max(len(c) for c in comps)
    winners = [c for c in comps if len(c) == best]
    expected = min(winners, key=min)
    lcc = largest_connected_component(g)
    assert lcc.n == len(expected)
    kept = sorted(expected)
    assert (lcc.labels == g.labels[kept]).all()
    assert np.array_equal(lcc.features, g.features[kept])


def test_lcc_tie_break_keeps_smallest_id():
    g = Graph.build([(2, 3), (0, 1)], np.arange(8, dtype=float).reshape(4, 2), [0, 1, 1, 0])
    lcc = largest_connected_component(g)
    assert lcc.n == 2
    assert np.array_equal(lcc.features, g.features[[0, 1]])


def test_lcc_idempotent(small_connected):
    again = largest_connected_component(small_connected)
    assert again.n == small_connected.n
    assert (again.indices == small_connected.indices).all()


# --- splits ---

def test_random_split_sizes_and_disjointness():
    g = random_graph(seed=4, n=53, p=0.1)
    sp = random_split(g, 0.2, 0.1, seed=7)
    assert sp.train.size == round(0.2 * 53)
    assert sp.validation.size == round(0.1 * 53)
    allidx = np.concatenate([sp.train, sp.validation, sp.test])
    assert np.array_equal(np.sort(allidx), np.arange(53))


def test_random_split_deterministic_per_seed():
    g = random_graph(seed=4, n=40, p=0.1)
    a = random_split(g, 0.2, 0.1, seed=5)
    b = random_split(g, 0.2, 0.1, seed=5)
    c = random_split(g, 0.2, 0.1, seed=6)
    assert np.array_equal(a.train, b.train) and np.array_equal(a.test, b.test)
    assert not np.array_equal(a.train, c.train)


def test_random_split_rejects_bad_fractions():
    g = random_graph(seed=4, n=20, p=0.2)
    for tf, vf in [(0.0, 0.1), (0.9, 0.2), (-0.1, 0.1), (0.5, -0.1)]:
        with pytest.raises(ValueError):
            random_split(g, tf, vf, seed=0)


# --- stochastic block model ---

def test_decode_triangle_matches_enumeration():
    for s in [2, 3, 5, 9]:
        pairs = list(itertools.combinations(range(s), 2))
        idx = np.arange(len(pairs), dtype=np.int64)
        i, j = _decode_triangle(idx, s)
        assert [(int(a), int(b)) for a, b in zip(i, j)] == pairs


def test_sample_distinct_properties():
    rng = np.random.default_rng(0)
    got = _sample_distinct(rng, 10**7, 5000)
    assert got.size == 5000
    assert np.unique(got).size == 5000
    assert got.min() >= 0 and got.max() < 10**7
    assert _sample_distinct(rng, 5, 10).size == 5


def test_sbm_structure_and_determinism():
    g1 = generate_sbm([30, 20, 10], 0.3, 0.05, 4, seed=9)
    g2 = generate_sbm([30, 20, 10], 0.3, 0.05, 4, seed=9)
    g3 = generate_sbm([30, 20, 10], 0.3, 0.05, 4, seed=10)
    assert g1.n == 60 and g1.num_classes == 3
    assert (g1.labels == np.repeat([0, 1, 2], [30, 20, 10])).all()
    assert (g1.indices == g2.indices).all()
    assert np.array_equal(g1.features, g2.features)
    assert not np.array_equal(g1.features, g3.features)


def test_sbm_edge_counts_near_expectation():
    g = generate_sbm([200, 200], 0.1, 0.01, 4, seed=1)
    intra_pairs = 2 * (200 * 199 // 2)
    cross_pairs = 200 * 200
    edges = g.edge_array()
    cross = ((edges[:, 0] < 200) != (edges[:, 1] < 200)).sum()
    intra = edges.shape[0] - cross
    for count, pairs, p in [(intra, intra_pairs, 0.1), (cross, cross_pairs, 0.01)]:
        mean = pairs * p
        sigma = np.sqrt(pairs * p * (1 - p))
        assert abs(count - mean) < 5 * sigma


def test_sbm_no_cross_edges_when_pout_zero():
    g = generate_sbm([40, 40], 0.2, 0.0, 4, seed=2)
    edges = g.edge_array()
    assert (((edges[:, 0] < 40) == (edges[:, 1] < 40))).all()


def test_sbm_rejects_bad_parameters():
    with pytest.raises(ValueError):
        generate_sbm([0, 10], 0.2, 0.1, 4, seed=0)
    with pytest.raises(ValueError):
        generate_sbm([10, 10], 0.1, 0.2, 4, seed=0)  # p_out >= p_in
    with pytest.raises(ValueError):
        generate_sbm([10, 10], 0.2, 0.1, 0, seed=0)


# --- bundles ---

def test_bundle_round_trip(tmp_path):
    g = generate_sbm([20, 15], 0.3, 0.05, 5, seed=6)
    save_graph_bundle(g, tmp_path / "b")
    back = load_graph_bundle(tmp_path / "b")
    assert back.n == g.n and back.num_edges == g.num_edges
    assert back.num_classes == g.num_classes and back.name == g.name
    assert (back.labels == g.labels).all()
    assert np.allclose(back.features, g.features, atol=0, rtol=0)
    assert (back.indices == g.indices).all()


def _write_bundle(d, edges, features, labels, meta=None):
    d.mkdir(parents=True, exist_ok=True)
    (d / "edges.tsv").write_text(edges)
    (d / "features.csv").write_text(features)
    (d / "labels.csv").write_text(labels)
    if meta is not None:
        (d / "meta.json").write_text(json.dumps(meta))


def test_bundle_loader_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_graph_bundle(tmp_path / "missing")

    d = tmp_path / "nofeat"
    d.mkdir()
    (d / "edges.tsv").write_text("0\t1\n")
    with pytest.raises(FileNotFoundError, match="features.csv"):
        load_graph_bundle(d)

    d = tmp_path / "loop"
    _write_bundle(d, "0\t0\n", "1,0\n0,1\n", "0\n1\n")
    with pytest.raises(ValueError, match="self-loop"):
        load_graph_bundle(d)

    d = tmp_path / "range"
    _write_bundle(d, "0\t7\n", "1,0\n0,1\n", "0\n1\n")
    with pytest.raises(ValueError, match="out of range"):
        load_graph_bundle(d)

    d = tmp_path / "ragged"
    _write_bundle(d, "0\t1\n", "1,0\n0,1,2\n", "0\n1\n")
    with pytest.raises(ValueError, match="ragged|columns"):
        load_graph_bundle(d)

    d = tmp_path / "badc"
    _write_bundle(d, "0\t1\n", "1,0\n0,1\n", "0\n3\n", meta={"name": "x", "C": 2})
    with pytest.raises(ValueError):
        load_graph_bundle(d)


def test_bundle_duplicate_edges_collapse_and_meta_optional(tmp_path):
    d = tmp_path / "dups"
    _write_bundle(d, "0\t1\n1\t0\n0\t1\n1\t2\n", "1,0\n0,1\n1,1\n", "0\n1\n1\n")
    g = load_graph_bundle(d)
    assert g.num_edges == 2
    assert g.name == "dups"
    assert g.num_classes == 2


def test_bundle_empty_edges_ok(tmp_path):
    d = tmp_path / "empty"
    _write_bundle(d, "", "1,0\n0,1\n", "0\n1\n")
    g = load_graph_bundle(d)
    assert g.n == 2 and g.num_edges == 0


# --- feature normalization ---

def test_row_normalize_features():
    X = np.array([[2.0, 2.0], [0.0, 0.0], [1.0, 3.0]])
    g = Graph.build([(0, 1)], X, [0, 1, 0])
    gn = row_normalize_features(g)
    assert np.allclose(gn.features.sum(axis=1), [1.0, 0.0, 1.0])
    assert np.allclose(g.features, X)  # original untouched
    assert gn.indices is g.indices

import pickle

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from mgcn.datasets import (
    DatasetStatsWarning,
    GraphDataset,
    _assemble_planetoid,
    dataset_root,
    graph_dataset_stats,
    load_citation_text,
    load_dataset,
    load_planetoid,
    load_tu,
    random_split,
    row_normalize,
    toy_citation,
    toy_graphs,
    write_citation_text,
    write_planetoid,
    write_tu,
)
from mgcn.errors import DataError, ParameterError, UsageError
from mgcn.graph import Graph


def small_citation(rng, n=30, k=3, d=5):
    labels = rng.integers(0, k, n)
    labels[:k] = np.arange(k)
    feats = (rng.random((n, d)) < 0.4).astype(float)
    edges = np.argwhere(np.triu(rng.random((n, n)) < 0.15, k=1))
    return feats, labels, edges


# --- splits

@pytest.mark.parametrize("n, sizes", [(10, (8, 1, 1)), (1113, (890, 111, 112)), (1178, (942, 118, 118))])
def test_split_sizes(n, sizes):
    s = random_split(n, 0)
    assert (len(s.train), len(s.val), len(s.test)) == sizes


@settings(max_examples=50, deadline=None)
@given(st.integers(10, 3000), st.integers(0, 2**32 - 1))
def test_split_partitions_range(n, seed):
    s = random_split(n, seed)
    joined = np.concatenate([s.train, s.val, s.test])
    np.testing.assert_array_equal(np.sort(joined), np.arange(n))
    assert len(s.train) == (8 * n) // 10


def test_split_determinism():
    a, b, c = random_split(500, 3), random_split(500, 3), random_split(500, 4)
    np.testing.assert_array_equal(a.train, b.train)
    assert not np.array_equal(a.train, c.train)


def test_split_too_small():
    with pytest.raises(ParameterError):
        random_split(9, 0)


# --- normalisation

def test_row_normalize_leaves_zero_rows():
    out = row_normalize(np.array([[1.0, 3.0], [0.0, 0.0]]))
    np.testing.assert_array_equal(out, [[0.25, 0.75], [0.0, 0.0]])


# --- Planetoid

def test_planetoid_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    n = 520
    feats, labels, edges = small_citation(rng, n=n)
    test_index = rng.permutation(np.arange(510, n))
    write_planetoid(tmp_path / "toyset" / "raw", "toyset_unused", feats, labels, edges, 3, test_index)
    write_planetoid(tmp_path, "cora", feats, labels, edges, 3, test_index)
    with pytest.warns(DatasetStatsWarning):
        ds = load_planetoid(tmp_path, "cora")
    g = ds.graph
    assert g.num_nodes == n
    np.testing.assert_array_equal(g.node_labels, labels)
    np.testing.assert_allclose(g.features, row_normalize(feats))
    np.testing.assert_array_equal(ds.train_mask, [0, 1, 2])
    np.testing.assert_array_equal(ds.val_mask, np.arange(3, 503))
    np.testing.assert_array_equal(ds.test_mask, np.arange(510, n))
    assert ds.masks_disjoint()
    np.testing.assert_array_equal(g.edges, Graph(n, edges, feats).edges)


def test_planetoid_directory_variants(tmp_path):
    rng = np.random.default_rng(1)
    feats, labels, edges = small_citation(rng, n=520)
    write_planetoid(tmp_path / "Citeseer" / "raw", "citeseer", feats, labels, edges, 4, np.arange(505, 520))
    with pytest.warns(DatasetStatsWarning):
        ds = load_planetoid(tmp_path, "citeseer")
    assert ds.graph.num_nodes == 520


def test_planetoid_missing_file_is_named(tmp_path):
    rng = np.random.default_rng(2)
    feats, labels, edges = small_citation(rng, n=520)
    write_planetoid(tmp_path, "pubmed", feats, labels, edges, 3, np.arange(510, 520))
    (tmp_path / "ind.pubmed.ally").unlink()
    with pytest.raises(FileNotFoundError, match=r"ind\.pubmed\.ally"):
        load_planetoid(tmp_path, "pubmed")
    with pytest.raises(FileNotFoundError, match=r"ind\.cora\.x"):
        load_planetoid(tmp_path, "cora")


def test_planetoid_pads_missing_test_rows():
    # test ids 506..509 but node 508 has no feature row (the citeseer quirk)
    allx = sp.csr_matrix(np.eye(506, 3))
    ally = np.eye(2)[np.arange(506) % 2]
    tx = sp.csr_matrix(np.ones((3, 3)))
    ty = np.eye(2)[[1, 1, 0]]
    objs = {"x": allx[:2], "y": ally[:2], "allx": allx, "ally": ally, "tx": tx, "ty": ty,
            "graph": {i: [] for i in range(510)}}
    ds = _assemble_planetoid("tiny", objs, np.array([509, 506, 507]))
    assert ds.graph.num_nodes == 510
    np.testing.assert_array_equal(ds.graph.features[508], np.zeros(3))
    np.testing.assert_allclose(ds.graph.features[509], np.full(3, 1 / 3))
    np.testing.assert_array_equal(ds.test_mask, [506, 507, 509])
    assert ds.graph.node_labels[507] == 0


def test_planetoid_writer_needs_test_nodes_last(tmp_path):
    with pytest.raises(DataError):
        write_planetoid(tmp_path, "cora", np.eye(4), [0, 1, 0, 1], [], 2, [0, 1])


# --- plain-text citation

def test_toy_citation_fixture():
    ds = toy_citation()
    assert ds.graph.num_nodes == 3 and ds.graph.num_edges == 2
    assert ds.num_classes == 2
    np.testing.assert_array_equal(ds.train_mask, [0, 1, 2])


def test_citation_text_round_trip(tmp_path):
    ds = toy_citation()
    back = load_citation_text(write_citation_text(ds, tmp_path / "t"))
    np.testing.assert_array_equal(back.graph.features, ds.graph.features)
    np.testing.assert_array_equal(back.graph.edges, ds.graph.edges)
    np.testing.assert_array_equal(back.test_mask, ds.test_mask)


# --- TU

def single_graph_dataset():
    return GraphDataset([Graph(3, [(0, 1), (1, 2)], np.array([[1.0, 0.5], [0.0, 2.0], [3.0, -1.0]]), label=0)],
                        num_classes=1, name="ONE")


def test_tu_single_graph_round_trip(tmp_path):
    ds = single_graph_dataset()
    write_tu(ds, tmp_path)
    back = load_tu(tmp_path, "ONE")
    assert len(back) == 1 and back.num_classes == 1
    g = back.graphs[0]
    assert g.num_nodes == 3 and g.num_edges == 2 and g.label == 0
    np.testing.assert_array_equal(g.features, ds.graphs[0].features)


def test_tu_node_labels_become_one_hot_and_labels_remap(tmp_path):
    graphs = [Graph(2, [(0, 1)], np.zeros((2, 1)), label=0), Graph(1, [], np.zeros((1, 1)), label=0)]
    write_tu(GraphDataset(graphs, 1, "NL"), tmp_path, node_labels=[[5, 7], [7]])
    (tmp_path / "NL" / "NL_graph_labels.txt").write_text("-1\n1\n")
    ds = load_tu(tmp_path, "NL")
    assert ds.num_classes == 2
    np.testing.assert_array_equal(ds.labels(), [0, 1])
    np.testing.assert_array_equal(ds.graphs[0].features, [[1, 0], [0, 1]])
    np.testing.assert_array_equal(ds.graphs[1].features, [[0, 1]])


def test_tu_degree_one_hot_when_no_node_information(tmp_path):
    d = tmp_path / "DEG"
    d.mkdir()
    (d / "DEG_A.txt").write_text("1, 2\n2, 1\n2, 3\n3, 2\n")
    (d / "DEG_graph_indicator.txt").write_text("1\n1\n1\n2\n")
    (d / "DEG_graph_labels.txt").write_text("0\n1\n")
    ds = load_tu(tmp_path, "DEG")
    # degrees 1, 2, 1 and an isolated node 0; capped at max degree 2
    np.testing.assert_array_equal(ds.graphs[0].features, [[0, 1, 0], [0, 0, 1], [0, 1, 0]])
    np.testing.assert_array_equal(ds.graphs[1].features, [[1, 0, 0]])


@pytest.mark.parametrize("indicator, lineno", [("1\n1\n3\n", 3), ("1\n2\n1\n", 3), ("1\nx\n2\n", 2), ("0\n", 1)])
def test_tu_bad_indicator_reports_line(tmp_path, indicator, lineno):
    d = tmp_path / "BAD"
    d.mkdir()
    (d / "BAD_A.txt").write_text("1, 2\n")
    (d / "BAD_graph_indicator.txt").write_text(indicator)
    (d / "BAD_graph_labels.txt").write_text("0\n0\n0\n")
    with pytest.raises(DataError, match=f"line {lineno}"):
        load_tu(tmp_path, "BAD")


def test_tu_edge_across_graphs(tmp_path):
    d = tmp_path / "X"
    d.mkdir()
    (d / "X_A.txt").write_text("1, 2\n2, 3\n")
    (d / "X_graph_indicator.txt").write_text("1\n1\n2\n")
    (d / "X_graph_labels.txt").write_text("0\n1\n")
    with pytest.raises(DataError, match="line 2"):
        load_tu(tmp_path, "X")


def test_tu_missing_file(tmp_path):
    write_tu(single_graph_dataset(), tmp_path)
    (tmp_path / "ONE" / "ONE_graph_labels.txt").unlink()
    with pytest.raises(FileNotFoundError, match="ONE_graph_labels"):
        load_tu(tmp_path, "ONE")


def test_tu_loader_is_deterministic():
    a, b = toy_graphs(), toy_graphs()
    for g, h in zip(a.graphs, b.graphs):
        np.testing.assert_array_equal(g.features, h.features)
        np.testing.assert_array_equal(g.edges, h.edges)


def test_toy_graph_fixture_statistics():
    ds = toy_graphs()
    stats = graph_dataset_stats(ds)
    assert stats["graphs"] == 10 and stats["classes"] == 2
    assert stats["avg_nodes"] == pytest.approx(5.0)
    assert ds.num_features == 3
    assert sorted(np.bincount(ds.labels())) == [5, 5]


def test_graph_stats_mismatch_warns(tmp_path):
    write_tu(GraphDataset(single_graph_dataset().graphs, 1, "PROTEINS"), tmp_path)
    with pytest.warns(DatasetStatsWarning):
        load_tu(tmp_path, "proteins")


# --- entry points

def test_dataset_root_precedence(monkeypatch, tmp_path):
    monkeypatch.setenv("DATASET_ROOT", str(tmp_path))
    assert dataset_root() == tmp_path
    assert dataset_root("/elsewhere").as_posix() == "/elsewhere"
    monkeypatch.delenv("DATASET_ROOT")
    assert dataset_root().as_posix() == "datasets"


def test_load_dataset_names():
    assert load_dataset("node", "toy").graph.num_nodes == 3
    assert len(load_dataset("graph", "TOY")) == 10
    with pytest.raises(UsageError, match="cora"):
        load_dataset("node", "imdb")
    with pytest.raises(UsageError, match="PROTEINS"):
        load_dataset("graph", "imdb")
    with pytest.raises(UsageError):
        load_dataset("edge", "toy")


def test_pickled_files_use_protocol_readable_by_latin1(tmp_path):
    rng = np.random.default_rng(4)
    feats, labels, edges = small_citation(rng, n=520)
    write_planetoid(tmp_path, "cora", feats, labels, edges, 3, np.arange(510, 520))
    with open(tmp_path / "ind.cora.graph", "rb") as f:
        assert isinstance(pickle.load(f, encoding="latin1"), dict)

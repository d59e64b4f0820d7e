import numpy as np
import pytest

from mgcn.datasets import CitationDataset, Split, toy_citation, toy_graphs
from mgcn.errors import DivergenceError, ParameterError
from mgcn.graph import Graph
from mgcn.models import KINDS, ArchitectureConfig, init_params
from mgcn.training import (
    GraphTrainConfig,
    NodeTrainConfig,
    accuracy,
    depth_sweep,
    evaluate,
    train,
    train_graph,
    train_node,
)

TOY = dict(num_layers=2, hidden=16)


def all_split(n):
    idx = np.arange(n)
    return Split(idx, idx, idx, 0)


@pytest.mark.parametrize("kind", KINDS)
def test_toy_citation_is_memorised_in_200_epochs(kind):
    ds = toy_citation()
    cfg = ArchitectureConfig(kind, **TOY)
    r = train_node(cfg, ds, NodeTrainConfig(max_epochs=200, patience=200), keep_params=True)
    assert r.epochs_run == 200
    assert evaluate(cfg, r.params, ds, ds.train_mask) == 1.0


@pytest.mark.parametrize("kind", KINDS)
def test_toy_graphs_are_memorised(kind):
    ds = toy_graphs()
    cfg = ArchitectureConfig(kind, activation="relu", **TOY)
    tcfg = GraphTrainConfig(learning_rate=0.01, max_epochs=200, patience=200)
    r = train_graph(cfg, ds, all_split(len(ds)), tcfg, keep_params=True)
    assert evaluate(cfg, r.params, ds) == 1.0


@pytest.mark.parametrize("kind", KINDS)
def test_loss_decreases_over_first_ten_epochs(kind):
    cfg = ArchitectureConfig(kind, **TOY)
    r = train_node(cfg, toy_citation(), NodeTrainConfig(learning_rate=0.01, max_epochs=10, patience=10))
    assert len(r.loss_trace) == 10
    assert r.loss_trace[-1] < r.loss_trace[0]
    slope = np.polyfit(np.arange(10), r.loss_trace, 1)[0]
    assert slope < 0


@pytest.mark.parametrize("patience", [0, 3])
def test_patience_stops_right_after_the_allowance(patience):
    ds = toy_citation()
    cfg = ArchitectureConfig("gcn", **TOY)
    r = train_node(cfg, ds, NodeTrainConfig(max_epochs=500, patience=patience))
    assert r.epochs_run < 500
    assert r.epochs_run == r.best_epoch + patience + 1


def test_reported_test_accuracy_comes_from_best_checkpoint():
    rng = np.random.default_rng(0)
    n = 40
    edges = np.argwhere(np.triu(rng.random((n, n)) < 0.1, k=1))
    labels = rng.integers(0, 3, n)
    ds = CitationDataset(Graph(n, edges, rng.standard_normal((n, 6)), labels),
                         np.arange(0, 12), np.arange(12, 24), np.arange(24, 40), 3, "noise")
    cfg = ArchitectureConfig("mgcn_h", num_layers=2, hidden=8)
    r = train_node(cfg, ds, NodeTrainConfig(max_epochs=300, patience=20), keep_params=True)
    assert r.epochs_run <= 300
    assert evaluate(cfg, r.params, ds, ds.test_mask) == r.test_accuracy
    assert evaluate(cfg, r.params, ds, ds.val_mask) == r.best_val_accuracy


@pytest.mark.parametrize("task", ["node", "graph"])
def test_identical_seeds_give_identical_results(task):
    cfg = ArchitectureConfig("mgcn_g", num_layers=2, hidden=8, dropout=0.2)
    if task == "node":
        ds, tcfg = toy_citation(), NodeTrainConfig(max_epochs=30, seed=4)
    else:
        ds, tcfg = toy_graphs(), GraphTrainConfig(max_epochs=15, batch_size=4, seed=4)
    a, b = train(task, cfg, ds, tcfg), train(task, cfg, ds, tcfg)
    assert a.loss_trace == b.loss_trace
    assert (a.test_accuracy, a.best_val_accuracy, a.epochs_run, a.best_epoch) == \
        (b.test_accuracy, b.best_val_accuracy, b.epochs_run, b.best_epoch)
    assert a.wall_time_seconds > 0


def test_graph_training_defaults_split_from_seed():
    ds = toy_graphs()
    cfg = ArchitectureConfig("gcn", num_layers=1, hidden=4, readout="mean")
    r = train("graph", cfg, ds, GraphTrainConfig(max_epochs=3))
    assert 0.0 <= r.test_accuracy <= 1.0
    assert 1 <= r.epochs_run <= 3


def test_empty_masks_and_splits_are_rejected():
    ds = toy_citation()
    cfg = ArchitectureConfig("gcn", num_layers=1, hidden=4)
    no_val = CitationDataset(ds.graph, ds.train_mask, [], ds.test_mask, 2)
    with pytest.raises(ParameterError):
        train_node(cfg, no_val)
    g = toy_graphs()
    with pytest.raises(ParameterError):
        train_graph(cfg, g, Split(np.arange(8), np.array([], dtype=int), np.arange(8, 10)))
    with pytest.raises(ParameterError):
        train_graph(cfg, g, all_split(10), GraphTrainConfig(batch_size=0))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_loss_aborts_with_diagnostic():
    ds = toy_citation()
    bad = Graph(3, ds.graph.edges, np.full((3, 3), np.inf), ds.graph.node_labels)
    broken = CitationDataset(bad, ds.train_mask, ds.val_mask, ds.test_mask, 2)
    with pytest.raises(DivergenceError, match="epoch 1"):
        train_node(ArchitectureConfig("gcn", num_layers=1, hidden=4), broken)


# --- evaluation

def test_accuracy_examples():
    labels = np.array([0, 1, 2, 1])
    assert accuracy(np.eye(3)[labels] * 5, labels) == 1.0
    balanced = np.array([0, 1, 2, 0, 1, 2])
    assert accuracy(np.zeros((6, 3)), balanced) == pytest.approx(1 / 3)


def test_evaluate_hand_count_on_toy():
    # all-zero weights tie every class, so every node is predicted as class 0;
    # toy labels are (0, 0, 1): two of three right
    ds = toy_citation()
    cfg = ArchitectureConfig("gcn", num_layers=1, hidden=4)
    params = init_params(cfg, 3, 2, np.random.default_rng(0))
    for t in params.tensors():
        t.data = np.zeros_like(t.data)
    assert evaluate(cfg, params, ds) == pytest.approx(2 / 3)
    assert evaluate(cfg, params, ds, [2]) == 0.0


def test_evaluate_is_deterministic_with_dropout_config():
    ds = toy_graphs()
    cfg = ArchitectureConfig("mgcn_h", num_layers=2, hidden=4, dropout=0.5)
    params = init_params(cfg, 3, 2, np.random.default_rng(1), task="graph")
    assert evaluate(cfg, params, ds) == evaluate(cfg, params, ds)


# --- depth sweep

def test_depth_sweep_rows():
    ds = toy_graphs()
    cfg = ArchitectureConfig("gcn", hidden=4, readout="mean")
    tcfg = GraphTrainConfig(max_epochs=2)
    row = depth_sweep(cfg, ds, [3], tcfg)
    assert len(row) == 1 and row[0][0] == 3
    assert [d for d, _ in depth_sweep(cfg, ds, [1, 2], tcfg)] == [1, 2]
    with pytest.raises(ParameterError):
        depth_sweep(cfg, ds, [], tcfg)

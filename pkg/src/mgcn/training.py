"""Training loops with early stopping, evaluation, and depth sweeps."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .datasets import CitationDataset, GraphDataset, Split, random_split
from .errors import DivergenceError, ParameterError
from .graph import batch_graphs
from .models import ArchitectureConfig, ModelParams, check_params, forward, graph_forward, init_params
from .optim import Adam, RMSprop
from .tensor import Tensor, backward, masked_softmax_cross_entropy, softmax_rows

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NodeTrainConfig:
    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    max_epochs: int = 3000
    patience: int = 100
    seed: int = 0


@dataclass(frozen=True)
class GraphTrainConfig:
    learning_rate: float = 5e-4
    weight_decay: float = 1e-4
    max_epochs: int = 100_000
    patience: int = 50
    batch_size: int = 128
    seed: int = 0


@dataclass
class RunResult:
    best_val_accuracy: float
    test_accuracy: float
    epochs_run: int
    wall_time_seconds: float
    loss_trace: list[float]
    best_epoch: int
    params: Optional[ModelParams] = field(default=None, repr=False, compare=False)


def accuracy(logits: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of rows whose argmax (first index on ties) equals the label."""
    labels = np.asarray(labels)
    if labels.size == 0:
        return float("nan")
    return float(np.mean(np.argmax(logits, axis=1) == labels))


def _detached(params: ModelParams) -> ModelParams:
    return ModelParams(
        [Tensor(t.data) for t in params.layer_weights],
        [Tensor(t.data) for t in params.attention_weights],
        None if params.classifier_weight is None else Tensor(params.classifier_weight.data),
        [Tensor(t.data) for t in params.head],
    )


def _xent(logits: np.ndarray, labels: np.ndarray) -> float:
    p = softmax_rows(logits)
    return float(-np.mean(np.log(p[np.arange(labels.size), labels] + 1e-300)))


def evaluate(cfg: ArchitectureConfig, params: ModelParams, data: Union[CitationDataset, GraphDataset],
             subset: Optional[Sequence[int]] = None, batch_size: int = 512) -> float:
    """Inference-mode accuracy on a node mask or a list of graph indices (all when omitted)."""
    frozen = _detached(params)
    if isinstance(data, CitationDataset):
        g = data.graph
        logits = forward(Tensor(g.features), g.adjacency, frozen, cfg).data
        idx = np.arange(g.num_nodes) if subset is None else np.asarray(subset, dtype=np.int64)
        return accuracy(logits[idx], g.node_labels[idx])
    idx = np.arange(len(data)) if subset is None else np.asarray(subset, dtype=np.int64)
    logits = _graph_logits(cfg, frozen, data, idx, batch_size)
    return accuracy(logits, data.labels()[idx])


def _graph_logits(cfg, params, data: GraphDataset, idx: np.ndarray, batch_size: int) -> np.ndarray:
    out = []
    for start in range(0, idx.size, batch_size):
        batch = batch_graphs([data.graphs[i] for i in idx[start : start + batch_size]])
        out.append(graph_forward(batch, params, cfg).data)
    return np.vstack(out)


def train_node(cfg: ArchitectureConfig, dataset: CitationDataset, tcfg: NodeTrainConfig = NodeTrainConfig(),
               keep_params: bool = False) -> RunResult:
    """Full-batch RMSprop on the train mask.

    Monitors validation accuracy (ties broken by lower validation loss) and
    stops once it has not improved for more than ``patience`` epochs. The
    reported test accuracy belongs to the best-validation epoch.
    """
    if dataset.train_mask.size == 0:
        raise ParameterError("empty training mask")
    if dataset.val_mask.size == 0:
        raise ParameterError("empty validation mask")
    g = dataset.graph
    rng = np.random.default_rng(tcfg.seed)
    params = init_params(cfg, g.num_features, dataset.num_classes, rng, task="node")
    check_params(params, cfg, g.num_features, dataset.num_classes)
    opt = RMSprop(params.tensors(), tcfg.learning_rate, tcfg.weight_decay)
    x, a, y = Tensor(g.features), g.adjacency, g.node_labels
    val_y, test_y = y[dataset.val_mask], y[dataset.test_mask]

    best_acc, best_loss, best_test, best_epoch = -1.0, np.inf, float("nan"), 0
    best_state = params.snapshot()
    trace: list[float] = []
    wall = 0.0
    waited = 0
    epoch = 0
    for epoch in range(1, tcfg.max_epochs + 1):
        t0 = time.perf_counter()
        opt.zero_grad()
        logits = forward(x, a, params, cfg, training=True, rng=rng)
        loss = masked_softmax_cross_entropy(logits, y, dataset.train_mask)
        backward(loss)
        opt.step()
        wall += time.perf_counter() - t0
        trace.append(loss.item())
        if not np.isfinite(trace[-1]):
            raise DivergenceError(f"{cfg.kind}: training loss became {trace[-1]} at epoch {epoch}")

        out = forward(x, a, _detached(params), cfg).data
        val_acc = accuracy(out[dataset.val_mask], val_y)
        val_loss = _xent(out[dataset.val_mask], val_y)
        if val_acc > best_acc or (val_acc == best_acc and val_loss < best_loss):
            best_acc, best_loss, best_epoch = val_acc, val_loss, epoch
            best_test = accuracy(out[dataset.test_mask], test_y) if test_y.size else float("nan")
            best_state = params.snapshot()
            waited = 0
        else:
            waited += 1
            if waited > tcfg.patience:
                break
    params.restore(best_state)
    logger.info("%s node run: best val %.4f test %.4f after %d epochs", cfg.kind, best_acc, best_test, epoch)
    return RunResult(best_acc, best_test, epoch, wall, trace, best_epoch, params if keep_params else None)


def train_graph(cfg: ArchitectureConfig, dataset: GraphDataset, split: Split,
                tcfg: GraphTrainConfig = GraphTrainConfig(), keep_params: bool = False) -> RunResult:
    """Mini-batch Adam over block-diagonal batches.

    Early stopping watches the validation loss; the test accuracy reported is
    the one measured at the epoch with the lowest validation loss.
    """
    if len(split.val) == 0:
        raise ParameterError("empty validation split")
    if len(split.train) == 0:
        raise ParameterError("empty training split")
    if tcfg.batch_size < 1:
        raise ParameterError(f"batch_size must be positive, got {tcfg.batch_size}")
    rng = np.random.default_rng(tcfg.seed)
    params = init_params(cfg, dataset.num_features, dataset.num_classes, rng, task="graph")
    check_params(params, cfg, dataset.num_features, dataset.num_classes, task="graph")
    opt = Adam(params.tensors(), tcfg.learning_rate, tcfg.weight_decay)
    labels = dataset.labels()
    train_idx = np.asarray(split.train, dtype=np.int64)
    val_idx = np.asarray(split.val, dtype=np.int64)
    test_idx = np.asarray(split.test, dtype=np.int64)

    best_loss, best_acc, best_test, best_epoch = np.inf, 0.0, float("nan"), 0
    best_state = params.snapshot()
    trace: list[float] = []
    wall = 0.0
    waited = 0
    epoch = 0
    for epoch in range(1, tcfg.max_epochs + 1):
        order = train_idx[rng.permutation(train_idx.size)]
        batches = [order[i : i + tcfg.batch_size] for i in range(0, order.size, tcfg.batch_size)]
        batched = [batch_graphs([dataset.graphs[i] for i in b]) for b in batches]
        total, count = 0.0, 0
        t0 = time.perf_counter()
        for b, bg in zip(batches, batched):
            opt.zero_grad()
            logits = graph_forward(bg, params, cfg, training=True, rng=rng)
            loss = masked_softmax_cross_entropy(logits, labels[b])
            backward(loss)
            opt.step()
            total += loss.item() * b.size
            count += b.size
        wall += time.perf_counter() - t0
        trace.append(total / count)
        if not np.isfinite(trace[-1]):
            raise DivergenceError(f"{cfg.kind}: training loss became {trace[-1]} at epoch {epoch}")

        frozen = _detached(params)
        val_logits = _graph_logits(cfg, frozen, dataset, val_idx, tcfg.batch_size)
        val_loss = _xent(val_logits, labels[val_idx])
        if val_loss < best_loss:
            best_loss, best_epoch = val_loss, epoch
            best_acc = accuracy(val_logits, labels[val_idx])
            if test_idx.size:
                best_test = accuracy(_graph_logits(cfg, frozen, dataset, test_idx, tcfg.batch_size), labels[test_idx])
            best_state = params.snapshot()
            waited = 0
        else:
            waited += 1
            if waited > tcfg.patience:
                break
    params.restore(best_state)
    logger.info("%s graph run: best val %.4f test %.4f after %d epochs", cfg.kind, best_acc, best_test, epoch)
    return RunResult(best_acc, best_test, epoch, wall, trace, best_epoch, params if keep_params else None)


def train(task: str, cfg: ArchitectureConfig, dataset, tcfg, split: Optional[Split] = None) -> RunResult:
    """Dispatch on task; graph runs without an explicit split use ``random_split(n, tcfg.seed)``."""
    if task == "node":
        return train_node(cfg, dataset, tcfg)
    if split is None:
        split = random_split(len(dataset), tcfg.seed)
    return train_graph(cfg, dataset, split, tcfg)


def depth_sweep(cfg: ArchitectureConfig, dataset, depths: Sequence[int], tcfg, task: str = "graph",
                split: Optional[Split] = None) -> list[tuple[int, float]]:
    """One training run per depth with the same seed and split; returns (depth, test accuracy) pairs."""
    if not depths:
        raise ParameterError("depth list is empty")
    row = []
    for n in depths:
        result = train(task, cfg.with_depth(int(n)), dataset, tcfg, split)
        row.append((int(n), result.test_accuracy))
    return row

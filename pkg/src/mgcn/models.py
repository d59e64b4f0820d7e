"""GCN, snowball, truncated Krylov, MGCN(H) and MGCN(G) as pure forward functions.

Every architecture is a function of the node features, the renormalised
adjacency and a :class:`ModelParams` bundle. Node classification returns
pre-softmax logits per node; graph classification swaps the final
propagation-plus-classifier for a readout and a two-layer MLP head.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import DimensionError, ParameterError
from .graph import BatchedGraph
from .optim import glorot_init
from .sparse import SparseMatrix
from .tensor import (
    ACTIVATIONS,
    Tensor,
    add_bias,
    concat_cols,
    dropout,
    matmul,
    relu,
    segment_max,
    segment_mean,
    spmm,
    tanh,
)

KINDS = ("gcn", "snowball", "truncated_krylov", "mgcn_h", "mgcn_g")
MLP_HIDDEN = 128


@dataclass(frozen=True)
class ArchitectureConfig:
    """Shape and behaviour of one architecture instance.

    ``num_layers`` counts hidden graph-convolution layers H_1..H_n for every
    kind. ``hidden`` is one width for all layers or one width per layer.
    ``output_activation`` is the snowball/Krylov pre-classifier map g and
    ``classifier_dim`` its width d_C (defaults to the last hidden width).
    """

    kind: str
    num_layers: int = 2
    hidden: Union[int, tuple[int, ...]] = 64
    krylov_order: int = 2
    activation: str = "tanh"
    output_activation: str = "identity"
    dropout: float = 0.0
    attend_input: bool = False
    snowball_p: int = 0
    classifier_dim: Optional[int] = None
    readout: str = "mean_max"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown architecture {self.kind!r}; valid: {', '.join(KINDS)}")
        if self.num_layers < 1:
            raise ParameterError(f"num_layers must be >= 1, got {self.num_layers}")
        if isinstance(self.hidden, (list, tuple)):
            object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
            if len(self.hidden) != self.num_layers:
                raise ParameterError(f"{len(self.hidden)} hidden widths for {self.num_layers} layers")
        if min(self.widths()) < 1:
            raise ParameterError("hidden widths must be positive")
        if self.krylov_order < 1:
            raise ParameterError(f"krylov_order must be >= 1, got {self.krylov_order}")
        for act in (self.activation, self.output_activation):
            if act not in ACTIVATIONS:
                raise ParameterError(f"unknown activation {act!r}; valid: {', '.join(ACTIVATIONS)}")
        if not 0.0 <= self.dropout < 1.0:
            raise ParameterError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.snowball_p not in (0, 1):
            raise ParameterError(f"snowball_p must be 0 or 1, got {self.snowball_p}")
        if self.classifier_dim is not None and self.classifier_dim < 1:
            raise ParameterError("classifier_dim must be positive")
        if self.readout not in ("mean", "mean_max"):
            raise ParameterError(f"readout must be 'mean' or 'mean_max', got {self.readout!r}")

    def widths(self) -> list[int]:
        if isinstance(self.hidden, tuple):
            return list(self.hidden)
        return [int(self.hidden)] * self.num_layers

    def with_depth(self, n: int) -> "ArchitectureConfig":
        hidden = self.hidden if isinstance(self.hidden, int) else self.widths()[-1]
        return replace(self, num_layers=n, hidden=hidden)


@dataclass
class ModelParams:
    """Trainable tensors of one architecture instance.

    ``attention_weights`` are ordered by call site; for MGCN(H) with
    ``attend_input`` the first entry attends over the raw features.
    ``head`` is ``[W1, b1, W2, b2]`` for graph classification, else empty.
    """

    layer_weights: list[Tensor]
    attention_weights: list[Tensor] = field(default_factory=list)
    classifier_weight: Optional[Tensor] = None
    head: list[Tensor] = field(default_factory=list)

    def named(self) -> list[tuple[str, Tensor]]:
        out = [(f"W{i}", w) for i, w in enumerate(self.layer_weights)]
        out += [(f"att{i}", w) for i, w in enumerate(self.attention_weights)]
        if self.classifier_weight is not None:
            out.append(("W_C", self.classifier_weight))
        out += [(name, w) for name, w in zip(("mlp_W1", "mlp_b1", "mlp_W2", "mlp_b2"), self.head)]
        return out

    def tensors(self) -> list[Tensor]:
        return [t for _, t in self.named()]

    def zero_grad(self) -> None:
        for t in self.tensors():
            t.zero_grad()

    def snapshot(self) -> list[np.ndarray]:
        return [t.data.copy() for t in self.tensors()]

    def restore(self, state: Sequence[np.ndarray]) -> None:
        for t, arr in zip(self.tensors(), state):
            t.data = arr.copy()

    def num_parameters(self) -> int:
        return sum(t.data.size for t in self.tensors())


# ------------------------------------------------------------ shape rules

def weight_shapes(cfg: ArchitectureConfig, in_dim: int, num_classes: int, task: str = "node") -> dict:
    """Expected shapes of every parameter, keyed like :class:`ModelParams` fields."""
    w = cfg.widths()
    n = cfg.num_layers
    layers: list[tuple[int, int]] = []
    att: list[tuple[int, int]] = []
    cls_in = w[-1]
    if cfg.kind == "gcn":
        dims = [in_dim] + w
        layers = [(dims[i], dims[i + 1]) for i in range(n)]
    elif cfg.kind == "snowball":
        d_c = cfg.classifier_dim or w[-1]
        acc = in_dim
        for i in range(n):
            layers.append((acc, w[i]))
            acc += w[i]
        layers.append((acc, d_c))
        cls_in = d_c
    elif cfg.kind == "truncated_krylov":
        d_c = cfg.classifier_dim or w[-1]
        dims = [in_dim] + w
        layers = [(cfg.krylov_order * dims[i], dims[i + 1]) for i in range(n)]
        layers.append((w[-1], d_c))
        cls_in = d_c
    elif cfg.kind == "mgcn_h":
        first_in = in_dim
        if cfg.attend_input:
            att.append((in_dim, in_dim))
            first_in = 2 * in_dim
        layers.append((first_in, w[0]))
        for i in range(1, n):
            att.append((w[i - 1], w[i - 1]))
            layers.append((2 * w[i - 1], w[i]))
    elif cfg.kind == "mgcn_g":
        layers.append((in_dim, w[0]))
        acc = in_dim + w[0]
        for i in range(1, n):
            att.append((acc, acc))
            layers.append((acc, w[i]))
            acc += w[i]
    out = {"layer_weights": layers, "attention_weights": att}
    if task == "node":
        out["classifier_weight"] = (cls_in, num_classes)
        out["head"] = []
    else:
        r = 2 * cls_in if cfg.readout == "mean_max" else cls_in
        out["classifier_weight"] = None
        out["head"] = [(r, MLP_HIDDEN), (1, MLP_HIDDEN), (MLP_HIDDEN, num_classes), (1, num_classes)]
    return out


def init_params(cfg: ArchitectureConfig, in_dim: int, num_classes: int, rng: np.random.Generator,
                task: str = "node") -> ModelParams:
    shapes = weight_shapes(cfg, in_dim, num_classes, task)
    layers = [glorot_init(r, c, rng) for r, c in shapes["layer_weights"]]
    att = [glorot_init(r, c, rng) for r, c in shapes["attention_weights"]]
    cls = None
    if shapes["classifier_weight"] is not None:
        cls = glorot_init(*shapes["classifier_weight"], rng)
    head = []
    if shapes["head"]:
        (r1, c1), _, (r2, c2), _ = shapes["head"]
        head = [glorot_init(r1, c1, rng), Tensor(np.zeros((1, c1)), True),
                glorot_init(r2, c2, rng), Tensor(np.zeros((1, c2)), True)]
    return ModelParams(layers, att, cls, head)


def check_params(params: ModelParams, cfg: ArchitectureConfig, in_dim: int, num_classes: int,
                 task: str = "node") -> None:
    """Raise :class:`DimensionError` unless ``params`` chain for ``cfg``."""
    shapes = weight_shapes(cfg, in_dim, num_classes, task)
    got = {
        "layer_weights": [t.shape for t in params.layer_weights],
        "attention_weights": [t.shape for t in params.attention_weights],
        "classifier_weight": None if params.classifier_weight is None else params.classifier_weight.shape,
        "head": [t.shape for t in params.head],
    }
    for key, expected in shapes.items():
        if got[key] != expected:
            raise DimensionError(f"{cfg.kind}: {key} shapes {got[key]} do not match expected {expected}")


# ---------------------------------------------------------------- layers

def _propagate_then_transform(h: Tensor, a: SparseMatrix, w: Tensor) -> Tensor:
    if h.cols != w.rows:
        raise DimensionError(f"layer input width {h.cols} does not match weight {w.shape}")
    return matmul(spmm(a, h), w)


def gcn_layer(h: Tensor, a: SparseMatrix, w: Tensor, act: Union[str, Callable] = "relu") -> Tensor:
    """act(A H W)."""
    if a.dim != h.rows:
        raise DimensionError(f"adjacency {a.shape} does not match {h.rows} node rows")
    fn = ACTIVATIONS[act] if isinstance(act, str) else act
    return fn(_propagate_then_transform(h, a, w))


def attention_module(h: Tensor, a: SparseMatrix, w_att: Tensor) -> Tensor:
    """tanh(A H W) with a square W; output has the shape of ``h``."""
    if w_att.rows != w_att.cols or w_att.rows != h.cols:
        raise DimensionError(f"attention weight {w_att.shape} must be square with side {h.cols}")
    return gcn_layer(h, a, w_att, tanh)


def readout(h: Tensor, batch: BatchedGraph, mode: str = "mean_max") -> Tensor:
    """Per-graph column mean, concatenated with the column max for ``mean_max``."""
    if h.rows != batch.num_nodes:
        raise DimensionError(f"readout: {h.rows} rows for a batch of {batch.num_nodes} nodes")
    mean = segment_mean(h, batch.offsets)
    if mode == "mean":
        return mean
    return concat_cols([mean, segment_max(h, batch.offsets)])


def mlp_head(z: Tensor, weights: Sequence[Tensor], p: float = 0.0, training: bool = False,
             rng: Optional[np.random.Generator] = None) -> Tensor:
    """relu(Z W1 + b1) W2 + b2, with optional dropout on the hidden units."""
    w1, b1, w2, b2 = weights
    if z.cols != w1.rows or w1.cols != w2.rows:
        raise DimensionError(f"mlp_head: input {z.shape} does not chain with {w1.shape} and {w2.shape}")
    hidden = relu(add_bias(matmul(z, w1), b1))
    hidden = dropout(hidden, p, training, rng)
    return add_bias(matmul(hidden, w2), b2)


# ---------------------------------------------------------- architectures

class _Ctx:
    """Per-call dropout state."""

    def __init__(self, cfg: ArchitectureConfig, training: bool, rng):
        self.p = cfg.dropout
        self.training = training
        self.rng = rng

    def drop(self, t: Tensor) -> Tensor:
        return dropout(t, self.p, self.training, self.rng)


def _embed_gcn(x, a, params, cfg, ctx):
    h = x
    for w in params.layer_weights:
        h = gcn_layer(ctx.drop(h), a, w, cfg.activation)
    return h


def _embed_snowball(x, a, params, cfg, ctx):
    reps = [x]
    for w in params.layer_weights[:-1]:
        reps.append(gcn_layer(ctx.drop(concat_cols(reps)), a, w, cfg.activation))
    g = ACTIVATIONS[cfg.output_activation]
    return g(matmul(ctx.drop(concat_cols(reps)), params.layer_weights[-1]))


def krylov_block(h: Tensor, a: SparseMatrix, m: int) -> Tensor:
    """[H, AH, ..., A^{m-1} H]."""
    blocks = [h]
    for _ in range(m - 1):
        blocks.append(spmm(a, blocks[-1]))
    return concat_cols(blocks)


def _embed_krylov(x, a, params, cfg, ctx):
    f = ACTIVATIONS[cfg.activation]
    h = x
    for w in params.layer_weights[:-1]:
        h = f(matmul(krylov_block(ctx.drop(h), a, cfg.krylov_order), w))
    g = ACTIVATIONS[cfg.output_activation]
    return g(matmul(ctx.drop(h), params.layer_weights[-1]))


def _embed_mgcn_h(x, a, params, cfg, ctx):
    att = list(params.attention_weights)
    if cfg.attend_input:
        x = concat_cols([x, attention_module(x, a, att.pop(0))])
    h = gcn_layer(ctx.drop(x), a, params.layer_weights[0], cfg.activation)
    for w, w_att in zip(params.layer_weights[1:], att):
        c = concat_cols([h, attention_module(h, a, w_att)])
        h = gcn_layer(ctx.drop(c), a, w, cfg.activation)
    return h


def _embed_mgcn_g(x, a, params, cfg, ctx):
    h = gcn_layer(ctx.drop(x), a, params.layer_weights[0], cfg.activation)
    n = len(params.layer_weights)
    if n == 1:
        return h
    d = attention_module(concat_cols([x, h]), a, params.attention_weights[0])
    for i in range(1, n):
        h = gcn_layer(ctx.drop(d), a, params.layer_weights[i], cfg.activation)
        if i + 1 < n:
            # the attention output after the last layer never reaches the logits
            d = attention_module(concat_cols([h, d]), a, params.attention_weights[i])
    return h


_EMBED = {
    "gcn": _embed_gcn,
    "snowball": _embed_snowball,
    "truncated_krylov": _embed_krylov,
    "mgcn_h": _embed_mgcn_h,
    "mgcn_g": _embed_mgcn_g,
}


def embed(x: Tensor, a: SparseMatrix, params: ModelParams, cfg: ArchitectureConfig,
          training: bool = False, rng: Optional[np.random.Generator] = None) -> Tensor:
    """Node representation that feeds the classifier (H_n, or C for snowball/Krylov)."""
    if a.dim != x.rows:
        raise DimensionError(f"adjacency {a.shape} does not match {x.rows} feature rows")
    return _EMBED[cfg.kind](x, a, params, cfg, _Ctx(cfg, training, rng))


def _node_logits(x, a, params, cfg, training, rng, kind):
    if cfg.kind != kind:
        raise ParameterError(f"config kind {cfg.kind!r} passed to the {kind} forward")
    if params.classifier_weight is None:
        raise DimensionError("node classification needs a classifier weight W_C")
    r = embed(x, a, params, cfg, training, rng)
    r = dropout(r, cfg.dropout, training, rng)
    if kind in ("snowball", "truncated_krylov"):
        # L^p C W_C with L the renormalised adjacency
        if cfg.snowball_p == 1:
            r = spmm(a, r)
        return matmul(r, params.classifier_weight)
    return _propagate_then_transform(r, a, params.classifier_weight)


def vanilla_gcn_forward(x, a, params, cfg, training=False, rng=None) -> Tensor:
    """n ReLU/tanh graph convolutions, then A H_n W_C."""
    return _node_logits(x, a, params, cfg, training, rng, "gcn")


def snowball_forward(x, a, params, cfg, training=False, rng=None) -> Tensor:
    """Each layer reads the concatenation of X and all earlier outputs."""
    return _node_logits(x, a, params, cfg, training, rng, "snowball")


def truncated_krylov_forward(x, a, params, cfg, training=False, rng=None) -> Tensor:
    return _node_logits(x, a, params, cfg, training, rng, "truncated_krylov")


def mgcn_h_forward(x, a, params, cfg, training=False, rng=None) -> Tensor:
    """Hierarchical variant: every middle layer reads concat(H_l, attention(H_l))."""
    return _node_logits(x, a, params, cfg, training, rng, "mgcn_h")


def mgcn_g_forward(x, a, params, cfg, training=False, rng=None) -> Tensor:
    """Global variant: attention over the running concatenation of all scales."""
    return _node_logits(x, a, params, cfg, training, rng, "mgcn_g")


NODE_FORWARDS = {
    "gcn": vanilla_gcn_forward,
    "snowball": snowball_forward,
    "truncated_krylov": truncated_krylov_forward,
    "mgcn_h": mgcn_h_forward,
    "mgcn_g": mgcn_g_forward,
}


def forward(x, a, params, cfg, training=False, rng=None) -> Tensor:
    return NODE_FORWARDS[cfg.kind](x, a, params, cfg, training, rng)


def graph_forward(batch: BatchedGraph, params: ModelParams, cfg: ArchitectureConfig,
                  training: bool = False, rng: Optional[np.random.Generator] = None) -> Tensor:
    """Graph-level logits: embed, readout, MLP head."""
    if not params.head:
        raise DimensionError("graph classification needs MLP head weights")
    x = Tensor(batch.features)
    r = embed(x, batch.adjacency, params, cfg, training, rng)
    z = readout(r, batch, cfg.readout)
    return mlp_head(dropout(z, cfg.dropout, training, rng), params.head, cfg.dropout, training, rng)

"""Multi-scale graph convolutional networks on a small numpy autodiff core."""

from .errors import DataError, DimensionError, DivergenceError, MGCNError, ParameterError, UsageError
from .graph import BatchedGraph, Graph, batch_graphs, renormalized_adjacency
from .models import KINDS, ArchitectureConfig, ModelParams, forward, graph_forward, init_params
from .sparse import SparseMatrix
from .tensor import Tensor, backward
from .training import GraphTrainConfig, NodeTrainConfig, RunResult, depth_sweep, evaluate, train, train_graph, train_node

__version__ = "0.1.0"

__all__ = [
    "ArchitectureConfig", "BatchedGraph", "DataError", "DimensionError", "DivergenceError", "Graph",
    "GraphTrainConfig", "KINDS", "MGCNError", "ModelParams", "NodeTrainConfig", "ParameterError", "RunResult",
    "SparseMatrix", "Tensor", "UsageError", "backward", "batch_graphs", "depth_sweep", "evaluate", "forward",
    "graph_forward", "init_params", "renormalized_adjacency", "train", "train_graph", "train_node",
]

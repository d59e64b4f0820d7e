"""Loaders for Planetoid citation networks and TU graph-classification sets."""

from __future__ import annotations

import csv
import logging
import os
import pickle
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .errors import DataError, ParameterError, UsageError
from .graph import Graph, to_undirected

logger = logging.getLogger(__name__)

PathLike = Union[str, os.PathLike]

PLANETOID_NAMES = ("cora", "citeseer", "pubmed")
TU_NAMES = ("DD", "PROTEINS", "NCI1", "NCI109", "FRANKENSTEIN", "Mutagenicity")
_TU_ALIASES = {"d&d": "DD", "dd": "DD", "proteins": "PROTEINS", "nci1": "NCI1", "nci109": "NCI109",
               "frankenstein": "FRANKENSTEIN", "mutagenicity": "Mutagenicity"}

# Published statistics of the benchmark roster.
CITATION_STATS = {
    "cora": {"nodes": 2708, "edges": 5429, "features": 1433, "classes": 7, "label_rate": 0.052},
    "citeseer": {"nodes": 3327, "edges": 4732, "features": 3703, "classes": 6, "label_rate": 0.036},
    "pubmed": {"nodes": 19717, "edges": 44338, "features": 500, "classes": 3, "label_rate": 0.003},
}
GRAPH_STATS = {
    "DD": {"graphs": 1178, "avg_nodes": 284.32, "avg_edges": 715.66, "classes": 2},
    "PROTEINS": {"graphs": 1113, "avg_nodes": 39.06, "avg_edges": 72.82, "classes": 2},
    "NCI1": {"graphs": 4110, "avg_nodes": 29.87, "avg_edges": 32.30, "classes": 2},
    "NCI109": {"graphs": 4127, "avg_nodes": 29.68, "avg_edges": 32.13, "classes": 2},
    "FRANKENSTEIN": {"graphs": 4337, "avg_nodes": 16.90, "avg_edges": 17.88, "classes": 2},
    "Mutagenicity": {"graphs": 4337, "avg_nodes": 30.32, "avg_edges": 30.77, "classes": 2},
}

DATA_DIR = Path(__file__).parent / "data"


class DatasetStatsWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class CitationDataset:
    graph: Graph
    train_mask: np.ndarray
    val_mask: np.ndarray
    test_mask: np.ndarray
    num_classes: int
    name: str = ""

    def __post_init__(self):
        n = self.graph.num_nodes
        if self.graph.node_labels is None:
            raise DataError("citation graph needs node labels")
        for field_name in ("train_mask", "val_mask", "test_mask"):
            idx = np.asarray(getattr(self, field_name), dtype=np.int64).ravel()
            if idx.size and (idx.min() < 0 or idx.max() >= n):
                raise DataError(f"{field_name} index outside [0, {n})")
            object.__setattr__(self, field_name, idx)
        y = self.graph.node_labels
        if y.size and (y.min() < 0 or y.max() >= self.num_classes):
            raise DataError(f"node label outside [0, {self.num_classes})")

    def masks_disjoint(self) -> bool:
        a, b, c = (set(m.tolist()) for m in (self.train_mask, self.val_mask, self.test_mask))
        return not (a & b or a & c or b & c)

    @property
    def label_rate(self) -> float:
        return self.train_mask.size / self.graph.num_nodes


@dataclass(frozen=True, eq=False)
class GraphDataset:
    graphs: list
    num_classes: int
    name: str = ""

    def __post_init__(self):
        for k, g in enumerate(self.graphs):
            if g.num_nodes < 1:
                raise DataError(f"graph {k} has no nodes")
            if g.label is None or not 0 <= g.label < self.num_classes:
                raise DataError(f"graph {k} label {g.label} outside [0, {self.num_classes})")

    def __len__(self) -> int:
        return len(self.graphs)

    @property
    def num_features(self) -> int:
        return self.graphs[0].num_features

    def labels(self) -> np.ndarray:
        return np.array([g.label for g in self.graphs], dtype=np.int64)


@dataclass(frozen=True)
class Split:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    seed: Optional[int] = None


def random_split(n: int, seed: int) -> Split:
    """Seeded shuffle of range(n), cut at floor(0.8 n) and floor(0.9 n)."""
    if n < 10:
        raise ParameterError(f"random_split needs n >= 10, got {n}")
    perm = np.random.default_rng(seed).permutation(n)
    a, b = (8 * n) // 10, (9 * n) // 10
    return Split(perm[:a], perm[a:b], perm[b:], seed)


def row_normalize(x: np.ndarray) -> np.ndarray:
    s = x.sum(axis=1, keepdims=True)
    out = x.astype(np.float64, copy=True)
    nz = s[:, 0] != 0
    out[nz] /= s[nz]
    return out


def _warn(msg: str) -> None:
    warnings.warn(msg, DatasetStatsWarning, stacklevel=3)
    logger.warning(msg)


def check_citation_stats(ds: CitationDataset) -> list[str]:
    """Compare a loaded citation network with its published statistics; warn on mismatch."""
    ref = CITATION_STATS.get(ds.name)
    if ref is None:
        return []
    got = {
        "nodes": ds.graph.num_nodes,
        "edges": ds.graph.num_edges,
        "features": ds.graph.num_features,
        "classes": ds.num_classes,
    }
    problems = [f"{ds.name}: {k} = {got[k]}, published {ref[k]}" for k in got if got[k] != ref[k]]
    if abs(ds.label_rate - ref["label_rate"]) > 0.001:
        problems.append(f"{ds.name}: label rate {ds.label_rate:.4f}, published {ref['label_rate']}")
    for p in problems:
        _warn(p)
    return problems


def check_graph_stats(ds: GraphDataset, rel_tol: float = 0.01) -> list[str]:
    ref = GRAPH_STATS.get(ds.name)
    if ref is None:
        return []
    got = graph_dataset_stats(ds)
    problems = []
    for k in ("graphs", "classes"):
        if got[k] != ref[k]:
            problems.append(f"{ds.name}: {k} = {got[k]}, published {ref[k]}")
    for k in ("avg_nodes", "avg_edges"):
        if abs(got[k] - ref[k]) > rel_tol * ref[k]:
            problems.append(f"{ds.name}: {k} = {got[k]:.2f}, published {ref[k]}")
    for p in problems:
        _warn(p)
    return problems


def graph_dataset_stats(ds: GraphDataset) -> dict:
    return {
        "graphs": len(ds.graphs),
        "avg_nodes": float(np.mean([g.num_nodes for g in ds.graphs])),
        "avg_edges": float(np.mean([g.num_edges for g in ds.graphs])),
        "classes": ds.num_classes,
    }


# ---------------------------------------------------------------- Planetoid

_PLANETOID_PARTS = ("x", "y", "tx", "ty", "allx", "ally", "graph")


def _find_dir(root: Path, required: str, candidates: Sequence[Path]) -> Path:
    for d in candidates:
        if (d / required).exists():
            return d
    raise FileNotFoundError(f"{required} not found under {root} (looked in {', '.join(map(str, candidates))})")


def _unpickle(path: Path):
    # the published files were pickled under Python 2
    with open(path, "rb") as f:
        return pickle.load(f, encoding="latin1")


def load_planetoid(root: PathLike, name: str) -> CitationDataset:
    """Read the ``ind.<name>.*`` file set with the fixed public split.

    Train nodes are the first ``len(y)`` rows, validation the next 500, test
    the nodes listed in ``ind.<name>.test.index``.
    """
    name = name.lower()
    if name not in PLANETOID_NAMES:
        raise UsageError(f"unknown citation dataset {name!r}; choose from {', '.join(PLANETOID_NAMES)}")
    root = Path(root)
    base = _find_dir(
        root,
        f"ind.{name}.x",
        [root, root / name, root / name / "raw", root / name.capitalize() / "raw", root / name.capitalize()],
    )
    objs = {}
    for part in _PLANETOID_PARTS:
        path = base / f"ind.{name}.{part}"
        if not path.exists():
            raise FileNotFoundError(f"missing Planetoid file {path}")
        objs[part] = _unpickle(path)
    index_path = base / f"ind.{name}.test.index"
    if not index_path.exists():
        raise FileNotFoundError(f"missing Planetoid file {index_path}")
    test_reorder = np.array([int(line) for line in index_path.read_text().split()], dtype=np.int64)
    return _assemble_planetoid(name, objs, test_reorder)


def _dense(m) -> np.ndarray:
    return np.asarray(m.todense() if sp.issparse(m) else m, dtype=np.float64)


def _assemble_planetoid(name: str, objs: dict, test_reorder: np.ndarray) -> CitationDataset:
    y, ty, ally = (np.asarray(objs[k]) for k in ("y", "ty", "ally"))
    tx, allx = _dense(objs["tx"]), _dense(objs["allx"])
    test_range = np.sort(test_reorder)
    lo, hi = int(test_range.min()), int(test_range.max())
    # citeseer lists isolated test nodes that have no feature rows: pad them with zeros
    full = hi - lo + 1
    if full != tx.shape[0]:
        tx_ext = np.zeros((full, tx.shape[1]))
        tx_ext[test_range - lo] = tx
        ty_ext = np.zeros((full, ty.shape[1]))
        ty_ext[test_range - lo] = ty
        tx, ty = tx_ext, ty_ext
    features = np.vstack([allx, tx])
    onehot = np.vstack([ally, ty])
    features[test_reorder] = features[test_range]
    onehot[test_reorder] = onehot[test_range]
    n = features.shape[0]
    labels = onehot.argmax(axis=1)

    adj = objs["graph"]
    edges = [(int(u), int(v)) for u, nbrs in adj.items() for v in nbrs]
    e = np.array(edges, dtype=np.int64).reshape(-1, 2)
    if e.size and e.max() >= n:
        raise DataError(f"{name}: graph references node {int(e.max())} but only {n} feature rows exist")
    graph = Graph(n, e, row_normalize(features), labels)
    ds = CitationDataset(
        graph,
        train_mask=np.arange(y.shape[0]),
        val_mask=np.arange(y.shape[0], y.shape[0] + 500),
        test_mask=test_range,
        num_classes=int(onehot.shape[1]),
        name=name,
    )
    if not ds.masks_disjoint():
        raise DataError(f"{name}: public split masks overlap")
    check_citation_stats(ds)
    return ds


def write_planetoid(root: PathLike, name: str, features: np.ndarray, labels: np.ndarray, edges,
                    num_train: int, test_index: Sequence[int], num_classes: Optional[int] = None) -> Path:
    """Write a citation network in the Planetoid binary layout.

    Intended for fixtures: nodes ``[0, num_train)`` form ``x``/``y``, nodes
    outside ``test_index`` form ``allx``/``ally`` and ``test_index`` rows form
    ``tx``/``ty`` in the listed order.
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    k = int(num_classes if num_classes is not None else labels.max() + 1)
    onehot = np.eye(k)[labels]
    test_index = np.asarray(test_index, dtype=np.int64)
    rest = np.setdiff1d(np.arange(features.shape[0]), test_index)
    if not np.array_equal(rest, np.arange(rest.size)):
        raise DataError("Planetoid layout needs test nodes after all other nodes")
    graph: dict[int, list[int]] = {i: [] for i in range(features.shape[0])}
    for u, v in np.asarray(edges, dtype=np.int64).reshape(-1, 2):
        graph[int(u)].append(int(v))
        graph[int(v)].append(int(u))
    objs = {
        "x": sp.csr_matrix(features[:num_train]),
        "y": onehot[:num_train],
        "allx": sp.csr_matrix(features[rest]),
        "ally": onehot[rest],
        "tx": sp.csr_matrix(features[test_index]),
        "ty": onehot[test_index],
        "graph": graph,
    }
    for part, obj in objs.items():
        with open(root / f"ind.{name}.{part}", "wb") as f:
            pickle.dump(obj, f, protocol=2)
    (root / f"ind.{name}.test.index").write_text("".join(f"{i}\n" for i in test_index))
    return root


# ------------------------------------------------------ plain-text citation

def load_citation_text(directory: PathLike, name: str = "") -> CitationDataset:
    """Read ``edges.csv`` (src,dst), ``features.csv`` (node,label,x...) and ``masks.csv`` (node,split).

    A node may appear under several splits; disjointness is only enforced
    for the public Planetoid splits.
    """
    d = Path(directory)
    for fname in ("edges.csv", "features.csv", "masks.csv"):
        if not (d / fname).exists():
            raise FileNotFoundError(f"missing file {d / fname}")
    rows = _read_csv(d / "features.csv")
    nodes = np.array([int(r[0]) for r in rows])
    if not np.array_equal(nodes, np.arange(len(rows))):
        raise DataError(f"{d / 'features.csv'}: node ids must be 0..N-1 in order")
    labels = np.array([int(r[1]) for r in rows], dtype=np.int64)
    x = np.array([[float(v) for v in r[2:]] for r in rows], dtype=np.float64).reshape(len(rows), -1)
    edges = np.array([[int(a), int(b)] for a, b in _read_csv(d / "edges.csv")], dtype=np.int64).reshape(-1, 2)
    masks: dict[str, list[int]] = {"train": [], "val": [], "test": []}
    for node, split in _read_csv(d / "masks.csv"):
        if split not in masks:
            raise DataError(f"{d / 'masks.csv'}: unknown split {split!r}")
        masks[split].append(int(node))
    graph = Graph(len(rows), edges, row_normalize(x), labels)
    return CitationDataset(graph, np.array(masks["train"]), np.array(masks["val"]), np.array(masks["test"]),
                           int(labels.max()) + 1, name or d.name)


def write_citation_text(ds: CitationDataset, directory: PathLike) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    g = ds.graph
    with open(d / "edges.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["src", "dst"])
        w.writerows(g.edges.tolist())
    with open(d / "features.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["node", "label"] + [f"x{j}" for j in range(g.num_features)])
        for i in range(g.num_nodes):
            w.writerow([i, int(g.node_labels[i])] + [repr(float(v)) for v in g.features[i]])
    with open(d / "masks.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["node", "split"])
        for split, m in (("train", ds.train_mask), ("val", ds.val_mask), ("test", ds.test_mask)):
            w.writerows([[int(i), split] for i in m])
    return d


def _read_csv(path: Path) -> list[list[str]]:
    with open(path, newline="") as f:
        rows = [r for r in csv.reader(f) if r]
    return rows[1:]


# ---------------------------------------------------------------------- TU

def _tu_dir(root: Path, name: str) -> Path:
    return _find_dir(root, f"{name}_A.txt", [root / name, root / name / "raw", root])


def _read_int_lines(path: Path) -> np.ndarray:
    vals = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            s = line.strip()
            if not s:
                continue
            try:
                vals.append(int(s))
            except ValueError:
                raise DataError(f"{path.name}: line {lineno}: expected an integer, got {s!r}") from None
    return np.array(vals, dtype=np.int64)


def load_tu(root: PathLike, name: str) -> GraphDataset:
    """Read the TU flat-file format.

    Node features are the continuous attributes and/or one-hot node labels
    when present, otherwise a one-hot encoding of the node degree capped at
    the dataset's maximum degree. Graph labels are remapped to ``[0, K)``.
    """
    name = _TU_ALIASES.get(name.lower(), name)
    root = Path(root)
    base = _tu_dir(root, name)
    pre = base / name
    for suffix in ("_A.txt", "_graph_indicator.txt", "_graph_labels.txt"):
        if not Path(f"{pre}{suffix}").exists():
            raise FileNotFoundError(f"missing TU file {pre}{suffix}")

    indicator_path = Path(f"{pre}_graph_indicator.txt")
    indicator = []
    prev = 0
    with open(indicator_path) as f:
        for lineno, line in enumerate(f, start=1):
            s = line.strip()
            if not s:
                continue
            try:
                gid = int(s)
            except ValueError:
                raise DataError(f"{indicator_path.name}: line {lineno}: expected a graph id, got {s!r}") from None
            if gid < 1 or gid < prev or gid > prev + 1:
                raise DataError(
                    f"{indicator_path.name}: line {lineno}: graph id {gid} breaks the contiguous "
                    f"non-decreasing order (previous {prev})"
                )
            indicator.append(gid)
            prev = gid
    node_graph = np.array(indicator, dtype=np.int64) - 1
    num_nodes = node_graph.size
    num_graphs = int(node_graph[-1]) + 1 if num_nodes else 0

    graph_labels_raw = _read_int_lines(Path(f"{pre}_graph_labels.txt"))
    if graph_labels_raw.size != num_graphs:
        raise DataError(f"{name}_graph_labels.txt has {graph_labels_raw.size} lines for {num_graphs} graphs")
    classes, graph_labels = np.unique(graph_labels_raw, return_inverse=True)

    a_path = Path(f"{pre}_A.txt")
    pairs = []
    with open(a_path) as f:
        for lineno, line in enumerate(f, start=1):
            s = line.strip()
            if not s:
                continue
            parts = s.replace(",", " ").split()
            if len(parts) != 2:
                raise DataError(f"{a_path.name}: line {lineno}: expected 'i, j', got {s!r}")
            pairs.append((int(parts[0]), int(parts[1])))
    a = np.array(pairs, dtype=np.int64).reshape(-1, 2) - 1
    if a.size and (a.min() < 0 or a.max() >= num_nodes):
        raise DataError(f"{a_path.name}: node id outside 1..{num_nodes}")
    if a.size and np.any(node_graph[a[:, 0]] != node_graph[a[:, 1]]):
        bad = int(np.flatnonzero(node_graph[a[:, 0]] != node_graph[a[:, 1]])[0]) + 1
        raise DataError(f"{a_path.name}: line {bad}: edge joins two different graphs")

    blocks = []
    attr_path = Path(f"{pre}_node_attributes.txt")
    if attr_path.exists():
        attrs = np.loadtxt(attr_path, delimiter=",", dtype=np.float64, ndmin=2)
        if attrs.shape[0] != num_nodes:
            raise DataError(f"{attr_path.name} has {attrs.shape[0]} rows for {num_nodes} nodes")
        blocks.append(attrs)
    nl_path = Path(f"{pre}_node_labels.txt")
    if nl_path.exists():
        nl = _read_int_lines(nl_path)
        if nl.size != num_nodes:
            raise DataError(f"{nl_path.name} has {nl.size} lines for {num_nodes} nodes")
        _, nl_idx = np.unique(nl, return_inverse=True)
        blocks.append(np.eye(int(nl_idx.max()) + 1)[nl_idx])

    offsets = np.concatenate([[0], np.cumsum(np.bincount(node_graph, minlength=num_graphs))])
    edge_graph = node_graph[a[:, 0]] if a.size else np.zeros(0, dtype=np.int64)
    edge_order = np.argsort(edge_graph, kind="stable")
    a, edge_graph = a[edge_order], edge_graph[edge_order]
    edge_offsets = np.searchsorted(edge_graph, np.arange(num_graphs + 1))

    if not blocks:
        # degree one-hot, counted on the simple undirected graph
        und = to_undirected(a)
        deg = np.bincount(und.ravel(), minlength=num_nodes)
        blocks.append(np.eye(int(deg.max()) + 1)[deg])
    x = np.hstack(blocks)

    graphs = []
    for gi in range(num_graphs):
        lo, hi = offsets[gi], offsets[gi + 1]
        e = a[edge_offsets[gi] : edge_offsets[gi + 1]] - lo
        graphs.append(Graph(int(hi - lo), e, x[lo:hi], label=int(graph_labels[gi])))
    ds = GraphDataset(graphs, int(classes.size), name)
    check_graph_stats(ds)
    return ds


def write_tu(ds: GraphDataset, root: PathLike, name: Optional[str] = None, node_labels: Optional[Sequence] = None) -> Path:
    """Write ``ds`` in TU flat-file form; features go to ``_node_attributes.txt``
    unless ``node_labels`` (one integer array per graph) are supplied."""
    name = name or ds.name
    d = Path(root) / name
    d.mkdir(parents=True, exist_ok=True)
    offset = 0
    a_lines, ind_lines, lab_lines, attr_lines, nl_lines = [], [], [], [], []
    for gi, g in enumerate(ds.graphs):
        for u, v in g.edges:
            a_lines.append(f"{u + 1 + offset}, {v + 1 + offset}\n")
            a_lines.append(f"{v + 1 + offset}, {u + 1 + offset}\n")
        ind_lines.extend(f"{gi + 1}\n" for _ in range(g.num_nodes))
        lab_lines.append(f"{g.label}\n")
        if node_labels is None:
            attr_lines.extend(", ".join(repr(float(v)) for v in row) + "\n" for row in g.features)
        else:
            nl_lines.extend(f"{int(v)}\n" for v in node_labels[gi])
        offset += g.num_nodes
    (d / f"{name}_A.txt").write_text("".join(a_lines))
    (d / f"{name}_graph_indicator.txt").write_text("".join(ind_lines))
    (d / f"{name}_graph_labels.txt").write_text("".join(lab_lines))
    if node_labels is None:
        (d / f"{name}_node_attributes.txt").write_text("".join(attr_lines))
    else:
        (d / f"{name}_node_labels.txt").write_text("".join(nl_lines))
    return d


# ------------------------------------------------------------ entry points

def toy_citation() -> CitationDataset:
    """The shipped 3-node path graph; every node is in every split."""
    return load_citation_text(DATA_DIR / "toy_citation", name="toy")


def toy_graphs() -> GraphDataset:
    """The shipped 10-graph, 2-class TU-format fixture."""
    return load_tu(DATA_DIR, "TOY")


def dataset_root(explicit: Optional[PathLike] = None) -> Path:
    if explicit:
        return Path(explicit)
    env = os.environ.get("DATASET_ROOT")
    return Path(env) if env else Path("datasets")


def load_dataset(task: str, name: str, root: Optional[PathLike] = None):
    """Resolve a dataset name for ``task`` ('node' or 'graph')."""
    key = name.lower()
    if task == "node":
        if key == "toy":
            return toy_citation()
        if key in PLANETOID_NAMES:
            return load_planetoid(dataset_root(root), key)
        raise UsageError(f"unknown node dataset {name!r}; valid: toy, {', '.join(PLANETOID_NAMES)}")
    if task == "graph":
        if key == "toy":
            return toy_graphs()
        if key in _TU_ALIASES:
            return load_tu(dataset_root(root), _TU_ALIASES[key])
        raise UsageError(f"unknown graph dataset {name!r}; valid: toy, {', '.join(TU_NAMES)}")
    raise UsageError(f"unknown task {task!r}; valid: node, graph")

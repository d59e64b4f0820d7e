"""Command-line experiment runner.

Experiments are described by flat ``key = value`` files, one key per line,
``#`` starting a comment::

    task = graph
    dataset = PROTEINS
    kind = gcn, mgcn_h, mgcn_g
    runs = 10
    depths = 2, 10, 30          # sweep only

Three subcommands share that format: ``run`` (one cell per method x
dataset), ``sweep`` (one cell per method x depth) and ``timing`` (wall
seconds per method x dataset). Each writes ``results.csv`` and ``table.txt``
into ``--out``.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from functools import lru_cache
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .datasets import PLANETOID_NAMES, TU_NAMES, _TU_ALIASES, load_dataset, random_split
from .errors import DivergenceError, MGCNError, UsageError
from .models import KINDS, ArchitectureConfig
from .training import GraphTrainConfig, NodeTrainConfig, train

logger = logging.getLogger("mgcn")

_ARCH_KEYS = {f.name for f in fields(ArchitectureConfig)} - {"kind"}
_TRAIN_KEYS = {"learning_rate", "weight_decay", "max_epochs", "patience", "batch_size"}
_OTHER_KEYS = {"task", "dataset", "kind", "runs", "seed", "depths", "output", "jobs"}
_LIST_KEYS = {"dataset", "kind", "depths"}
_INT_KEYS = {"num_layers", "krylov_order", "snowball_p", "classifier_dim", "max_epochs", "patience",
             "batch_size", "runs", "seed", "jobs"}
_FLOAT_KEYS = {"dropout", "learning_rate", "weight_decay"}
_BOOL_KEYS = {"attend_input"}
SWEEP_HIDDEN = 64


@dataclass
class ExperimentSpec:
    task: str
    datasets: list[str]
    kinds: list[str]
    arch: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    runs: int = 1
    seed: int = 0
    depths: list[int] = field(default_factory=list)
    output: Optional[str] = None
    jobs: int = 1

    def arch_config(self, kind: str) -> ArchitectureConfig:
        defaults: dict = {}
        if self.task == "graph":
            defaults = {"hidden": 128, "dropout": 0.5, "activation": "relu"}
            # the proposed models read out mean and max; baselines read out the mean
            defaults["readout"] = "mean_max" if kind.startswith("mgcn") else "mean"
        elif kind == "gcn":
            defaults = {"activation": "relu"}
        return ArchitectureConfig(kind=kind, **{**defaults, **self.arch})

    def train_config(self, seed: int):
        cls = NodeTrainConfig if self.task == "node" else GraphTrainConfig
        allowed = {f.name for f in fields(cls)}
        extra = set(self.train) - allowed
        if extra:
            raise UsageError(f"keys {sorted(extra)} do not apply to {self.task} tasks")
        return cls(**self.train, seed=seed)


def _convert(key: str, raw: str, lineno: int):
    try:
        if key in _LIST_KEYS:
            items = [s.strip() for s in raw.split(",") if s.strip()]
            return [int(s) for s in items] if key == "depths" else items
        if key == "hidden":
            parts = [int(s) for s in raw.split(",") if s.strip()]
            return parts[0] if len(parts) == 1 else tuple(parts)
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _BOOL_KEYS:
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        return raw
    except ValueError:
        raise UsageError(f"line {lineno}: bad value {raw!r} for {key}") from None


def parse_spec(text: str) -> ExperimentSpec:
    """Parse and validate a spec file body; raises :class:`UsageError`."""
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":" if ":" in line else None
        if sep is None:
            raise UsageError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split(sep, 1))
        key = {"datasets": "dataset", "kinds": "kind", "architecture": "kind"}.get(key, key)
        if key not in _ARCH_KEYS | _TRAIN_KEYS | _OTHER_KEYS:
            raise UsageError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise UsageError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _convert(key, raw, lineno)

    for required in ("task", "dataset", "kind"):
        if required not in values:
            raise UsageError(f"spec is missing required key {required!r}")
    task = values.pop("task")
    if task not in ("node", "graph"):
        raise UsageError(f"unknown task {task!r}; valid: node, graph")
    valid_ds = ["toy", *PLANETOID_NAMES] if task == "node" else ["toy", *TU_NAMES]
    for ds in values["dataset"]:
        if ds.lower() != "toy" and ds.lower() not in (PLANETOID_NAMES if task == "node" else _TU_ALIASES):
            raise UsageError(f"unknown {task} dataset {ds!r}; valid: {', '.join(valid_ds)}")
    for kind in values["kind"]:
        if kind not in KINDS:
            raise UsageError(f"unknown architecture {kind!r}; valid: {', '.join(KINDS)}")
    spec = ExperimentSpec(
        task=task,
        datasets=values.pop("dataset"),
        kinds=values.pop("kind"),
        runs=values.pop("runs", 1),
        seed=values.pop("seed", 0),
        depths=values.pop("depths", []),
        output=values.pop("output", None),
        jobs=values.pop("jobs", 1),
    )
    if not spec.datasets or not spec.kinds:
        raise UsageError("dataset and kind lists must be non-empty")
    if spec.runs < 1:
        raise UsageError(f"runs must be >= 1, got {spec.runs}")
    if any(d < 1 for d in spec.depths):
        raise UsageError("depths must be positive")
    spec.arch = {k: v for k, v in values.items() if k in _ARCH_KEYS}
    spec.train = {k: v for k, v in values.items() if k in _TRAIN_KEYS}
    try:
        for kind in spec.kinds:
            spec.arch_config(kind)
        spec.train_config(spec.seed)
    except (MGCNError, TypeError) as exc:
        raise UsageError(str(exc)) from None
    return spec


# --------------------------------------------------------- results table

@dataclass
class ResultsTable:
    """Rectangular table of mean cells with optional spread, seconds and epochs."""

    title: str
    row_labels: list[str]
    col_labels: list[str]
    mean: list[list[float]]
    std: Optional[list[list[float]]] = None
    seconds: Optional[list[list[float]]] = None
    epochs: Optional[list[list[float]]] = None

    _EXTRA = ("std", "seconds", "epochs")

    def to_csv(self) -> str:
        extras = [name for name in self._EXTRA if getattr(self, name) is not None]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["row", "column", "mean", *extras])
        for i, r in enumerate(self.row_labels):
            for j, c in enumerate(self.col_labels):
                w.writerow([r, c, repr(float(self.mean[i][j]))] + [repr(float(getattr(self, e)[i][j])) for e in extras])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, title: str = "") -> "ResultsTable":
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        extras = header[3:]
        row_labels = list(dict.fromkeys(r[0] for r in body))
        col_labels = list(dict.fromkeys(r[1] for r in body))
        grids = {name: [[math.nan] * len(col_labels) for _ in row_labels] for name in ["mean", *extras]}
        for r in body:
            i, j = row_labels.index(r[0]), col_labels.index(r[1])
            for name, val in zip(["mean", *extras], r[2:]):
                grids[name][i][j] = float(val)
        return cls(title, row_labels, col_labels, grids["mean"], *(grids.get(e) for e in cls._EXTRA))

    def render(self) -> str:
        def cell(i, j):
            m = self.mean[i][j]
            if math.isnan(m):
                return "failed"
            if self.seconds is not None and self.std is None:
                s = f"{m:.2f}s"
            else:
                s = f"{100 * m:.2f}"
                if self.std is not None:
                    s += f" ± {100 * self.std[i][j]:.2f}"
            if self.epochs is not None:
                s += f" ({self.epochs[i][j]:.0f} ep)"
            return s

        grid = [["method", *self.col_labels]]
        grid += [[r, *(cell(i, j) for j in range(len(self.col_labels)))] for i, r in enumerate(self.row_labels)]
        widths = [max(len(row[k]) for row in grid) for k in range(len(grid[0]))]
        lines = [self.title] if self.title else []
        for n, row in enumerate(grid):
            lines.append("  ".join(c.ljust(widths[k]) if k == 0 else c.rjust(widths[k]) for k, c in enumerate(row)))
            if n == 0:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"


# ------------------------------------------------------------- execution

@lru_cache(maxsize=8)
def _dataset(task: str, name: str, root: Optional[str]):
    return load_dataset(task, name, root)


def _one_run(job: tuple) -> tuple:
    """Worker: (cell key, run index, spec, kind, dataset, depth, seed, root) -> (key, run, result or error)."""
    key, run_idx, spec, kind, ds_name, depth, seed, root = job
    try:
        cfg = spec.arch_config(kind)
        if depth is not None:
            cfg = cfg.with_depth(depth)
        data = _dataset(spec.task, ds_name, root)
        tcfg = spec.train_config(seed)
        split = random_split(len(data), seed) if spec.task == "graph" else None
        r = train(spec.task, cfg, data, tcfg, split)
        return key, run_idx, (r.test_accuracy, r.wall_time_seconds, r.epochs_run), None
    except DivergenceError as exc:
        return key, run_idx, None, str(exc)


def _execute(jobs: list[tuple], n_workers: int) -> list[tuple]:
    if n_workers <= 1 or len(jobs) <= 1:
        return [_one_run(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(_one_run, jobs))


def _collect(results, rows, cols, runs):
    acc = {(r, c): [] for r in rows for c in cols}
    secs = {(r, c): [] for r in rows for c in cols}
    eps = {(r, c): [] for r in rows for c in cols}
    failed = []
    for key, run_idx, value, err in sorted(results, key=lambda t: (rows.index(t[0][0]), cols.index(t[0][1]), t[1])):
        if err is not None:
            failed.append(f"{key[0]} / {key[1]} run {run_idx}: {err}")
            continue
        acc[key].append(value[0])
        secs[key].append(value[1])
        eps[key].append(value[2])

    def grid(d, fn):
        return [[fn(d[(r, c)]) if len(d[(r, c)]) == runs else math.nan for c in cols] for r in rows]

    return acc, secs, eps, failed, grid


def run_experiment(spec: ExperimentSpec, root: Optional[str] = None, jobs: int = 1) -> tuple[ResultsTable, list[str]]:
    """Mean/std test accuracy per (method, dataset) over ``spec.runs`` seeds."""
    rows, cols = spec.kinds, spec.datasets
    work = [((k, d), i, spec, k, d, None, spec.seed + i, root) for k in rows for d in cols for i in range(spec.runs)]
    acc, _, eps, failed, grid = _collect(_execute(work, jobs), rows, cols, spec.runs)
    table = ResultsTable(
        f"{spec.task} classification, test accuracy (%) over {spec.runs} run(s)",
        list(rows), list(cols), grid(acc, np.mean), grid(acc, np.std),
    )
    return table, failed


def sweep_experiment(spec: ExperimentSpec, root: Optional[str] = None, jobs: int = 1) -> tuple[ResultsTable, list[str]]:
    """Mean test accuracy per (method, depth) on the first dataset."""
    if not spec.depths:
        raise UsageError("sweep needs a non-empty 'depths' list")
    if "hidden" not in spec.arch:
        # deep stacks stay affordable with a fixed moderate width
        spec = replace(spec, arch={**spec.arch, "hidden": SWEEP_HIDDEN})
    ds = spec.datasets[0]
    rows, cols = spec.kinds, [str(d) for d in spec.depths]
    work = [((k, str(d)), i, spec, k, ds, d, spec.seed + i, root)
            for k in rows for d in spec.depths for i in range(spec.runs)]
    acc, _, _, failed, grid = _collect(_execute(work, jobs), rows, cols, spec.runs)
    table = ResultsTable(f"{ds}: test accuracy (%) by number of layers", list(rows), cols,
                         grid(acc, np.mean), grid(acc, np.std))
    return table, failed


def timing_experiment(spec: ExperimentSpec, root: Optional[str] = None, jobs: int = 1) -> tuple[ResultsTable, list[str]]:
    """Training wall time (forward + backward + step) per (method, dataset), one run each."""
    rows, cols = spec.kinds, spec.datasets
    work = [((k, d), 0, spec, k, d, None, spec.seed, root) for k in rows for d in cols]
    # timings are taken serially so methods do not compete for cores
    _, secs, eps, failed, grid = _collect(_execute(work, 1), rows, cols, 1)
    s = grid(secs, np.mean)
    table = ResultsTable("training time (s)", list(rows), list(cols), s, seconds=s, epochs=grid(eps, np.mean))
    return table, failed


COMMANDS = {"run": run_experiment, "sweep": sweep_experiment, "timing": timing_experiment}


def write_outputs(table: ResultsTable, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "results.csv").write_text(table.to_csv())
    (out_dir / "table.txt").write_text(table.render())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mgcn", description="Train and compare multi-scale GCN architectures.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_text in (("run", "train methods on datasets and report accuracy"),
                            ("sweep", "accuracy as a function of depth"),
                            ("timing", "training wall time per method and dataset")):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--spec", required=True, type=Path, help="experiment spec file")
        sp.add_argument("--dataset-root", default=None, help="dataset directory (overrides DATASET_ROOT)")
        sp.add_argument("--seed", type=int, default=None, help="base seed (overrides the spec file)")
        sp.add_argument("--jobs", type=int, default=None, help="parallel worker processes")
        sp.add_argument("--out", type=Path, default=None, help="output directory")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        try:
            text = args.spec.read_text()
        except OSError as exc:
            raise UsageError(f"cannot read spec file: {exc}") from None
        spec = parse_spec(text)
        if args.seed is not None:
            spec = replace(spec, seed=args.seed)
        jobs = args.jobs if args.jobs is not None else spec.jobs
        out_dir = args.out or Path(spec.output or "results")
        table, failed = COMMANDS[args.command](spec, args.dataset_root, jobs)
    except UsageError as exc:
        print(f"mgcn: usage error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, MGCNError) as exc:
        print(f"mgcn: error: {exc}", file=sys.stderr)
        return 1
    write_outputs(table, out_dir)
    sys.stdout.write(table.render())
    if failed:
        print(f"mgcn: {len(failed)} run(s) failed:", file=sys.stderr)
        for f in failed:
            print(f"  {f}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

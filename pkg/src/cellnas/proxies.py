"""Analytic complexity counters and rank-correlation statistics.

FLOPs convention: one multiply-accumulate counts as one FLOP.  Convolutions
and the classifier are counted; batch norm, activations, and the global
average pool are not.  Pooling operators inside cells are counted as k^2
additions per output element.  The documented convention matches the
magnitudes reported for the reference cell space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cellgraph import EdgeOpCell
from .errors import NumericError, ValidationError


@dataclass(frozen=True)
class MacroConfig:
    """Fixed outer network into which searched cells are stacked.

    Stage s runs cells_per_stage[s] cells at width stage_widths[s]; a
    stride-2 residual reduction block sits between consecutive stages and
    halves the spatial resolution.
    """

    input_hw: tuple[int, int] = (32, 32)
    input_channels: int = 3
    stem_channels: int = 16
    stage_widths: tuple[int, ...] = (16, 32, 64)
    cells_per_stage: tuple[int, ...] = (5, 5, 5)
    num_classes: int = 10

    def __post_init__(self):
        if len(self.stage_widths) != len(self.cells_per_stage) or not self.stage_widths:
            raise ValidationError("stage_widths and cells_per_stage must match and be nonempty")
        values = (
            *self.input_hw, self.input_channels, self.stem_channels,
            *self.stage_widths, *self.cells_per_stage, self.num_classes,
        )
        if any(v < 1 for v in values):
            raise ValidationError("macro config dimensions must be positive")
        if self.stage_widths[0] != self.stem_channels:
            raise ValidationError("stage_widths[0] must equal stem_channels")
        object.__setattr__(self, "input_hw", tuple(self.input_hw))
        object.__setattr__(self, "stage_widths", tuple(self.stage_widths))
        object.__setattr__(self, "cells_per_stage", tuple(self.cells_per_stage))


def nb201_macro() -> MacroConfig:
    """The standard 3-stage, 5-cell, 16/32/64-width benchmark macro network."""
    return MacroConfig()


def _zero_counts(c_in, c_out, h, w):
    return {"params": 0, "conv_macs": 0, "pool_adds": 0}


def _conv_counts(k):
    def fn(c_in, c_out, h, w):
        return {
            "params": k * k * c_in * c_out + 2 * c_out,
            "conv_macs": k * k * c_in * c_out * h * w,
            "pool_adds": 0,
        }
    return fn


def _pool_counts(k):
    def fn(c_in, c_out, h, w):
        return {"params": 0, "conv_macs": 0, "pool_adds": k * k * c_out * h * w}
    return fn


# Per-operator layer formulas at (c_in, c_out, h_out, w_out).  Convolutions
# carry batch-norm affine terms (2 * c_out params); identity-like operators
# are free.  Extend via register_op for custom operator sets.
_OP_FORMULAS = {
    "none": _zero_counts,
    "skip_connect": _zero_counts,
    "nor_conv_1x1": _conv_counts(1),
    "nor_conv_3x3": _conv_counts(3),
    "avg_pool_3x3": _pool_counts(3),
}


def register_op(name: str, formula) -> None:
    """Register counts for a custom operator.

    formula(c_in, c_out, h_out, w_out) must return a dict with keys
    params, conv_macs, pool_adds.
    """
    _OP_FORMULAS[name] = formula


def _op_counts(op: str, c_in: int, c_out: int, h: int, w: int) -> dict:
    if op not in _OP_FORMULAS:
        raise ValidationError(
            f"no layer formula registered for operator {op!r}; use register_op"
        )
    return _OP_FORMULAS[op](c_in, c_out, h, w)


def count_breakdown(cell: EdgeOpCell, macro: MacroConfig) -> dict:
    """Full-network parameter and FLOP accounting, itemized by kind.

    Returns {"params", "conv_macs", "pool_adds", "linear_macs", "flops"}.
    flops = conv_macs + pool_adds + linear_macs under the 1 MAC = 1 FLOP
    convention in the module docstring.
    """
    h, w = macro.input_hw
    params = conv = pool = 0

    # stem: 3x3 convolution into the first width, plus batch norm
    stem = _conv_counts(3)(macro.input_channels, macro.stem_channels, h, w)
    params += stem["params"]
    conv += stem["conv_macs"]

    prev_width = macro.stem_channels
    for s, (width, n_cells) in enumerate(zip(macro.stage_widths, macro.cells_per_stage)):
        if s > 0:
            # stride-2 residual reduction block: two 3x3 convolutions with
            # batch norm on the main path, average-pool + 1x1 convolution
            # (no norm, not counted as FLOPs for the pool) on the shortcut
            h, w = h // 2, w // 2
            main1 = _conv_counts(3)(prev_width, width, h, w)
            main2 = _conv_counts(3)(width, width, h, w)
            params += main1["params"] + main2["params"] + prev_width * width
            conv += main1["conv_macs"] + main2["conv_macs"] + prev_width * width * h * w
        for op in cell.edge_ops.values():
            counts = _op_counts(op, width, width, h, w)
            params += counts["params"] * n_cells
            conv += counts["conv_macs"] * n_cells
            pool += counts["pool_adds"] * n_cells
        prev_width = width

    # head: final batch norm, global average pool (not counted), classifier
    params += 2 * prev_width
    params += prev_width * macro.num_classes + macro.num_classes
    linear = prev_width * macro.num_classes

    return {
        "params": params,
        "conv_macs": conv,
        "pool_adds": pool,
        "linear_macs": linear,
        "flops": conv + pool + linear,
    }


def count_params(cell: EdgeOpCell, macro: MacroConfig) -> int:
    return count_breakdown(cell, macro)["params"]


def count_flops(cell: EdgeOpCell, macro: MacroConfig) -> int:
    return count_breakdown(cell, macro)["flops"]


def _as_pair(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError(f"vector shapes differ: {x.shape} vs {y.shape}")
    if x.size < 2:
        raise ValidationError("need at least 2 observations")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValidationError("correlation inputs must be finite")
    return x, y


def kendall_tau(x, y) -> float:
    """Tie-corrected tau-b: (C - D) / sqrt((C + D + Tx)(C + D + Ty)).

    O(n^2) pair counting; fine for the few-thousand-sample analyses this
    toolkit performs.
    """
    x, y = _as_pair(x, y)
    iu = np.triu_indices(x.size, k=1)
    sx = np.sign(x[:, None] - x[None, :])[iu]
    sy = np.sign(y[:, None] - y[None, :])[iu]
    prod = sx * sy
    c = int(np.count_nonzero(prod > 0))
    d = int(np.count_nonzero(prod < 0))
    tx = int(np.count_nonzero((sx == 0) & (sy != 0)))
    ty = int(np.count_nonzero((sy == 0) & (sx != 0)))
    denom = np.sqrt(float(c + d + tx) * float(c + d + ty))
    if denom == 0.0:
        raise NumericError("kendall tau undefined: one vector is all ties")
    # the sqrt can round below |c - d|; keep the result inside [-1, 1]
    return float(np.clip((c - d) / denom, -1.0, 1.0))


def midranks(x) -> np.ndarray:
    """Ranks 1..n with ties assigned the average of their positions."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="mergesort")
    sx = x[order]
    new_group = np.r_[True, sx[1:] != sx[:-1]]
    group = np.cumsum(new_group) - 1
    counts = np.bincount(group)
    ends = np.cumsum(counts)
    starts = ends - counts + 1
    avg = (starts + ends) / 2.0
    ranks = np.empty(x.size, dtype=np.float64)
    ranks[order] = avg[group]
    return ranks


def spearman_rho(x, y) -> float:
    """Pearson correlation of midranks; 1 - 6*sum(d^2)/(n(n^2-1)) when tie-free."""
    x, y = _as_pair(x, y)
    rx = midranks(x)
    ry = midranks(y)
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    nx = np.linalg.norm(rx)
    ny = np.linalg.norm(ry)
    if nx == 0.0 or ny == 0.0:
        raise NumericError("spearman rho undefined: one vector has zero rank variance")
    return float(np.clip(rx @ ry / (nx * ny), -1.0, 1.0))


@dataclass(frozen=True)
class ProxyScoreFrame:
    """Aligned per-architecture score columns for correlation analysis."""

    ids: tuple[str, ...]
    columns: dict[str, np.ndarray]
    ground_truth: str | None = None

    def __post_init__(self):
        if not self.ids:
            raise ValidationError("frame has no architectures")
        if len(set(self.ids)) != len(self.ids):
            raise ValidationError("architecture ids must be unique")
        if not self.columns:
            raise ValidationError("frame has no score columns")
        frozen = {}
        for name, col in self.columns.items():
            arr = np.asarray(col, dtype=np.float64)
            if arr.shape != (len(self.ids),):
                raise ValidationError(
                    f"column {name!r} has {arr.shape} values for {len(self.ids)} ids"
                )
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"column {name!r} contains non-finite values")
            arr.flags.writeable = False
            frozen[name] = arr
        if self.ground_truth is not None and self.ground_truth not in frozen:
            raise ValidationError(f"ground-truth column {self.ground_truth!r} not present")
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "columns", frozen)

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(self.columns)


def correlation_matrix(frame: ProxyScoreFrame):
    """Pairwise Spearman correlations; degenerate pairs are marked NaN.

    Returns (matrix, labels).  Column pairs are independent, so evaluation
    order cannot change the result; the diagonal is 1 by definition.
    """
    labels = list(frame.column_names)
    if len(labels) < 2:
        raise ValidationError("correlation matrix needs at least 2 columns")
    n = len(labels)
    mat = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            try:
                rho = spearman_rho(frame.columns[labels[i]], frame.columns[labels[j]])
            except NumericError:
                rho = np.nan
            mat[i, j] = mat[j, i] = rho
    return mat, labels


def summary_vs_ground_truth(frame: ProxyScoreFrame) -> list[dict]:
    """Per-proxy tau and rho against the frame's ground-truth column."""
    if frame.ground_truth is None:
        raise ValidationError("frame has no ground-truth column")
    truth = frame.columns[frame.ground_truth]
    rows = []
    for name in frame.column_names:
        if name == frame.ground_truth:
            continue
        col = frame.columns[name]
        try:
            tau = kendall_tau(col, truth)
        except NumericError:
            tau = None
        try:
            rho = spearman_rho(col, truth)
        except NumericError:
            rho = None
        rows.append({"proxy": name, "kendall_tau": tau, "spearman_rho": rho})
    return rows


def write_matrix_csv(matrix: np.ndarray, labels: list[str], path) -> None:
    """CSV with a label header row/column; NaN cells are left empty."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("," + ",".join(labels) + "\n")
        for label, row in zip(labels, matrix):
            cells = ["" if np.isnan(v) else repr(float(v)) for v in row]
            fh.write(label + "," + ",".join(cells) + "\n")


def read_scores_csv(path):
    """Read "arch_id,<proxy>,..." score files; returns (ids, columns).

    External zero-cost proxy scores enter the toolkit only through this
    format.
    """
    import csv

    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ValidationError(f"cannot read scores file {path}: {exc}") from exc
    if not rows or len(rows[0]) < 2 or rows[0][0] != "arch_id":
        raise ValidationError(f"{path}: header must be 'arch_id,<proxy>,...'")
    names = rows[0][1:]
    if len(set(names)) != len(names):
        raise ValidationError(f"{path}: duplicate column names in header")
    ids: list[str] = []
    columns: dict[str, list[float]] = {n: [] for n in names}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(names) + 1:
            raise ValidationError(f"{path} line {lineno}: expected {len(names) + 1} cells")
        if row[0] in ids:
            raise ValidationError(f"{path} line {lineno}: duplicate arch_id {row[0]!r}")
        ids.append(row[0])
        for name, cell in zip(names, row[1:]):
            try:
                columns[name].append(float(cell))
            except ValueError as exc:
                raise ValidationError(
                    f"{path} line {lineno}: bad value {cell!r} for {name}"
                ) from exc
    if not ids:
        raise ValidationError(f"{path}: no data rows")
    return ids, columns

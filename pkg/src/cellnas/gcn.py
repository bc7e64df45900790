"""Two-layer graph convolution surrogate.

Scores an architecture (a list of cell graphs) as
``readout(mean over cells of mean over nodes of H2)`` where
``Hk = relu(graph_norm(A_hat X Theta_k))`` and A_hat is the self-loop
symmetric degree normalization of the adjacency.  Training is plain SGD on
mean squared error plus L2 weight decay, with analytic gradients that are
checked against finite differences in the test suite.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .cellgraph import CellGraph
from .embeddings import OperatorEmbeddingTable, embed, table_fingerprint
from .errors import NumericError, ValidationError

GNORM_EPS = 1e-5
MODEL_FORMAT_VERSION = 1

WEIGHT_FIELDS = (
    "theta1",
    "gamma1",
    "beta1",
    "theta2",
    "gamma2",
    "beta2",
    "readout_w",
    "readout_b",
)

DECAYED_FIELDS = ("theta1", "theta2", "readout_w")


@dataclass(frozen=True)
class GcnModel:
    """Parameters of the surrogate; immutable once constructed.

    dim_in must equal the dim of the embedding table used at training time;
    table_fingerprint records that table's content hash so a mismatched
    table can be detected at predict time.
    """

    dim_in: int
    dim_h: int
    theta1: np.ndarray
    gamma1: np.ndarray
    beta1: np.ndarray
    theta2: np.ndarray
    gamma2: np.ndarray
    beta2: np.ndarray
    readout_w: np.ndarray
    readout_b: float
    seed: int = 0
    table_fingerprint: str = ""
    activation: str = "relu"

    def __post_init__(self):
        shapes = {
            "theta1": (self.dim_in, self.dim_h),
            "gamma1": (self.dim_h,),
            "beta1": (self.dim_h,),
            "theta2": (self.dim_h, self.dim_h),
            "gamma2": (self.dim_h,),
            "beta2": (self.dim_h,),
            "readout_w": (self.dim_h,),
        }
        for name, shape in shapes.items():
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != shape:
                raise ValidationError(f"{name} must have shape {shape}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} contains non-finite values")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if not np.isfinite(self.readout_b):
            raise ValidationError("readout_b is non-finite")
        if self.activation != "relu":
            raise ValidationError(f"unsupported activation {self.activation!r}")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.02
    weight_decay: float = 1e-5
    epochs: int = 300
    batch_size: int = 8
    seed: int = 0
    label_combination: str = "minmax-mean"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be positive")
        if self.weight_decay < 0:
            raise ValidationError("weight_decay must be nonnegative")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValidationError("epochs and batch_size must be positive")
        if self.label_combination != "minmax-mean":
            raise ValidationError(
                f"unknown label_combination {self.label_combination!r}"
            )


def normalize_adjacency(a: np.ndarray) -> np.ndarray:
    """Self-loop symmetric degree normalization of an adjacency matrix.

    The input is symmetrized (a OR a.T) first: the normalization presumes
    undirected structure, while edge direction is enforced separately by the
    DAG validation layer.  Returns D^{-1/2} (A + I) D^{-1/2}.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"adjacency must be square, got shape {a.shape}")
    if np.any(np.diag(a) != 0):
        raise ValidationError("adjacency must have a zero diagonal")
    sym = ((a != 0) | (a.T != 0)).astype(np.float64)
    a_tilde = sym + np.eye(a.shape[0])
    d = a_tilde.sum(axis=1)
    # dividing by sqrt(d_i * d_j) keeps the diagonal exactly 1/d_i for
    # integer degrees, since sqrt of a perfect square is exact
    return a_tilde / np.sqrt(np.outer(d, d))


def graph_norm(h: np.ndarray, gamma: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Standardize each feature column over this graph's nodes, then affine."""
    h = np.asarray(h, dtype=np.float64)
    mu = h.mean(axis=0)
    var = h.var(axis=0)
    return (h - mu) / np.sqrt(var + GNORM_EPS) * gamma + beta


def features_for_graph(g: CellGraph, table: OperatorEmbeddingTable) -> np.ndarray:
    """Node feature matrix X: row i is the embedding of node i's operator."""
    return np.stack([embed(table, op) for op in g.node_ops]).astype(np.float64)


def _check_dims(model: GcnModel, table: OperatorEmbeddingTable) -> None:
    if table.dim != model.dim_in:
        raise ValidationError(
            f"table dim {table.dim} does not match model dim_in {model.dim_in}"
        )


def check_table_match(model: GcnModel, table: OperatorEmbeddingTable) -> str | None:
    """None if the table matches training provenance, else a warning string.

    A differing fingerprint is legitimate (tables are regenerated to cover
    unseen operators) but worth surfacing; a dim mismatch is a hard error
    raised by forward itself.
    """
    _check_dims(model, table)
    fp = table_fingerprint(table)
    if model.table_fingerprint and fp != model.table_fingerprint:
        return (
            f"embedding table fingerprint {fp[:12]} differs from the one used "
            f"at training time ({model.table_fingerprint[:12]})"
        )
    return None


def _forward_graph(model: GcnModel, g: CellGraph, table):
    """One cell's forward pass; returns the pooled vector and a cache."""
    x = features_for_graph(g, table)
    abar = normalize_adjacency(g.adjacency)
    m1 = abar @ x
    z1 = m1 @ model.theta1
    mu1, var1 = z1.mean(axis=0), z1.var(axis=0)
    sig1 = np.sqrt(var1 + GNORM_EPS)
    xhat1 = (z1 - mu1) / sig1
    g1 = xhat1 * model.gamma1 + model.beta1
    h1 = np.maximum(g1, 0.0)
    m2 = abar @ h1
    z2 = m2 @ model.theta2
    mu2, var2 = z2.mean(axis=0), z2.var(axis=0)
    sig2 = np.sqrt(var2 + GNORM_EPS)
    xhat2 = (z2 - mu2) / sig2
    g2 = xhat2 * model.gamma2 + model.beta2
    h2 = np.maximum(g2, 0.0)
    pooled = h2.mean(axis=0)
    cache = {
        "abar": abar, "m1": m1, "xhat1": xhat1, "sig1": sig1, "g1": g1,
        "m2": m2, "xhat2": xhat2, "sig2": sig2, "g2": g2, "n": x.shape[0],
    }
    return pooled, cache


def forward(model: GcnModel, graphs, table: OperatorEmbeddingTable) -> float:
    """Score one architecture; multi-cell pooled vectors are averaged."""
    graphs = list(graphs)
    if not graphs:
        raise ValidationError("architecture has no cell graphs")
    _check_dims(model, table)
    pooled = np.mean([_forward_graph(model, g, table)[0] for g in graphs], axis=0)
    return float(model.readout_w @ pooled + model.readout_b)


def _gnorm_backward(dy, xhat, sig, gamma):
    dgamma = (dy * xhat).sum(axis=0)
    dbeta = dy.sum(axis=0)
    dxhat = dy * gamma
    dz = (dxhat - dxhat.mean(axis=0) - xhat * (dxhat * xhat).mean(axis=0)) / sig
    return dgamma, dbeta, dz


def _zero_grads(model: GcnModel) -> dict[str, np.ndarray]:
    grads = {f: np.zeros_like(getattr(model, f)) for f in WEIGHT_FIELDS[:-1]}
    grads["readout_b"] = 0.0
    return grads


def loss_and_gradients(model, items, table, weight_decay: float = 0.0):
    """Batch MSE + L2 loss and its analytic gradients per parameter field.

    items: iterable of (graphs, label) pairs.  The decay term covers
    theta1, theta2 and readout_w only; normalization affines and the bias
    are not decayed.
    """
    items = list(items)
    if not items:
        raise ValidationError("empty batch")
    _check_dims(model, table)
    grads = _zero_grads(model)
    total = 0.0
    inv_b = 1.0 / len(items)
    for graphs, label in items:
        if label is None:
            raise ValidationError("item has no label")
        graphs = list(graphs)
        per_graph = [_forward_graph(model, g, table) for g in graphs]
        pooled = np.mean([p for p, _ in per_graph], axis=0)
        score = float(model.readout_w @ pooled + model.readout_b)
        err = score - float(label)
        total += err * err * inv_b
        ds = 2.0 * err * inv_b
        grads["readout_b"] += ds
        grads["readout_w"] += ds * pooled
        dpool = ds * model.readout_w / len(graphs)
        for _, c in per_graph:
            dh2 = np.repeat(dpool[None, :] / c["n"], c["n"], axis=0)
            dg2 = dh2 * (c["g2"] > 0)
            dgam2, dbet2, dz2 = _gnorm_backward(dg2, c["xhat2"], c["sig2"], model.gamma2)
            grads["gamma2"] += dgam2
            grads["beta2"] += dbet2
            grads["theta2"] += c["m2"].T @ dz2
            dh1 = c["abar"].T @ (dz2 @ model.theta2.T)
            dg1 = dh1 * (c["g1"] > 0)
            dgam1, dbet1, dz1 = _gnorm_backward(dg1, c["xhat1"], c["sig1"], model.gamma1)
            grads["gamma1"] += dgam1
            grads["beta1"] += dbet1
            grads["theta1"] += c["m1"].T @ dz1
    if weight_decay:
        for f in DECAYED_FIELDS:
            w = getattr(model, f)
            total += weight_decay * float((w * w).sum())
            grads[f] += 2.0 * weight_decay * w
    return total, grads


def loss(model, items, table, weight_decay: float = 0.0) -> float:
    value, _ = loss_and_gradients(model, items, table, weight_decay)
    return value


def _glorot(rng, fan_in, fan_out, shape):
    s = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-s, s, size=shape)


def init_model(dim_in: int, dim_h: int, seed: int, fingerprint: str = "") -> GcnModel:
    rng = np.random.default_rng(seed)
    return GcnModel(
        dim_in=dim_in,
        dim_h=dim_h,
        theta1=_glorot(rng, dim_in, dim_h, (dim_in, dim_h)),
        gamma1=np.ones(dim_h),
        beta1=np.zeros(dim_h),
        theta2=_glorot(rng, dim_h, dim_h, (dim_h, dim_h)),
        gamma2=np.ones(dim_h),
        beta2=np.zeros(dim_h),
        readout_w=_glorot(rng, dim_h, 1, (dim_h,)),
        readout_b=0.0,
        seed=seed,
        table_fingerprint=fingerprint,
    )


def train(dataset, table, cfg: TrainConfig, dim_h: int = 32):
    """SGD-train a fresh model; returns (model, per-epoch full-set loss).

    dataset: iterable of objects with .graphs and .label (or (graphs, label)
    pairs).  Labels are clipped to [0, 1]; the readout is unbounded, so the
    MSE target is kept bounded.  Deterministic for a fixed seed.
    """
    items = []
    for d in dataset:
        graphs, label = (d.graphs, d.label) if hasattr(d, "graphs") else d
        if label is None:
            raise ValidationError("training item has no label")
        items.append((list(graphs), float(np.clip(label, 0.0, 1.0))))
    if not items:
        raise ValidationError("empty training dataset")

    model = init_model(table.dim, dim_h, cfg.seed, table_fingerprint(table))
    params = {f: np.array(getattr(model, f)) for f in WEIGHT_FIELDS[:-1]}
    params["readout_b"] = model.readout_b
    rng = np.random.default_rng(cfg.seed)
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(items))
        for start in range(0, len(items), cfg.batch_size):
            batch = [items[i] for i in order[start:start + cfg.batch_size]]
            current = replace(model, **params)
            _, grads = loss_and_gradients(current, batch, table, cfg.weight_decay)
            for f in WEIGHT_FIELDS:
                params[f] = params[f] - cfg.learning_rate * grads[f]
        current = replace(model, **params)
        epoch_loss = loss(current, items, table, cfg.weight_decay)
        if not np.isfinite(epoch_loss):
            raise NumericError(
                f"non-finite training loss at epoch {epoch}; lower the learning rate"
            )
        history.append(epoch_loss)
    return replace(model, **params), history


def predict_scores(model, architectures, table, threads: int = 1) -> np.ndarray:
    """Score many architectures; results are independent of thread count.

    architectures: iterable of graph lists.  The model is shared read-only
    across workers; the ordered map keeps output aligned with input.
    """
    archs = [list(g) for g in architectures]
    if threads > 1 and len(archs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            scores = list(pool.map(lambda g: forward(model, g, table), archs))
    else:
        scores = [forward(model, g, table) for g in archs]
    return np.asarray(scores, dtype=np.float64)


def normalize_labels(columns) -> np.ndarray:
    """Min-max scale each accuracy column to [0, 1], then average per row.

    columns: (n, m) array, one column per source dataset.  A constant
    column has no rank information and is rejected.
    """
    arr = np.asarray(columns, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] < 2:
        raise ValidationError(f"need a 2D column stack with >= 2 rows, got {arr.shape}")
    lo = arr.min(axis=0)
    hi = arr.max(axis=0)
    span = hi - lo
    if np.any(span == 0):
        bad = int(np.flatnonzero(span == 0)[0])
        raise ValidationError(f"column {bad} is constant; cannot min-max scale")
    return ((arr - lo) / span).mean(axis=1)


def save_model(model: GcnModel, path) -> None:
    """Versioned JSON container; float64 weights round-trip exactly."""
    obj = {
        "format_version": MODEL_FORMAT_VERSION,
        "dim_in": model.dim_in,
        "dim_h": model.dim_h,
        "seed": model.seed,
        "table_fingerprint": model.table_fingerprint,
        "activation": model.activation,
        "gnorm_eps": GNORM_EPS,
        "weights": {
            f: np.asarray(getattr(model, f)).tolist() for f in WEIGHT_FIELDS
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


def load_model(path) -> GcnModel:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read model file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"model file {path} is corrupt: {exc}") from exc
    if not isinstance(obj, dict) or "format_version" not in obj:
        raise ValidationError(f"model file {path} lacks a format_version header")
    if obj["format_version"] != MODEL_FORMAT_VERSION:
        raise ValidationError(
            f"model format version {obj['format_version']} unsupported "
            f"(expected {MODEL_FORMAT_VERSION})"
        )
    try:
        w = obj["weights"]
        return GcnModel(
            dim_in=obj["dim_in"],
            dim_h=obj["dim_h"],
            theta1=np.array(w["theta1"]),
            gamma1=np.array(w["gamma1"]),
            beta1=np.array(w["beta1"]),
            theta2=np.array(w["theta2"]),
            gamma2=np.array(w["gamma2"]),
            beta2=np.array(w["beta2"]),
            readout_w=np.array(w["readout_w"]),
            readout_b=float(w["readout_b"]),
            seed=obj["seed"],
            table_fingerprint=obj["table_fingerprint"],
            activation=obj.get("activation", "relu"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"model file {path} is corrupt: {exc}") from exc

"""Operator embedding tables and vector utilities.

Tables map operator names to fixed-length real vectors.  They are produced
by an external exporter and consumed here read-only; the JSON file format
(see :func:`load_table`) is the contract between the two sides.  A
deterministic hash-based embedder stands in when no exported table exists.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class TripletConfig:
    """Margin for the triplet hinge; 1.0 matches the published training setup."""

    margin: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.margin) and self.margin >= 0):
            raise ValidationError(f"margin must be >= 0, got {self.margin}")


@dataclass(frozen=True)
class OperatorEmbeddingTable:
    """Immutable name -> vector map with provenance metadata.

    Vectors are stored as float32; all have length ``dim`` and none is
    all-zero.  ``meta`` records model_name, sentence_length_class
    (short|medium|long) and, for PCA-reduced tables, pca_from.
    """

    dim: int
    entries: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError(f"dim must be positive, got {self.dim}")
        if not self.entries:
            raise ValidationError("table has no entries")
        frozen: dict[str, np.ndarray] = {}
        for name, vec in self.entries.items():
            arr = np.asarray(vec, dtype=np.float32)
            if arr.shape != (self.dim,):
                raise ValidationError(
                    f"entry {name!r} has length {arr.shape}, expected ({self.dim},)"
                )
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"entry {name!r} contains non-finite values")
            if not np.any(arr):
                raise ValidationError(f"entry {name!r} is all-zero")
            arr.flags.writeable = False
            frozen[name] = arr
        object.__setattr__(self, "entries", frozen)
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.entries)

    def __eq__(self, other) -> bool:
        if not isinstance(other, OperatorEmbeddingTable):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.meta == other.meta
            and self.names == other.names
            and all(
                np.array_equal(self.entries[n], other.entries[n]) for n in self.names
            )
        )

    def __hash__(self):
        return hash((self.dim, self.names))


def embed(table: OperatorEmbeddingTable, op_name: str) -> np.ndarray:
    """Exact lookup; unknown names are an error, never a silent fallback.

    An unknown operator means the table must be regenerated by the exporter
    with a description for the new operator.  Names are case-sensitive.
    """
    try:
        return table.entries[op_name]
    except KeyError:
        raise ValidationError(
            f"unknown operator {op_name!r}; regenerate the embedding table "
            f"with a description for it (known: {', '.join(table.names)})"
        ) from None


def load_table(path) -> OperatorEmbeddingTable:
    """Read an Embedding Table JSON file.

    Format: {"dim": int, "meta": {...}, "entries": {name: [floats]}}.
    Duplicate names inside "entries" are rejected rather than last-wins.
    """

    def reject_dupes(pairs):
        obj = {}
        for k, v in pairs:
            if k in obj:
                raise ValidationError(f"duplicate name {k!r} in embedding table")
            obj[k] = v
        return obj

    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh, object_pairs_hook=reject_dupes)
    except OSError as exc:
        raise ValidationError(f"cannot read embedding table {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"embedding table {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict) or "dim" not in raw or "entries" not in raw:
        raise ValidationError(f"embedding table {path} lacks dim/entries fields")
    dim = raw["dim"]
    if not isinstance(dim, int):
        raise ValidationError(f"dim must be an integer, got {dim!r}")
    return OperatorEmbeddingTable(dim, raw["entries"], raw.get("meta", {}))


def save_table(table: OperatorEmbeddingTable, path) -> None:
    """Write the JSON format read by :func:`load_table`; round-trips exactly.

    float32 values are emitted via their exact float64 representation, so
    load(save(t)) is bit-identical to t.
    """
    obj = {
        "dim": table.dim,
        "meta": table.meta,
        "entries": {n: [float(x) for x in v] for n, v in table.entries.items()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


def table_fingerprint(table: OperatorEmbeddingTable) -> str:
    """Stable content hash used to detect train/predict table mismatch."""
    h = hashlib.sha256()
    h.update(str(table.dim).encode())
    for name in sorted(table.names):
        h.update(b"\x00" + name.encode())
        h.update(table.entries[name].tobytes())
    return h.hexdigest()


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValidationError(f"vector shapes differ: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValidationError("cosine similarity undefined for zero vectors")
    return float(np.dot(a, b) / (na * nb))


def triplet_loss(s_a, s_p, s_n, cfg: TripletConfig = TripletConfig()) -> float:
    """Hinge loss max(||a-p|| - ||a-n|| + margin, 0) with Euclidean distances."""
    s_a = np.asarray(s_a, dtype=np.float64)
    s_p = np.asarray(s_p, dtype=np.float64)
    s_n = np.asarray(s_n, dtype=np.float64)
    if not (s_a.shape == s_p.shape == s_n.shape):
        raise ValidationError(
            f"triplet shapes differ: {s_a.shape}, {s_p.shape}, {s_n.shape}"
        )
    d_pos = np.linalg.norm(s_a - s_p)
    d_neg = np.linalg.norm(s_a - s_n)
    return float(max(d_pos - d_neg + cfg.margin, 0.0))


def pca_components(matrix: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Top-k principal components of the rows of ``matrix``.

    Returns (mean, components) with components as a row matrix ordered by
    descending eigenvalue; at most min(k, n_rows, dim) rows exist.  Each
    component's sign is fixed so its largest-magnitude coordinate is
    positive, making the output unique.
    """
    mean = matrix.mean(axis=0)
    centered = matrix - mean
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    comps = vt[:k].copy()
    for row in comps:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0
    return mean, comps


def pca_reduce(table: OperatorEmbeddingTable, k: int) -> OperatorEmbeddingTable:
    """Project all entries onto the top-k principal components of the table.

    The components are fit on the table's own entry set; there is no
    external corpus.  A table of n entries has at most n-1 informative
    components, so when k exceeds that the trailing coordinates are exact
    zeros rather than arbitrary null-space directions.  meta.pca_from
    records the source dimension.
    """
    if k < 1 or k > table.dim:
        raise ValidationError(f"k must be in [1, {table.dim}], got {k}")
    if len(table.entries) < 2:
        raise ValidationError("PCA needs at least 2 entries")
    names = table.names
    matrix = np.stack([table.entries[n] for n in names]).astype(np.float64)
    mean, comps = pca_components(matrix, k)
    projected = (matrix - mean) @ comps.T
    if projected.shape[1] < k:
        pad = np.zeros((projected.shape[0], k - projected.shape[1]))
        projected = np.hstack([projected, pad])
    meta = dict(table.meta)
    meta["pca_from"] = table.dim
    entries = {n: projected[i] for i, n in enumerate(names)}
    return OperatorEmbeddingTable(k, entries, meta)


def fallback_hash_embedder(op_name: str, dim: int) -> np.ndarray:
    """Deterministic unit vector derived only from the operator name.

    Stands in for exported embeddings in tests and offline runs.  The seed
    comes from a stable cryptographic hash, so equal names always give
    equal vectors across processes and platforms.
    """
    if dim < 1:
        raise ValidationError(f"dim must be >= 1, got {dim}")
    digest = hashlib.sha256(op_name.encode("utf-8")).digest()
    seed = int.from_bytes(digest[:8], "big")
    rng = np.random.default_rng(seed)
    vec = rng.standard_normal(dim)
    return vec / np.linalg.norm(vec)


def build_fallback_table(names, dim: int) -> OperatorEmbeddingTable:
    """Hash-embedder table over ``names`` (reserved names included by caller)."""
    entries = {n: fallback_hash_embedder(n, dim) for n in names}
    return OperatorEmbeddingTable(
        dim, entries, {"model_name": "hash-fallback", "sentence_length_class": "short"}
    )

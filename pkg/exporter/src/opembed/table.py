"""The Embedding Table JSON contract, writer side.

Format: {"dim": int, "meta": {...}, "entries": {name: [floats]}}.  This
module deliberately reimplements the format instead of importing the
consumer package: the file is the only interface between the two sides,
and each side must stand alone.  Values are float32, serialized through
their exact float64 representation so a read-back is bit-identical.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import ValidationError


def validate_entries(dim: int, entries: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Check the table invariants and return entries cast to float32."""
    if dim < 1:
        raise ValidationError(f"dim must be positive, got {dim}")
    if not entries:
        raise ValidationError("table has no entries")
    out = {}
    for name, vec in entries.items():
        arr = np.asarray(vec, dtype=np.float32)
        if arr.shape != (dim,):
            raise ValidationError(
                f"entry {name!r} has shape {arr.shape}, expected ({dim},)"
            )
        if not np.all(np.isfinite(arr)):
            raise ValidationError(f"entry {name!r} contains non-finite values")
        if not np.any(arr):
            raise ValidationError(f"entry {name!r} is all-zero")
        out[name] = arr
    return out


def write_table(path, dim: int, entries: dict[str, np.ndarray], meta: dict) -> None:
    """Write the Embedding Table JSON; entry order follows ``entries``."""
    checked = validate_entries(dim, entries)
    obj = {
        "dim": int(dim),
        "meta": meta,
        "entries": {n: [float(x) for x in v] for n, v in checked.items()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


def read_table(path) -> tuple[int, dict[str, np.ndarray], dict]:
    """Read a table back as (dim, float32 entries, meta).

    Used by the similarity report; applies the same invariants as the
    writer so a hand-edited file fails loudly here rather than downstream.
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
    entries = validate_entries(dim, raw["entries"])
    meta = raw.get("meta", {})
    if not isinstance(meta, dict):
        raise ValidationError(f"meta must be an object, got {type(meta).__name__}")
    return dim, entries, meta


def pca_project(matrix: np.ndarray, k: int) -> np.ndarray:
    """Rows of ``matrix`` in the top-k principal-component basis.

    Mean-center, SVD, fix each component's sign so its largest-magnitude
    coordinate is positive, project.  A matrix of n rows has at most n-1
    informative components; coordinates past that are exact zeros so the
    output is unique and always n x k.
    """
    n, dim = matrix.shape
    if k < 1 or k > dim:
        raise ValidationError(f"k must be in [1, {dim}], got {k}")
    if n < 2:
        raise ValidationError("PCA needs at least 2 entries")
    centered = matrix - matrix.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    comps = vt[:k].copy()
    for row in comps:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0
    projected = centered @ comps.T
    if projected.shape[1] < k:
        pad = np.zeros((n, k - projected.shape[1]))
        projected = np.hstack([projected, pad])
    return projected


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValidationError("cosine undefined for zero vectors")
    return float(np.dot(a, b) / (na * nb))

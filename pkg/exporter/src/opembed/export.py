"""Turn a description set into an Embedding Table JSON file."""

from __future__ import annotations

import numpy as np

from .descriptions import OperatorDescriptionSet
from .encode import TransformerEncoder
from .errors import ValidationError
from .table import pca_project, validate_entries, write_table


def export_table(
    descriptions: OperatorDescriptionSet,
    model_id,
    length_class: str,
    out_path,
    pca_k: int | None = None,
    revision: str | None = None,
) -> dict:
    """Encode one sentence per operator and write the table file.

    ``model_id`` is normally a pretrained-model identifier; any object with
    ``dim`` and ``encode`` attributes is also accepted so deterministic
    stand-in encoders can drive tests without the real model.  With
    ``pca_k`` the vectors are reduced to the table's own top-k principal
    components and meta.pca_from records the source dimension.  Returns a
    small summary dict (out_path, dim, entry count, model provenance).
    """
    sentences = descriptions.sentences(length_class)
    if isinstance(model_id, str):
        encoder = TransformerEncoder(model_id, revision=revision)
    else:
        encoder = model_id
        if revision is not None:
            raise ValidationError("revision applies only when model_id is a string")
    names = list(sentences)
    matrix = np.asarray(encoder.encode([sentences[n] for n in names]))
    if matrix.shape != (len(names), encoder.dim):
        raise ValidationError(
            f"encoder returned shape {matrix.shape}, "
            f"expected ({len(names)}, {encoder.dim})"
        )
    entries = validate_entries(
        encoder.dim, {n: matrix[i] for i, n in enumerate(names)}
    )
    dim = encoder.dim
    meta = {
        "model_name": getattr(encoder, "model_id", type(encoder).__name__),
        "revision": getattr(encoder, "revision", None),
        "sentence_length_class": length_class,
        "sentences": sentences,
    }
    if pca_k is not None:
        stacked = np.stack([entries[n] for n in names]).astype(np.float64)
        projected = pca_project(stacked, pca_k)
        entries = {n: projected[i] for i, n in enumerate(names)}
        meta["pca_from"] = dim
        dim = pca_k
    write_table(out_path, dim, entries, meta)
    return {
        "out_path": str(out_path),
        "dim": dim,
        "entry_count": len(names),
        "model_name": meta["model_name"],
        "revision": meta["revision"],
        "sentence_length_class": length_class,
    }

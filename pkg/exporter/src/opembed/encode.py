"""Sentence encoding with a pretrained transformer, mean-pooled per sentence.

Any object with a ``dim`` attribute and an ``encode(sentences) -> (n, dim)``
method works as an encoder; this module provides the real one.  The heavy
imports happen inside the constructor so the rest of the package stays
usable without torch installed.
"""

from __future__ import annotations

import numpy as np

from .errors import ModelError

DEFAULT_MODEL_ID = "sentence-transformers/all-MiniLM-L6-v2"


class TransformerEncoder:
    """Wraps a pretrained masked-language model as a sentence encoder.

    Each sentence's vector is the mean of the final-layer token vectors.
    Sentences are encoded one per forward pass so padding can never leak
    into the mean, and inference runs under no_grad in eval mode, which
    makes repeated invocations bit-identical on the same build.
    """

    def __init__(self, model_id: str = DEFAULT_MODEL_ID, revision: str | None = None):
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise ModelError(
                f"sentence encoding needs transformers and torch: {exc}"
            ) from exc
        try:
            self._tokenizer = AutoTokenizer.from_pretrained(model_id, revision=revision)
            self._model = AutoModel.from_pretrained(model_id, revision=revision)
        except Exception as exc:  # hub, cache and config failures all land here
            raise ModelError(f"cannot resolve model {model_id!r}: {exc}") from exc
        self._model.eval()
        self._torch = torch
        self.model_id = model_id
        # pin what actually loaded: the requested revision, else the
        # resolved commit hash when the hub provides one
        self.revision = revision or getattr(self._model.config, "_commit_hash", None)
        self.dim = int(self._model.config.hidden_size)

    def encode(self, sentences: list[str]) -> np.ndarray:
        vecs = []
        with self._torch.no_grad():
            for text in sentences:
                toks = self._tokenizer(text, return_tensors="pt", truncation=True)
                hidden = self._model(**toks).last_hidden_state[0]
                mask = toks["attention_mask"][0].unsqueeze(-1)
                pooled = (hidden * mask).sum(0) / mask.sum()
                vecs.append(pooled.numpy())
        return np.stack(vecs).astype(np.float32)

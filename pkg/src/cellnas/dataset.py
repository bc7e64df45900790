"""Architecture datasets: JSONL ingestion, validation, canonical storage.

Line format: one JSON object per line with fields
{"id": str, "cells": [arch-string or {"node_ops", "adjacency"}],
 "label": float or null, "aux": object}.
Arch strings and explicit graphs may be mixed; ingestion normalizes both to
validated node-operator graphs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .cellgraph import (
    CellGraph,
    edge_to_node_transform,
    parse_arch_string,
    validate_dag,
)
from .errors import ValidationError


@dataclass(frozen=True)
class ArchItem:
    id: str
    graphs: tuple[CellGraph, ...]
    label: float | None = None
    aux: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.id:
            raise ValidationError("architecture id must be nonempty")
        if not self.graphs:
            raise ValidationError(f"architecture {self.id!r} has no cells")
        if self.label is not None and not np.isfinite(self.label):
            raise ValidationError(f"architecture {self.id!r} has a non-finite label")
        object.__setattr__(self, "graphs", tuple(self.graphs))


@dataclass(frozen=True)
class ArchDataset:
    items: tuple[ArchItem, ...]

    def __post_init__(self):
        seen = set()
        for it in self.items:
            if it.id in seen:
                raise ValidationError(f"duplicate architecture id {it.id!r}")
            seen.add(it.id)
        object.__setattr__(self, "items", tuple(self.items))

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __getitem__(self, i):
        return self.items[i]

    def labeled(self) -> "ArchDataset":
        return ArchDataset(tuple(it for it in self.items if it.label is not None))

    def op_names(self) -> tuple[str, ...]:
        names = set()
        for it in self.items:
            for g in it.graphs:
                names.update(g.node_ops)
        return tuple(sorted(names))


def _cell_from_obj(obj, vocabulary=None) -> CellGraph:
    if isinstance(obj, str):
        g = edge_to_node_transform(parse_arch_string(obj, vocabulary))
    elif isinstance(obj, dict):
        g = CellGraph.from_json_obj(obj)
        if vocabulary is not None:
            reserved = {"output"}
            for op in g.node_ops:
                if op not in vocabulary and op not in reserved and not op.startswith("input"):
                    raise ValidationError(f"unknown operator {op!r}")
    else:
        raise ValidationError(f"cell must be an arch string or a graph object, got {type(obj).__name__}")
    violation = validate_dag(g)
    if violation is not None:
        raise ValidationError(f"invalid cell graph: {violation}")
    return g


def read_jsonl(path, vocabulary: set[str] | None = None) -> ArchDataset:
    """Parse and validate a dataset file; errors carry the offending line number."""
    items: list[ArchItem] = []
    seen: set[str] = set()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ValidationError(f"cannot read dataset {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict) or "id" not in obj or "cells" not in obj:
                raise ValidationError("object lacks id/cells fields")
            if obj["id"] in seen:
                raise ValidationError(f"duplicate architecture id {obj['id']!r}")
            cells = obj["cells"]
            if not isinstance(cells, list) or not cells:
                raise ValidationError("cells must be a nonempty list")
            graphs = tuple(_cell_from_obj(c, vocabulary) for c in cells)
            label = obj.get("label")
            item = ArchItem(
                id=str(obj["id"]),
                graphs=graphs,
                label=None if label is None else float(label),
                aux=obj.get("aux") or {},
            )
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path} line {lineno}: not valid JSON: {exc.msg}") from exc
        except (ValidationError, TypeError, ValueError) as exc:
            raise ValidationError(f"{path} line {lineno}: {exc}") from exc
        seen.add(item.id)
        items.append(item)
    if not items:
        raise ValidationError(f"dataset {path} is empty")
    return ArchDataset(tuple(items))


def write_jsonl(dataset: ArchDataset, path) -> None:
    """Canonical store: every cell in explicit graph form, one object per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for it in dataset:
            obj = {
                "id": it.id,
                "cells": [g.to_json_obj() for g in it.graphs],
                "label": it.label,
                "aux": it.aux,
            }
            fh.write(json.dumps(obj, separators=(",", ":")) + "\n")


def summarize(dataset: ArchDataset) -> dict:
    labels = [it.label for it in dataset if it.label is not None]
    return {
        "count": len(dataset),
        "labeled": len(labels),
        "label_min": min(labels) if labels else None,
        "label_max": max(labels) if labels else None,
        "operators": list(dataset.op_names()),
    }

"""Pairwise cosine-similarity report over a table's entries."""

from __future__ import annotations

from itertools import combinations

import numpy as np

from .errors import ValidationError
from .table import cosine, read_table

REPORT_HEADER = "op_a,op_b,cosine"


def similarity_report(entries: dict[str, np.ndarray]) -> list[tuple[str, str, float]]:
    """All unordered entry pairs with their cosines, most similar first.

    Each pair is named alphabetically and ties are broken by the names, so
    the report depends only on the table's content, not its entry order.
    """
    if len(entries) < 3:
        raise ValidationError(
            f"similarity report needs at least 3 entries, got {len(entries)}"
        )
    rows = [
        (*sorted((a, b)), cosine(entries[a], entries[b]))
        for a, b in combinations(entries, 2)
    ]
    rows.sort(key=lambda r: (-r[2], r[0], r[1]))
    return rows


def report_from_file(table_path) -> list[tuple[str, str, float]]:
    _, entries, _ = read_table(table_path)
    return similarity_report(entries)


def format_report_csv(rows: list[tuple[str, str, float]]) -> str:
    lines = [REPORT_HEADER]
    lines.extend(f"{a},{b},{repr(c)}" for a, b, c in rows)
    return "\n".join(lines) + "\n"

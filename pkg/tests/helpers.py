"""Shared fixtures-by-import for the test suite."""

from __future__ import annotations

import numpy as np

from cellnas.dataset import ArchItem
from cellnas.search import cells_to_graphs, enumerate_cells, toy_space

OPTIMAL_ARCH = (
    "|nor_conv_3x3~0|+|nor_conv_3x3~0|nor_conv_1x1~1|"
    "+|skip_connect~0|nor_conv_3x3~1|nor_conv_3x3~2|"
)
ALL_NONE_ARCH = "|none~0|+|none~0|none~1|+|none~0|none~1|none~2|"

TOY_OPS = ("op_a", "op_b", "op_c")


def toy_truth(cell) -> float:
    """Synthetic accuracy for the 27-cell space: affine in op counts plus
    one pairwise interaction, all values inside [0, 1]."""
    c = cell.op_counts()
    na, nb, nc = c.get("op_a", 0), c.get("op_b", 0), c.get("op_c", 0)
    return 0.1 + 0.25 * na + 0.12 * nb + 0.03 * nc + 0.08 * na * nb


def toy_items():
    """All 27 toy cells as labeled ArchItems, in enumeration order."""
    space = toy_space()
    cells = list(enumerate_cells(space.cell_types[0]))
    return space, cells, [
        ArchItem(f"c{i:02d}", cells_to_graphs(space, [cell]), toy_truth(cell))
        for i, cell in enumerate(cells)
    ]


def random_dag_adjacency(rng: np.random.Generator, n: int) -> np.ndarray:
    """Random strictly-upper-triangular adjacency (guaranteed acyclic)."""
    adj = (rng.random((n, n)) < 0.5).astype(np.int8)
    return np.triu(adj, k=1)

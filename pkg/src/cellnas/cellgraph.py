"""Universal DAG cell representation.

Two encodings of a cell coexist in the wild: edge-labeled (operators sit on
the edges between feature nodes, as in NAS-Bench-201 and DARTS) and
node-labeled (operators are the nodes, edges carry dataflow, as in
NAS-Bench-101).  The predictor consumes only the node-labeled form, so this
module defines both types and the transform that unifies them.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

INPUT = "input"
OUTPUT = "output"

_INPUT_RE = re.compile(r"^input\d*$")

_ARCH_TOKEN_RE = re.compile(r"^(?P<op>[^~|+]+)~(?P<src>\d+)$")


def is_input_name(name: str) -> bool:
    """True for the reserved source names: "input", "input0", "input1", ..."""
    return bool(_INPUT_RE.match(name))


@dataclass(frozen=True, eq=False)
class CellGraph:
    """Operator-labeled DAG: ``adjacency[i, j] == 1`` means node i feeds node j.

    Immutable after construction; the adjacency array is write-protected.
    Invariants (checked by :func:`validate_dag`): acyclic, no self-loops,
    reserved input node(s) with in-degree 0, a single "output" node with
    out-degree 0, and full input->output connectivity.
    """

    node_ops: tuple[str, ...]
    adjacency: np.ndarray

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=np.int8)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValidationError(f"adjacency must be square, got shape {adj.shape}")
        if adj.shape[0] != len(self.node_ops):
            raise ValidationError(
                f"{len(self.node_ops)} node ops but adjacency is {adj.shape[0]}x{adj.shape[0]}"
            )
        adj.flags.writeable = False
        object.__setattr__(self, "node_ops", tuple(self.node_ops))
        object.__setattr__(self, "adjacency", adj)

    @property
    def num_nodes(self) -> int:
        return len(self.node_ops)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CellGraph):
            return NotImplemented
        return self.node_ops == other.node_ops and np.array_equal(
            self.adjacency, other.adjacency
        )

    def permuted(self, order: list[int] | np.ndarray) -> "CellGraph":
        """Relabel nodes by ``order`` (new index k holds old node order[k])."""
        order = list(order)
        if sorted(order) != list(range(self.num_nodes)):
            raise ValidationError("order must be a permutation of node indices")
        ops = tuple(self.node_ops[i] for i in order)
        adj = self.adjacency[np.ix_(order, order)]
        return CellGraph(ops, adj)

    def to_json_obj(self) -> dict:
        return {
            "node_ops": list(self.node_ops),
            "adjacency": self.adjacency.astype(int).tolist(),
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "CellGraph":
        try:
            return cls(tuple(obj["node_ops"]), np.asarray(obj["adjacency"]))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"bad explicit graph object: {exc}") from exc


@dataclass(frozen=True)
class EdgeOpCell:
    """Edge-labeled cell: ``edge_ops[(i, j)]`` is the operator on edge i -> j.

    Feature nodes are numbered 0..num_nodes-1; all edges must satisfy i < j.
    """

    num_nodes: int
    edge_ops: dict[tuple[int, int], str] = field(compare=True)

    def __post_init__(self):
        if self.num_nodes < 2:
            raise ValidationError("a cell needs at least 2 feature nodes")
        if not self.edge_ops:
            raise ValidationError("a cell needs at least one edge")
        for (i, j), op in self.edge_ops.items():
            if not (0 <= i < j < self.num_nodes):
                raise ValidationError(f"bad edge ({i}, {j}) for {self.num_nodes} nodes")
            if not op:
                raise ValidationError(f"empty operator name on edge ({i}, {j})")
        ordered = dict(sorted(self.edge_ops.items()))
        object.__setattr__(self, "edge_ops", ordered)

    @property
    def edges(self) -> tuple[tuple[int, int], ...]:
        return tuple(self.edge_ops)

    def op_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for op in self.edge_ops.values():
            counts[op] = counts.get(op, 0) + 1
        return counts


def parse_arch_string(s: str, vocabulary: set[str] | None = None) -> EdgeOpCell:
    """Parse the "|op~0|+|op~0|op~1|+..." cell encoding.

    Feature-node groups are separated by "+"; group g lists the incoming
    edges of node g+1 with ascending source indices 0..g.  The number of
    feature nodes is the group count plus one.
    """
    if not s or not s.strip():
        raise ValidationError("empty architecture string")
    groups = s.strip().split("+")
    num_nodes = len(groups) + 1
    edge_ops: dict[tuple[int, int], str] = {}
    for g, group in enumerate(groups):
        dst = g + 1
        if not (group.startswith("|") and group.endswith("|") and len(group) > 1):
            raise ValidationError(
                f"group {g}: expected '|op~src|...|', got {group!r}"
            )
        tokens = group[1:-1].split("|")
        if len(tokens) != dst:
            raise ValidationError(
                f"group {g}: node {dst} needs {dst} incoming edges, got {len(tokens)}"
            )
        for k, token in enumerate(tokens):
            m = _ARCH_TOKEN_RE.match(token)
            if not m:
                raise ValidationError(f"group {g}: malformed edge token {token!r}")
            src = int(m.group("src"))
            if src != k:
                raise ValidationError(
                    f"group {g}: expected source {k} at position {k}, got {src}"
                )
            op = m.group("op")
            if vocabulary is not None and op not in vocabulary:
                raise ValidationError(f"unknown operator {op!r} on edge ({src}, {dst})")
            edge_ops[(src, dst)] = op
    return EdgeOpCell(num_nodes, edge_ops)


def format_arch_string(cell: EdgeOpCell) -> str:
    """Inverse of :func:`parse_arch_string`; requires a complete DAG cell."""
    groups = []
    for dst in range(1, cell.num_nodes):
        tokens = []
        for src in range(dst):
            if (src, dst) not in cell.edge_ops:
                raise ValidationError(
                    f"cell is not a complete DAG: missing edge ({src}, {dst})"
                )
            tokens.append(f"{cell.edge_ops[(src, dst)]}~{src}")
        groups.append("|" + "|".join(tokens) + "|")
    return "+".join(groups)


def expand_edges_to_nodes(
    num_nodes: int,
    ops_per_edge: dict[tuple[int, int], list[str]],
    num_inputs: int = 1,
) -> CellGraph:
    """Build the node-labeled graph with one op node per (edge, operator) pair.

    Parallel operators on one edge become parallel nodes between the same
    endpoints.  Op node for edge (i, j) receives from every op node of
    edges (*, i) -- or from the reserved input node when i is an input
    feature node -- and feeds every op node of edges (j, *) -- or the output
    node when j is the last feature node.

    Node order: input node(s) first, then edges in (source, destination)
    lexicographic order with each edge's operators in their listed order,
    output last.  That order is topological, so the adjacency comes out
    strictly upper triangular.
    """
    if num_inputs < 1 or num_inputs >= num_nodes:
        raise ValidationError(f"num_inputs must be in [1, {num_nodes - 1})")
    edges = sorted(ops_per_edge)
    for i, j in edges:
        if not (0 <= i < j < num_nodes):
            raise ValidationError(f"bad edge ({i}, {j}) for {num_nodes} nodes")
        if not ops_per_edge[(i, j)]:
            raise ValidationError(f"edge ({i}, {j}) carries no operators")

    input_names = [INPUT] if num_inputs == 1 else [f"input{k}" for k in range(num_inputs)]
    node_ops: list[str] = list(input_names)
    index_of: dict[tuple[int, int, int], int] = {}
    for e in edges:
        for k, op in enumerate(ops_per_edge[e]):
            index_of[(e[0], e[1], k)] = len(node_ops)
            node_ops.append(op)
    out_idx = len(node_ops)
    node_ops.append(OUTPUT)

    n = len(node_ops)
    adj = np.zeros((n, n), dtype=np.int8)
    last = num_nodes - 1
    for i, j in edges:
        for k in range(len(ops_per_edge[(i, j)])):
            here = index_of[(i, j, k)]
            if i < num_inputs:
                adj[i, here] = 1
            else:
                for (a, b), ops in ops_per_edge.items():
                    if b == i:
                        for m in range(len(ops)):
                            adj[index_of[(a, b, m)], here] = 1
            if j == last:
                adj[here, out_idx] = 1
            # edges (j, *) pick this node up as a predecessor in their own pass
            for (a, b), ops in ops_per_edge.items():
                if a == j:
                    for m in range(len(ops)):
                        adj[here, index_of[(a, b, m)]] = 1
    return CellGraph(tuple(node_ops), adj)


def edge_to_node_transform(cell: EdgeOpCell, num_inputs: int = 1) -> CellGraph:
    """Unify an edge-labeled cell into the node-labeled form.

    The output has one op node per edge plus the reserved input/output
    nodes.  "none" operators are kept: absence of computation is information
    the predictor should see.
    """
    graph = expand_edges_to_nodes(
        cell.num_nodes,
        {e: [op] for e, op in cell.edge_ops.items()},
        num_inputs=num_inputs,
    )
    violation = validate_dag(graph)
    if violation is not None:
        raise ValidationError(f"cell does not form a valid DAG: {violation}")
    return graph


def validate_dag(g: CellGraph) -> str | None:
    """Return None if all CellGraph invariants hold, else the first violation.

    Violation names: "self-loop", "cycle", "no-input", "input-in-degree",
    "no-output", "multiple-output", "output-out-degree",
    "unreachable-from-input", "unreachable-output".
    """
    adj = g.adjacency
    n = g.num_nodes
    if np.any(np.diag(adj) != 0):
        return "self-loop"

    # Kahn's algorithm; leftover nodes mean a cycle.
    indeg = adj.sum(axis=0).astype(int)
    queue = [i for i in range(n) if indeg[i] == 0]
    seen = 0
    while queue:
        u = queue.pop()
        seen += 1
        for v in np.flatnonzero(adj[u]):
            indeg[v] -= 1
            if indeg[v] == 0:
                queue.append(int(v))
    if seen != n:
        return "cycle"

    inputs = [i for i, op in enumerate(g.node_ops) if is_input_name(op)]
    outputs = [i for i, op in enumerate(g.node_ops) if op == OUTPUT]
    if not inputs:
        return "no-input"
    if len(set(g.node_ops[i] for i in inputs)) != len(inputs):
        return "duplicate-input-name"
    for i in inputs:
        if adj[:, i].sum() != 0:
            return "input-in-degree"
    if not outputs:
        return "no-output"
    if len(outputs) > 1:
        return "multiple-output"
    out = outputs[0]
    if adj[out].sum() != 0:
        return "output-out-degree"

    fwd = _reachable_from(adj, inputs)
    if not all(fwd):
        return "unreachable-from-input"
    bwd = _reachable_from(adj.T, [out])
    if not all(bwd):
        return "unreachable-output"
    return None


def _reachable_from(adj: np.ndarray, starts: list[int]) -> np.ndarray:
    reached = np.zeros(adj.shape[0], dtype=bool)
    stack = list(starts)
    reached[starts] = True
    while stack:
        u = stack.pop()
        for v in np.flatnonzero(adj[u]):
            if not reached[v]:
                reached[v] = True
                stack.append(int(v))
    return reached


def enumerate_paths(g: CellGraph) -> list[tuple[str, ...]]:
    """All operator sequences along input->output paths (small graphs only)."""
    inputs = [i for i, op in enumerate(g.node_ops) if is_input_name(op)]
    out = g.node_ops.index(OUTPUT)
    paths: list[tuple[str, ...]] = []

    def walk(u: int, acc: list[str]):
        if u == out:
            paths.append(tuple(acc))
            return
        for v in np.flatnonzero(g.adjacency[u]):
            walk(int(v), acc + [g.node_ops[v]])

    for i in inputs:
        walk(i, [])
    return sorted(set(p[:-1] for p in paths))  # drop the trailing "output" label

"""Supernet pruning, differential evolution, and the hybrid of the two.

Both searches treat the scoring model as a black-box fitness oracle.  The
pruning side removes the least-contributing operator from every multi-op
edge per step (leave-one-out importance), shrinking the all-operators
supernet to a single-path cell in |O| - 1 steps; its cost is linear in
|O| * E instead of the |O|^E of enumeration.  The evolutionary side runs
rand/1/bin differential evolution over continuous per-edge genes in [0, 1]
that discretize to operator choices.  The hybrid returns the better of the
two final candidates under the same model.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cellgraph import CellGraph, EdgeOpCell, expand_edges_to_nodes, format_arch_string
from .errors import ValidationError
from .gcn import GcnModel, forward
from .proxies import MacroConfig


@dataclass(frozen=True)
class CellType:
    """One searchable cell kind: its edge structure and candidate operators."""

    name: str
    num_nodes: int
    edges: tuple[tuple[int, int], ...]
    ops: tuple[str, ...]
    num_inputs: int = 1

    def __post_init__(self):
        if not self.edges:
            raise ValidationError(f"cell type {self.name!r} has no edges")
        if not self.ops:
            raise ValidationError(f"cell type {self.name!r} has no operators")
        if len(set(self.ops)) != len(self.ops):
            raise ValidationError(f"cell type {self.name!r} repeats an operator")
        edges = tuple((int(i), int(j)) for i, j in self.edges)
        if len(set(edges)) != len(edges):
            raise ValidationError(f"cell type {self.name!r} repeats an edge")
        for i, j in edges:
            if not (0 <= i < j < self.num_nodes):
                raise ValidationError(
                    f"cell type {self.name!r}: bad edge ({i}, {j}) for "
                    f"{self.num_nodes} nodes"
                )
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "ops", tuple(self.ops))


@dataclass(frozen=True)
class SearchSpace:
    cell_types: tuple[CellType, ...]
    macro: MacroConfig | None = None

    def __post_init__(self):
        if not self.cell_types:
            raise ValidationError("search space has no cell types")
        names = [ct.name for ct in self.cell_types]
        if len(set(names)) != len(names):
            raise ValidationError("cell type names must be unique")
        object.__setattr__(self, "cell_types", tuple(self.cell_types))

    @property
    def num_genes(self) -> int:
        return sum(len(ct.edges) for ct in self.cell_types)


@dataclass(frozen=True)
class Supernet:
    """Per cell type, per edge: the operators still retained."""

    space: SearchSpace
    retained: tuple[tuple[tuple[str, ...], ...], ...]

    def __post_init__(self):
        if len(self.retained) != len(self.space.cell_types):
            raise ValidationError("retained sets do not match cell types")
        for ct, per_edge in zip(self.space.cell_types, self.retained):
            if len(per_edge) != len(ct.edges):
                raise ValidationError(f"retained sets do not match edges of {ct.name!r}")
            for e, ops in zip(ct.edges, per_edge):
                if not ops:
                    raise ValidationError(f"{ct.name!r} edge {e} retains no operator")
                if any(op not in ct.ops for op in ops):
                    raise ValidationError(f"{ct.name!r} edge {e} retains a foreign operator")
        object.__setattr__(
            self, "retained", tuple(tuple(tuple(ops) for ops in pe) for pe in self.retained)
        )

    @classmethod
    def full(cls, space: SearchSpace) -> "Supernet":
        """The initial supernet retaining every candidate operator everywhere."""
        return cls(space, tuple(tuple(ct.ops for _ in ct.edges) for ct in space.cell_types))

    def is_single_path(self) -> bool:
        return all(len(ops) == 1 for pe in self.retained for ops in pe)

    def total_ops(self) -> int:
        return sum(len(ops) for pe in self.retained for ops in pe)

    def without(self, ct_index: int, edge_index: int, op: str) -> "Supernet":
        pe = list(self.retained[ct_index])
        ops = tuple(o for o in pe[edge_index] if o != op)
        pe[edge_index] = ops
        retained = list(self.retained)
        retained[ct_index] = tuple(pe)
        return Supernet(self.space, tuple(retained))

    def to_cells(self) -> list[EdgeOpCell]:
        if not self.is_single_path():
            raise ValidationError("supernet still retains parallel operators")
        return [
            EdgeOpCell(ct.num_nodes, {e: pe[k][0] for k, e in enumerate(ct.edges)})
            for ct, pe in zip(self.space.cell_types, self.retained)
        ]


def supernet_to_graphs(net: Supernet) -> list[CellGraph]:
    """One graph per cell type; parallel retained operators become parallel nodes."""
    return [
        expand_edges_to_nodes(
            ct.num_nodes,
            {e: list(pe[k]) for k, e in enumerate(ct.edges)},
            num_inputs=ct.num_inputs,
        )
        for ct, pe in zip(net.space.cell_types, net.retained)
    ]


def cells_to_graphs(space: SearchSpace, cells) -> list[CellGraph]:
    return [
        expand_edges_to_nodes(
            ct.num_nodes,
            {e: [cell.edge_ops[e]] for e in ct.edges},
            num_inputs=ct.num_inputs,
        )
        for ct, cell in zip(space.cell_types, cells)
    ]


class _Scorer:
    """Counts fitness evaluations; fans batches out across threads.

    model may be a GcnModel (scored through the surrogate forward pass with
    the given table) or any callable mapping a list of CellGraph to a float,
    which is how tests and custom oracles plug in.
    """

    def __init__(self, model, table, threads: int = 1):
        if isinstance(model, GcnModel):
            self._fn = lambda graphs: forward(model, graphs, table)
        elif callable(model):
            self._fn = model
        else:
            raise ValidationError(
                f"model must be a GcnModel or a callable, got {type(model).__name__}"
            )
        self.threads = max(1, int(threads))
        self.count = 0

    def one(self, graphs) -> float:
        self.count += 1
        return float(self._fn(graphs))

    def many(self, graph_lists) -> list[float]:
        graph_lists = list(graph_lists)
        self.count += len(graph_lists)
        if self.threads > 1 and len(graph_lists) > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                return [float(v) for v in pool.map(self._fn, graph_lists)]
        return [float(self._fn(g)) for g in graph_lists]


def _prune_one_step(net: Supernet, scorer: _Scorer):
    """Shared body of prune_step/prune_search operating on a live scorer."""
    base = scorer.one(supernet_to_graphs(net))
    candidates = []  # (ct_index, edge_index, op_position, op)
    for c, (ct, pe) in enumerate(zip(net.space.cell_types, net.retained)):
        for k in range(len(ct.edges)):
            if len(pe[k]) >= 2:
                for p, op in enumerate(pe[k]):
                    candidates.append((c, k, p, op))
    if not candidates:
        raise ValidationError("supernet is already a single path; nothing to prune")
    scores = scorer.many(
        supernet_to_graphs(net.without(c, k, op)) for c, k, _, op in candidates
    )
    deltas = [base - s for s in scores]

    removed = []
    record_deltas = []
    new_net = net
    by_edge: dict[tuple[int, int], list[int]] = {}
    for idx, (c, k, _, _) in enumerate(candidates):
        by_edge.setdefault((c, k), []).append(idx)
    for (c, k), idxs in sorted(by_edge.items()):
        # ops appear in the retained order, which preserves the declared
        # operator order, so the first minimum is the lowest operator index
        local = np.asarray([deltas[i] for i in idxs])
        pick = idxs[int(np.argmin(local))]
        op = candidates[pick][3]
        new_net = new_net.without(c, k, op)
        removed.append({
            "cell_type": net.space.cell_types[c].name,
            "edge": list(net.space.cell_types[c].edges[k]),
            "op": op,
        })
        record_deltas.extend(
            {
                "cell_type": net.space.cell_types[c].name,
                "edge": list(net.space.cell_types[c].edges[k]),
                "op": candidates[i][3],
                "delta": deltas[i],
            }
            for i in idxs
        )
    record = {"base_score": base, "deltas": record_deltas, "removed": removed}
    return new_net, record


def prune_step(net: Supernet, model, table=None, threads: int = 1):
    """One leave-one-out pruning pass.

    Scores the full supernet once, then each single-op removal on every edge
    that still retains >= 2 operators; removes the argmin-importance op per
    such edge (ties to the lowest operator index).  Singleton edges are
    untouched: removing their op would disconnect the edge, so they carry no
    leave-one-out candidates.  Returns (pruned net, step record); the record
    holds the scores behind every decision.
    """
    scorer = _Scorer(model, table, threads)
    new_net, record = _prune_one_step(net, scorer)
    record["inferences"] = scorer.count
    return new_net, record


@dataclass(frozen=True)
class PruneResult:
    cells: tuple[EdgeOpCell, ...]
    score: float
    inferences: int
    trace: tuple[dict, ...] = field(repr=False)


def prune_search(space: SearchSpace, model, table=None, threads: int = 1) -> PruneResult:
    """Prune the full supernet down to a single-path cell per cell type.

    inferences counts the evaluations of the pruning procedure itself (the
    quantity behind the linear |O|*E cost claim); the single extra pass that
    scores the final architecture for reporting is kept out of that count.
    """
    net = Supernet.full(space)
    scorer = _Scorer(model, table, threads)
    trace = []
    while not net.is_single_path():
        net, record = _prune_one_step(net, scorer)
        trace.append(record)
    inferences = scorer.count
    final_score = scorer.one(supernet_to_graphs(net))
    return PruneResult(tuple(net.to_cells()), final_score, inferences, tuple(trace))


@dataclass(frozen=True)
class EvoConfig:
    population: int = 50
    generations: int = 100
    mutation: float = 0.5
    crossover: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.population < 4:
            raise ValidationError("population must be >= 4 (mutation draws 3 others)")
        if self.generations < 1:
            raise ValidationError("generations must be >= 1")
        if not (0.0 < self.mutation < 2.0):
            raise ValidationError("mutation factor must lie in (0, 2)")
        if not (0.0 <= self.crossover <= 1.0):
            raise ValidationError("crossover rate must lie in [0, 1]")


def op_index(value: float, num_ops: int) -> int:
    """Map a gene in [0, 1] to an operator index over equal-width bins."""
    if not (0.0 <= value <= 1.0):
        raise ValidationError(f"gene {value} outside [0, 1]")
    return min(int(value * num_ops), num_ops - 1)


def discretize(x, cell_type: CellType) -> EdgeOpCell:
    """Decode one cell type's gene segment into a concrete cell."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (len(cell_type.edges),):
        raise ValidationError(
            f"expected {len(cell_type.edges)} genes for {cell_type.name!r}, got {x.shape}"
        )
    ops = cell_type.ops
    return EdgeOpCell(
        cell_type.num_nodes,
        {e: ops[op_index(float(v), len(ops))] for e, v in zip(cell_type.edges, x)},
    )


def decode_genes(space: SearchSpace, x) -> list[EdgeOpCell]:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (space.num_genes,):
        raise ValidationError(f"expected {space.num_genes} genes, got {x.shape}")
    cells = []
    offset = 0
    for ct in space.cell_types:
        cells.append(discretize(x[offset:offset + len(ct.edges)], ct))
        offset += len(ct.edges)
    return cells


@dataclass(frozen=True)
class EvoResult:
    cells: tuple[EdgeOpCell, ...]
    score: float
    inferences: int
    history: tuple[float, ...]


def evo_search(space: SearchSpace, model, table=None, cfg: EvoConfig = EvoConfig(),
               threads: int = 1) -> EvoResult:
    """rand/1/bin differential evolution over continuous operator genes.

    Mutation v = x_r1 + F (x_r2 - x_r3) with r1, r2, r3 distinct and not i,
    clamped to [0, 1]; binomial crossover with one guaranteed gene from v;
    a child replaces its parent iff its fitness is >= the parent's, so ties
    move to the child and the per-generation best never decreases.  All
    random draws happen before each generation's evaluations, which keeps
    results identical for any thread count and bit-reproducible per seed.
    """
    scorer = _Scorer(model, table, threads)
    rng = np.random.default_rng(cfg.seed)
    d = space.num_genes
    np_ = cfg.population
    pop = rng.random((np_, d))
    fitness = np.asarray(scorer.many(cells_to_graphs(space, decode_genes(space, x)) for x in pop))
    history = [float(fitness.max())]
    for _ in range(cfg.generations):
        trials = np.empty_like(pop)
        for i in range(np_):
            others = rng.choice(np_ - 1, size=3, replace=False)
            r1, r2, r3 = [o if o < i else o + 1 for o in others]
            v = np.clip(pop[r1] + cfg.mutation * (pop[r2] - pop[r3]), 0.0, 1.0)
            j_rand = int(rng.integers(d))
            mask = rng.random(d) < cfg.crossover
            mask[j_rand] = True
            trials[i] = np.where(mask, v, pop[i])
        trial_fitness = np.asarray(
            scorer.many(cells_to_graphs(space, decode_genes(space, x)) for x in trials)
        )
        wins = trial_fitness >= fitness
        pop[wins] = trials[wins]
        fitness[wins] = trial_fitness[wins]
        history.append(float(fitness.max()))
    best = int(np.argmax(fitness))
    return EvoResult(
        tuple(decode_genes(space, pop[best])),
        float(fitness[best]),
        scorer.count,
        tuple(history),
    )


def cells_payload(space: SearchSpace, cells) -> dict:
    payload = {}
    for ct, cell in zip(space.cell_types, cells):
        complete = all((i, j) in cell.edge_ops for j in range(1, ct.num_nodes) for i in range(j))
        payload[ct.name] = (
            format_arch_string(cell)
            if complete
            else {str(e): op for e, op in cell.edge_ops.items()}
        )
    return payload


def hybrid_search(space: SearchSpace, model, table=None, cfg: EvoConfig = EvoConfig(),
                  threads: int = 1, mode: str = "hybrid"):
    """Run pruning and evolution, return (cells, report) for the better one.

    The report's best_score equals max(prune score, evo score) exactly; on a
    tie the pruning candidate is reported.  mode narrows the run to one arm
    ("prune" / "evo").
    """
    import time

    if mode not in ("hybrid", "prune", "evo"):
        raise ValidationError(f"unknown search mode {mode!r}")
    t0 = time.monotonic()
    report: dict = {"seed": cfg.seed, "mode": mode}
    prune = evo = None
    if mode in ("hybrid", "prune"):
        prune = prune_search(space, model, table, threads)
        report["prune"] = {
            "arch": cells_payload(space, prune.cells),
            "score": prune.score,
            "inferences": prune.inferences,
            "trace": list(prune.trace),
        }
    if mode in ("hybrid", "evo"):
        evo = evo_search(space, model, table, cfg, threads)
        report["evo"] = {
            "arch": cells_payload(space, evo.cells),
            "score": evo.score,
            "inferences": evo.inferences,
            "history": list(evo.history),
        }
    if prune is not None and (evo is None or prune.score >= evo.score):
        best, best_score = prune.cells, prune.score
    else:
        best, best_score = evo.cells, evo.score
    report["best_arch"] = cells_payload(space, best)
    report["best_score"] = best_score
    report["elapsed_ms"] = (time.monotonic() - t0) * 1000.0
    return list(best), report


def nb201_space(macro: MacroConfig | None = None) -> SearchSpace:
    """The standard 4-feature-node complete-DAG cell with 5 operators."""
    from .proxies import nb201_macro

    return SearchSpace(
        (
            CellType(
                name="cell",
                num_nodes=4,
                edges=((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)),
                ops=("none", "skip_connect", "nor_conv_1x1", "nor_conv_3x3", "avg_pool_3x3"),
            ),
        ),
        macro=macro or nb201_macro(),
    )


def toy_space(ops: tuple[str, ...] = ("op_a", "op_b", "op_c")) -> SearchSpace:
    """3-feature-node complete DAG with 3 operators: 27 enumerable cells."""
    return SearchSpace(
        (CellType(name="cell", num_nodes=3, edges=((0, 1), (0, 2), (1, 2)), ops=tuple(ops)),)
    )


def enumerate_cells(cell_type: CellType):
    """Every concrete cell of one cell type, in lexicographic gene order."""
    import itertools

    for combo in itertools.product(cell_type.ops, repeat=len(cell_type.edges)):
        yield EdgeOpCell(cell_type.num_nodes, dict(zip(cell_type.edges, combo)))


def load_space(path) -> SearchSpace:
    """Space descriptor JSON: {"cell_types": [{name, num_nodes, edges, ops,
    num_inputs?}], "macro": {...}?}; "nb201" and "toy27" are builtin names."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read space descriptor {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"space descriptor {path} is not valid JSON: {exc}") from exc
    try:
        cell_types = tuple(
            CellType(
                name=ct["name"],
                num_nodes=int(ct["num_nodes"]),
                edges=tuple((int(i), int(j)) for i, j in ct["edges"]),
                ops=tuple(ct["ops"]),
                num_inputs=int(ct.get("num_inputs", 1)),
            )
            for ct in obj["cell_types"]
        )
        macro = MacroConfig(**{k: tuple(v) if isinstance(v, list) else v
                               for k, v in obj["macro"].items()}) if obj.get("macro") else None
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"bad space descriptor {path}: {exc}") from exc
    return SearchSpace(cell_types, macro=macro)


def resolve_space(name_or_path: str) -> SearchSpace:
    if name_or_path == "nb201":
        return nb201_space()
    if name_or_path == "toy27":
        return toy_space()
    return load_space(name_or_path)

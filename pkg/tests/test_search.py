"""Pruning, differential evolution, and the hybrid search driver."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellnas.cellgraph import EdgeOpCell
from cellnas.errors import ValidationError
from cellnas.search import (
    CellType,
    EvoConfig,
    SearchSpace,
    Supernet,
    cells_payload,
    cells_to_graphs,
    decode_genes,
    discretize,
    enumerate_cells,
    evo_search,
    hybrid_search,
    load_space,
    nb201_space,
    op_index,
    prune_search,
    prune_step,
    resolve_space,
    supernet_to_graphs,
    toy_space,
)

from helpers import toy_truth


def count_ops(graphs):
    """Oracle on expanded graphs: per-op-name node counts."""
    counts = {}
    for g in graphs:
        for op in g.node_ops:
            if op != "output" and not op.startswith("input"):
                counts[op] = counts.get(op, 0) + 1
    return counts


def toy_oracle(graphs) -> float:
    counts = count_ops(graphs)
    na, nb = counts.get("op_a", 0), counts.get("op_b", 0)
    nc = counts.get("op_c", 0)
    return 0.1 + 0.25 * na + 0.12 * nb + 0.03 * nc + 0.08 * na * nb


# -------------------------------------------------------------- structures

def test_cell_type_validation():
    with pytest.raises(ValidationError):
        CellType("x", 3, (), ("a",))
    with pytest.raises(ValidationError):
        CellType("x", 3, ((0, 1),), ())
    with pytest.raises(ValidationError):
        CellType("x", 3, ((0, 1), (0, 1)), ("a",))
    with pytest.raises(ValidationError):
        CellType("x", 3, ((1, 0),), ("a",))
    with pytest.raises(ValidationError):
        CellType("x", 3, ((0, 1),), ("a", "a"))


def test_search_space_validation():
    ct = CellType("cell", 3, ((0, 1),), ("a",))
    with pytest.raises(ValidationError):
        SearchSpace(())
    with pytest.raises(ValidationError):
        SearchSpace((ct, ct))
    assert SearchSpace((ct,)).num_genes == 1


def test_builtin_spaces():
    nb = nb201_space()
    assert nb.num_genes == 6
    assert len(nb.cell_types[0].ops) == 5
    assert nb.macro is not None

    toy = toy_space()
    assert toy.num_genes == 3
    cells = list(enumerate_cells(toy.cell_types[0]))
    assert len(cells) == 27
    # gene-lexicographic: first all op_a, last all op_c
    assert set(cells[0].edge_ops.values()) == {"op_a"}
    assert set(cells[-1].edge_ops.values()) == {"op_c"}
    assert len(set(tuple(sorted(c.edge_ops.items())) for c in cells)) == 27


def test_supernet_lifecycle():
    space = toy_space()
    net = Supernet.full(space)
    assert net.total_ops() == 9
    assert not net.is_single_path()
    with pytest.raises(ValidationError, match="parallel"):
        net.to_cells()

    smaller = net.without(0, 0, "op_a")
    assert smaller.total_ops() == 8
    assert net.total_ops() == 9  # original untouched

    single = net
    for edge_index in range(3):
        single = single.without(0, edge_index, "op_a").without(0, edge_index, "op_b")
    assert single.is_single_path()
    (cell,) = single.to_cells()
    assert set(cell.edge_ops.values()) == {"op_c"}

    with pytest.raises(ValidationError, match="no operator"):
        single.without(0, 0, "op_c")


def test_supernet_graphs_have_parallel_nodes():
    space = toy_space()
    graphs = supernet_to_graphs(Supernet.full(space))
    assert len(graphs) == 1
    assert count_ops(graphs) == {"op_a": 3, "op_b": 3, "op_c": 3}


# ------------------------------------------------------------ discretization

def test_op_index_bins():
    assert op_index(0.0, 3) == 0
    assert op_index(0.34, 3) == 1
    assert op_index(0.99, 3) == 2
    assert op_index(1.0, 3) == 2  # the closed right edge folds into the last bin
    with pytest.raises(ValidationError):
        op_index(-0.01, 3)
    with pytest.raises(ValidationError):
        op_index(1.01, 3)


def test_discretize_and_decode():
    space = toy_space()
    ct = space.cell_types[0]
    cell = discretize([0.1, 0.5, 0.9], ct)
    assert list(cell.edge_ops.values()) == ["op_a", "op_b", "op_c"]
    with pytest.raises(ValidationError):
        discretize([0.1, 0.5], ct)

    cells = decode_genes(space, [0.0, 0.0, 0.999])
    assert list(cells[0].edge_ops.values()) == ["op_a", "op_a", "op_c"]
    with pytest.raises(ValidationError):
        decode_genes(space, [0.1])


# ------------------------------------------------------------------ pruning

def test_prune_step_counts_and_picks_argmin():
    space = toy_space()
    net = Supernet.full(space)
    new_net, record = prune_step(net, toy_oracle)
    # 1 base pass + 9 leave-one-out passes
    assert record["inferences"] == 10
    assert len(record["deltas"]) == 9
    assert len(record["removed"]) == 3
    # op_a dominates the oracle, so removing it hurts most: delta for op_a
    # is the largest on every edge and op_c (smallest contribution) goes
    for r in record["removed"]:
        assert r["op"] == "op_c"
    assert new_net.total_ops() == 6


def test_prune_step_skips_singleton_edges():
    space = toy_space()
    retained = ((("op_a", "op_b"), ("op_c",), ("op_a", "op_c")),)
    net = Supernet(space, retained)
    _, record = prune_step(net, toy_oracle)
    # singleton edge (0, 2) contributes no leave-one-out candidates
    assert record["inferences"] == 1 + 4
    touched = {tuple(r["edge"]) for r in record["removed"]}
    assert touched == {(0, 1), (1, 2)}


def test_prune_step_on_single_path_errors():
    space = toy_space()
    retained = ((("op_a",), ("op_c",), ("op_a",)),)
    with pytest.raises(ValidationError, match="single path"):
        prune_step(Supernet(space, retained), toy_oracle)


def test_prune_search_toy_count_and_result():
    result = prune_search(toy_space(), toy_oracle)
    # steps: (1 + 9) + (1 + 6) = 17; the final reporting pass is excluded
    assert result.inferences == 17
    assert len(result.trace) == 2
    (cell,) = result.cells
    # greedy pruning drops op_b everywhere (its marginal contribution in the
    # supernet is below op_a's) and lands on all-op_a at 0.85, a local
    # optimum: the interaction term makes 2 op_a + 1 op_b (0.88) the true best
    assert set(cell.edge_ops.values()) == {"op_a"}
    assert result.score == pytest.approx(0.85)


def test_prune_search_tie_goes_to_lowest_op_index():
    # constant oracle: every delta is 0.0, so each step drops the first
    # retained op on every multi-op edge and all-op_c survives
    result = prune_search(toy_space(), lambda graphs: 1.0)
    (cell,) = result.cells
    assert set(cell.edge_ops.values()) == {"op_c"}


def test_prune_search_nb201_count():
    # E=6 edges, 5 ops: sum over k=5..2 of (1 + 6k) = 88
    result = prune_search(nb201_space(), lambda graphs: float(len(graphs[0].node_ops)))
    assert result.inferences == 88
    assert len(result.trace) == 4


# ---------------------------------------------------------------- evolution

def test_evo_config_validation():
    with pytest.raises(ValidationError):
        EvoConfig(population=3)
    with pytest.raises(ValidationError):
        EvoConfig(generations=0)
    with pytest.raises(ValidationError):
        EvoConfig(mutation=0.0)
    with pytest.raises(ValidationError):
        EvoConfig(mutation=2.0)
    with pytest.raises(ValidationError):
        EvoConfig(crossover=1.5)


def test_evo_search_finds_toy_optimum():
    cfg = EvoConfig(population=20, generations=30, seed=0)
    result = evo_search(toy_space(), toy_oracle, cfg=cfg)
    (cell,) = result.cells
    # global optimum: two op_a plus one op_b (interaction term), score 0.88
    assert sorted(cell.edge_ops.values()) == ["op_a", "op_a", "op_b"]
    assert result.score == pytest.approx(0.88)
    assert result.score == pytest.approx(toy_oracle(
        cells_to_graphs(toy_space(), [cell])
    ))


def test_evo_search_bookkeeping():
    cfg = EvoConfig(population=4, generations=2, seed=1)
    result = evo_search(toy_space(), toy_oracle, cfg=cfg)
    # one full-population evaluation up front plus one per generation
    assert result.inferences == 4 * (1 + 2)
    assert len(result.history) == 3
    # elitist selection: the best never degrades
    assert all(b >= a for a, b in zip(result.history, result.history[1:]))
    assert result.history[-1] == result.score


def test_evo_search_deterministic_and_thread_independent():
    cfg = EvoConfig(population=8, generations=5, seed=7)
    r1 = evo_search(toy_space(), toy_oracle, cfg=cfg)
    r2 = evo_search(toy_space(), toy_oracle, cfg=cfg)
    r4 = evo_search(toy_space(), toy_oracle, cfg=cfg, threads=4)
    assert r1 == r2 == r4

    r_other = evo_search(toy_space(), toy_oracle, cfg=EvoConfig(
        population=8, generations=5, seed=8
    ))
    assert r_other.history != r1.history or r_other.cells != r1.cells


def test_scorer_rejects_non_callable():
    with pytest.raises(ValidationError, match="callable"):
        evo_search(toy_space(), "not a model")


# ------------------------------------------------------------------- hybrid

def deceptive_oracle(graphs) -> float:
    """Greedy trap: op_b counts a little, but a pure op_a cell wins big.

    Removing any single op_a from the supernet costs nothing (the bonus
    needs every op to be op_a, which no leave-one-out step can reach), so
    greedy pruning discards op_a first and walks to all-op_b at 3.0.  The
    global optimum is the all-op_a cell at 100.0.
    """
    counts = count_ops(graphs)
    total = sum(counts.values())
    bonus = 100.0 if counts.get("op_a", 0) == total else 0.0
    return counts.get("op_b", 0) + bonus


def test_hybrid_beats_prune_on_deceptive_oracle():
    prune_only = prune_search(toy_space(), deceptive_oracle)
    (cell,) = prune_only.cells
    assert set(cell.edge_ops.values()) == {"op_b"}
    assert prune_only.score == 3.0

    cells, report = hybrid_search(
        toy_space(), deceptive_oracle, cfg=EvoConfig(population=20, generations=30, seed=0)
    )
    assert report["best_score"] == 100.0
    assert report["best_score"] == max(report["prune"]["score"], report["evo"]["score"])
    (cell,) = cells
    assert set(cell.edge_ops.values()) == {"op_a"}


def test_hybrid_modes_and_tie_break():
    cfg = EvoConfig(population=8, generations=4, seed=0)
    _, full = hybrid_search(toy_space(), toy_oracle, cfg=cfg)
    assert full["mode"] == "hybrid"
    assert "prune" in full and "evo" in full
    assert full["best_score"] == max(full["prune"]["score"], full["evo"]["score"])

    _, prune_rep = hybrid_search(toy_space(), toy_oracle, cfg=cfg, mode="prune")
    assert "evo" not in prune_rep
    assert prune_rep["best_score"] == prune_rep["prune"]["score"]

    _, evo_rep = hybrid_search(toy_space(), toy_oracle, cfg=cfg, mode="evo")
    assert "prune" not in evo_rep

    # under a constant oracle both arms tie and the report takes prune's arch
    _, tied = hybrid_search(toy_space(), lambda graphs: 1.0, cfg=cfg)
    assert tied["prune"]["score"] == tied["evo"]["score"] == 1.0
    assert tied["best_arch"] == tied["prune"]["arch"]

    with pytest.raises(ValidationError, match="mode"):
        hybrid_search(toy_space(), toy_oracle, mode="annealing")


def test_report_payload_shape():
    cfg = EvoConfig(population=6, generations=2, seed=0)
    _, report = hybrid_search(toy_space(), toy_oracle, cfg=cfg)
    assert report["seed"] == 0
    assert isinstance(report["elapsed_ms"], float)
    arch = report["best_arch"]["cell"]
    # complete-DAG cells are reported as arch strings
    assert isinstance(arch, str) and arch.count("+") == 1
    json.dumps(report)  # the report must be JSON-serializable as-is


def test_cells_payload_partial_cell():
    space = SearchSpace((CellType("cell", 3, ((0, 1), (1, 2)), ("a", "b")),))
    payload = cells_payload(space, [EdgeOpCell(3, {(0, 1): "a", (1, 2): "b"})])
    # (0, 2) is not part of this cell type: fall back to the edge map form
    assert payload == {"cell": {"(0, 1)": "a", "(1, 2)": "b"}}


@settings(max_examples=15, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_hybrid_score_is_max_of_arms(seed):
    rng_local = np.random.default_rng(seed)
    weights = {
        "op_a": float(rng_local.random()),
        "op_b": float(rng_local.random()),
        "op_c": float(rng_local.random()),
    }

    def oracle(graphs):
        counts = count_ops(graphs)
        return sum(weights[op] * n for op, n in counts.items())

    cfg = EvoConfig(population=6, generations=3, seed=seed)
    _, report = hybrid_search(toy_space(), oracle, cfg=cfg)
    assert report["best_score"] == max(
        report["prune"]["score"], report["evo"]["score"]
    )


# -------------------------------------------------------------- descriptors

def test_load_space_round_trip(tmp_path):
    desc = {
        "cell_types": [
            {"name": "normal", "num_nodes": 3,
             "edges": [[0, 1], [0, 2], [1, 2]], "ops": ["a", "b"]},
            {"name": "reduce", "num_nodes": 2,
             "edges": [[0, 1]], "ops": ["a", "c"], "num_inputs": 1},
        ],
        "macro": {"stage_widths": [8, 16], "cells_per_stage": [2, 2],
                  "stem_channels": 8},
    }
    path = tmp_path / "space.json"
    path.write_text(json.dumps(desc), encoding="utf-8")
    space = load_space(path)
    assert [ct.name for ct in space.cell_types] == ["normal", "reduce"]
    assert space.num_genes == 4
    assert space.macro.stage_widths == (8, 16)

    assert resolve_space("nb201").num_genes == 6
    assert resolve_space("toy27").num_genes == 3
    assert resolve_space(str(path)).num_genes == 4


def test_load_space_errors(tmp_path):
    missing = tmp_path / "missing.json"
    with pytest.raises(ValidationError, match="cannot read"):
        load_space(missing)

    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2", encoding="utf-8")
    with pytest.raises(ValidationError, match="not valid JSON"):
        load_space(bad)

    incomplete = tmp_path / "incomplete.json"
    incomplete.write_text('{"cell_types": [{"name": "x"}]}', encoding="utf-8")
    with pytest.raises(ValidationError, match="bad space descriptor"):
        load_space(incomplete)


def test_multi_cell_type_search():
    space = SearchSpace((
        CellType("normal", 3, ((0, 1), (0, 2), (1, 2)), ("op_a", "op_b")),
        CellType("reduce", 2, ((0, 1),), ("op_a", "op_c")),
    ))
    assert space.num_genes == 4
    result = prune_search(space, toy_oracle)
    assert len(result.cells) == 2
    # greedy pruning keeps op_a everywhere: 4 op_a scores 1.10
    for cell in result.cells:
        assert set(cell.edge_ops.values()) == {"op_a"}
    assert result.score == pytest.approx(1.10)

    # evolution can exploit the interaction: 3 op_a + 1 op_b scores 1.21
    cfg = EvoConfig(population=10, generations=15, seed=0)
    evo = evo_search(space, toy_oracle, cfg=cfg)
    assert len(evo.cells) == 2
    assert evo.score == pytest.approx(1.21)
    assert evo.score > result.score

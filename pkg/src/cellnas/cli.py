"""Command-line entry point.

Commands: ingest, train, predict, search, correlate, flops, params,
embed-info.  Every file-producing run writes a resolved-config copy beside
its outputs, and every seeded command is bit-reproducible: rerunning with
the same inputs and seed yields byte-identical reports, including the
rendered figures.  Volatile timings go to run_meta.json, never into report
files.

Exit codes: 0 success, 2 validation failure, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import figures, gcn, proxies, search
from .cellgraph import edge_to_node_transform, parse_arch_string
from .embeddings import build_fallback_table, load_table, save_table, table_fingerprint
from .errors import NumericError, ValidationError


def _write_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _out_dir(args) -> Path:
    out = Path(args.out or f"runs/{args.command}")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_resolved_config(args, out: Path) -> None:
    resolved = {k: v for k, v in vars(args).items() if k != "func"}
    resolved["out"] = str(out)
    _write_json(resolved, out / "resolved_config.json")


def _space_vocabulary(space: search.SearchSpace) -> set[str]:
    vocab: set[str] = set()
    for ct in space.cell_types:
        vocab.update(ct.ops)
    return vocab


def _reserved_names(num_inputs_values) -> set[str]:
    names = {"output"}
    for n in num_inputs_values:
        names.update(["input"] if n == 1 else [f"input{k}" for k in range(n)])
    return names


def _resolve_table(args, op_names):
    """Load --table, or synthesize a hash-fallback table over op_names."""
    if args.table and args.fallback_dim:
        raise ValidationError("--table and --fallback-dim are mutually exclusive")
    if args.table:
        return load_table(args.table)
    if args.fallback_dim:
        table = build_fallback_table(sorted(set(op_names)), args.fallback_dim)
        if getattr(args, "save_table", None):
            save_table(table, args.save_table)
        return table
    raise ValidationError("supply --table FILE or --fallback-dim N")


def _warn_fingerprint(model, table) -> None:
    note = gcn.check_table_match(model, table)
    if note:
        print(f"warning: {note}", file=sys.stderr)


def cmd_ingest(args) -> int:
    out = _out_dir(args)
    vocab = None
    if args.space:
        vocab = _space_vocabulary(search.resolve_space(args.space))
    data = ds.read_jsonl(args.dataset, vocab)
    ds.write_jsonl(data, out / "dataset.jsonl")
    summary = ds.summarize(data)
    _write_json(summary, out / "summary.json")
    _write_resolved_config(args, out)
    print(json.dumps(summary, indent=1, sort_keys=True))
    return 0


def _split_dataset(items, split: float, seed: int):
    if not (0.0 < split <= 1.0):
        raise ValidationError(f"--split must lie in (0, 1], got {split}")
    order = np.random.default_rng(seed).permutation(len(items))
    n_train = math.ceil(split * len(items))
    train = [items[i] for i in order[:n_train]]
    held = [items[i] for i in order[n_train:]]
    return train, held


def _combined_labels(items):
    """Min-max scale accuracy columns and average them, per the label rule.

    Columns come from each item's aux["accuracies"] map when present on all
    items (keys must agree), otherwise from the plain label field.
    """
    keymaps = [it.aux.get("accuracies") for it in items]
    if all(isinstance(k, dict) and k for k in keymaps):
        keys = sorted(keymaps[0])
        if any(sorted(k) != keys for k in keymaps):
            raise ValidationError("aux.accuracies keys differ across items")
        columns = np.array([[float(k[c]) for c in keys] for k in keymaps])
    else:
        columns = np.array([[float(it.label)] for it in items])
    return gcn.normalize_labels(columns)


def cmd_train(args) -> int:
    out = _out_dir(args)
    data = ds.read_jsonl(args.dataset).labeled()
    if len(data) < 2:
        raise ValidationError("training needs at least 2 labeled architectures")
    items = list(data)
    if args.normalize_labels:
        labels = _combined_labels(items)
        items = [ds.ArchItem(it.id, it.graphs, float(y), it.aux)
                 for it, y in zip(items, labels)]
    table = _resolve_table(args, data.op_names())
    train_items, held_items = _split_dataset(items, args.split, args.seed)
    cfg = gcn.TrainConfig(
        learning_rate=args.lr,
        weight_decay=args.weight_decay,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
    )
    model, history = gcn.train(train_items, table, cfg, dim_h=args.dim_h)
    gcn.save_model(model, out / "model.json")
    with open(out / "history.csv", "w", encoding="utf-8") as fh:
        fh.write("epoch,loss\n")
        for i, v in enumerate(history, start=1):
            fh.write(f"{i},{v!r}\n")
    figures.save_loss_figure(history, out / "loss_history.png")

    metrics = {
        "train_count": len(train_items),
        "held_out_count": len(held_items),
        "final_loss": history[-1],
        "table_fingerprint": table_fingerprint(table),
    }
    if len(held_items) >= 2:
        preds = gcn.predict_scores(model, (it.graphs for it in held_items), table,
                                   threads=args.threads)
        truth = np.array([it.label for it in held_items])
        try:
            metrics["kendall_tau"] = proxies.kendall_tau(preds, truth)
            metrics["spearman_rho"] = proxies.spearman_rho(preds, truth)
        except NumericError as exc:
            metrics["rank_metrics_note"] = str(exc)
    _write_json(metrics, out / "metrics.json")
    _write_resolved_config(args, out)
    print(json.dumps(metrics, indent=1, sort_keys=True))
    return 0


def cmd_predict(args) -> int:
    out = _out_dir(args)
    model = gcn.load_model(args.model)
    if args.dataset:
        data = ds.read_jsonl(args.dataset)
        ids = [it.id for it in data]
        graph_lists = [it.graphs for it in data]
        op_names = data.op_names()
    elif args.arch:
        ids = list(args.arch)
        graph_lists = [[edge_to_node_transform(parse_arch_string(s))] for s in args.arch]
        op_names = sorted({op for gl in graph_lists for g in gl for op in g.node_ops})
    else:
        raise ValidationError("supply --dataset FILE or --arch STRING")
    table = _resolve_table(args, op_names)
    _warn_fingerprint(model, table)
    scores = gcn.predict_scores(model, graph_lists, table, threads=args.threads)
    with open(out / "predictions.csv", "w", encoding="utf-8") as fh:
        fh.write("arch_id,score\n")
        for arch_id, score in zip(ids, scores):
            fh.write(f"{arch_id},{float(score)!r}\n")
    _write_resolved_config(args, out)
    print(f"wrote {len(ids)} predictions to {out / 'predictions.csv'}")
    return 0


def cmd_search(args) -> int:
    out = _out_dir(args)
    space = search.resolve_space(args.space)
    model = gcn.load_model(args.model)
    num_inputs = (ct.num_inputs for ct in space.cell_types)
    table = _resolve_table(args, _space_vocabulary(space) | _reserved_names(num_inputs))
    _warn_fingerprint(model, table)
    if args.prune_only and args.evo_only:
        raise ValidationError("--prune-only and --evo-only are mutually exclusive")
    mode = "prune" if args.prune_only else "evo" if args.evo_only else "hybrid"
    cfg = search.EvoConfig(
        population=args.population,
        generations=args.generations,
        mutation=args.mutation,
        crossover=args.crossover,
        seed=args.seed,
    )
    _, report = search.hybrid_search(space, model, table, cfg,
                                     threads=args.threads, mode=mode)

    # timing is real but volatile; it goes to run_meta.json so report.json
    # stays byte-identical across reruns of the same seed
    elapsed_ms = report.pop("elapsed_ms")
    prune_scores = []
    if "prune" in report:
        trace = report["prune"].pop("trace")
        _write_json(trace, out / "prune_trace.json")
        report["prune"]["trace_path"] = "prune_trace.json"
        prune_scores = [step["base_score"] for step in trace]
    evo_history = report.get("evo", {}).get("history", [])
    _write_json(report, out / "report.json")
    total_inferences = sum(report[k]["inferences"] for k in ("prune", "evo") if k in report)
    _write_json({"elapsed_ms": elapsed_ms, "total_inferences": total_inferences},
                out / "run_meta.json")
    figures.save_search_figure(evo_history, prune_scores, out / "search_history.png")
    _write_resolved_config(args, out)
    print(json.dumps({"best_arch": report["best_arch"],
                      "best_score": report["best_score"],
                      "inferences": total_inferences}, indent=1, sort_keys=True))
    return 0


def _arch_id(space: search.SearchSpace, cells) -> str:
    """Arch-string id for single-cell-type spaces, JSON payload otherwise."""
    payload = search.cells_payload(space, cells)
    if len(payload) == 1:
        (value,) = payload.values()
        if isinstance(value, str):
            return value
    return json.dumps(payload, sort_keys=True)


def _sample_cells(space: search.SearchSpace, n: int, seed: int):
    """Sample distinct architectures uniformly; returns (cells_per_arch, ids)."""
    sizes = [len(ct.ops) ** len(ct.edges) for ct in space.cell_types]
    total = math.prod(sizes)
    n = min(n, total)
    rng = np.random.default_rng(seed)
    if total <= 2 ** 22:
        picks = rng.choice(total, size=n, replace=False)
    else:
        picks = np.unique(rng.integers(0, total, size=4 * n))[:n]
    archs = []
    for index in sorted(int(p) for p in picks):
        cells = []
        for ct, size in zip(space.cell_types, sizes):
            sub = index % size
            index //= size
            ops = []
            for _ in ct.edges:
                ops.append(ct.ops[sub % len(ct.ops)])
                sub //= len(ct.ops)
            cells.append(search.EdgeOpCell(ct.num_nodes, dict(zip(ct.edges, ops))))
        archs.append(cells)
    return archs, [_arch_id(space, cells) for cells in archs]


def cmd_correlate(args) -> int:
    out = _out_dir(args)
    space = search.resolve_space(args.space)
    if space.macro is None:
        raise ValidationError("space has no macro config; complexity counters need one")
    model = gcn.load_model(args.model)
    num_inputs = (ct.num_inputs for ct in space.cell_types)
    table = _resolve_table(args, _space_vocabulary(space) | _reserved_names(num_inputs))
    _warn_fingerprint(model, table)

    archs, ids = _sample_cells(space, args.sample, args.seed)

    # narrow the sample to ids covered by every external source first, so
    # all columns are built over one final index set
    labels_by_id = ext_by_id = ext_cols = None
    if args.dataset:
        labels_by_id = {it.id: it.label for it in ds.read_jsonl(args.dataset).labeled()}
    if args.scores:
        ext_ids, ext_cols = proxies.read_scores_csv(args.scores)
        ext_by_id = {arch_id: k for k, arch_id in enumerate(ext_ids)}
    kept = [
        i for i, arch_id in enumerate(ids)
        if (labels_by_id is None or arch_id in labels_by_id)
        and (ext_by_id is None or arch_id in ext_by_id)
    ]
    if len(kept) < 2:
        raise ValidationError(
            "fewer than 2 sampled architectures are covered by the supplied "
            "dataset/scores (their ids must be arch strings)"
        )
    archs = [archs[i] for i in kept]
    ids = [ids[i] for i in kept]

    graph_lists = [search.cells_to_graphs(space, cells) for cells in archs]
    scores = gcn.predict_scores(model, graph_lists, table, threads=args.threads)
    columns: dict[str, np.ndarray] = {
        "surrogate": scores,
        "params": np.array([float(sum(proxies.count_params(c, space.macro) for c in cells))
                            for cells in archs]),
        "flops": np.array([float(sum(proxies.count_flops(c, space.macro) for c in cells))
                           for cells in archs]),
    }
    truth_name = None
    if labels_by_id is not None:
        truth_name = "ground_truth"
        columns["ground_truth"] = np.array([labels_by_id[i] for i in ids])
    if ext_by_id is not None:
        for name, col in ext_cols.items():
            columns[name] = np.array([col[ext_by_id[i]] for i in ids])

    frame = proxies.ProxyScoreFrame(
        ids=tuple(ids), columns=columns, ground_truth=truth_name,
    )
    matrix, labels = proxies.correlation_matrix(frame)
    proxies.write_matrix_csv(matrix, labels, out / "matrix.csv")
    figures.save_matrix_figure(matrix, labels, out / "corr_matrix.png")
    summary = {
        "sample_requested": args.sample,
        "sample_used": len(frame.ids),
        "seed": args.seed,
        "columns": labels,
        "flops_convention": "1 MAC = 1 FLOP; conv and classifier counted, "
                            "norm/activation/global-pool not; in-cell pooling "
                            "counted as k^2 adds per output element",
    }
    if truth_name:
        summary["vs_ground_truth"] = proxies.summary_vs_ground_truth(frame)
    _write_json(summary, out / "summary.json")
    _write_resolved_config(args, out)
    print(json.dumps(summary, indent=1, sort_keys=True))
    return 0


def _arch_cells(args, space: search.SearchSpace):
    vocab = _space_vocabulary(space)
    cells = [parse_arch_string(s, vocab) for s in args.arch]
    if len(cells) != len(space.cell_types):
        raise ValidationError(
            f"space has {len(space.cell_types)} cell types; got {len(cells)} --arch strings"
        )
    return cells


def cmd_flops(args) -> int:
    space = search.resolve_space(args.space)
    if space.macro is None:
        raise ValidationError("space has no macro config")
    cells = _arch_cells(args, space)
    breakdown = [proxies.count_breakdown(c, space.macro) for c in cells]
    result = {
        "arch": list(args.arch),
        "flops": sum(b["flops"] for b in breakdown),
        "breakdown": breakdown,
        "convention": "1 MAC = 1 FLOP; conv and classifier counted, "
                      "norm/activation/global-pool not; in-cell pooling counted "
                      "as k^2 adds per output element",
    }
    print(json.dumps(result, indent=1, sort_keys=True))
    if args.out:
        out = _out_dir(args)
        _write_json(result, out / "flops.json")
        _write_resolved_config(args, out)
    return 0


def cmd_params(args) -> int:
    space = search.resolve_space(args.space)
    if space.macro is None:
        raise ValidationError("space has no macro config")
    cells = _arch_cells(args, space)
    result = {
        "arch": list(args.arch),
        "params": sum(proxies.count_params(c, space.macro) for c in cells),
    }
    print(json.dumps(result, indent=1, sort_keys=True))
    if args.out:
        out = _out_dir(args)
        _write_json(result, out / "params.json")
        _write_resolved_config(args, out)
    return 0


def cmd_embed_info(args) -> int:
    if args.table:
        table = load_table(args.table)
    elif args.fallback_dim and args.ops:
        names = sorted(set(n.strip() for n in args.ops.split(",") if n.strip())
                       | {"input", "output"})
        table = build_fallback_table(names, args.fallback_dim)
        if args.save_table:
            save_table(table, args.save_table)
    else:
        raise ValidationError("supply --table FILE, or --fallback-dim N with --ops names")
    info = {
        "dim": table.dim,
        "count": len(table.names),
        "names": list(table.names),
        "meta": table.meta,
        "fingerprint": table_fingerprint(table),
    }
    print(json.dumps(info, indent=1, sort_keys=True))
    return 0


def build_parser():
    """Returns (parser, {command name: subparser})."""
    parser = argparse.ArgumentParser(
        prog="cellnas",
        description="Cell-based architecture search with a graph-convolution "
                    "surrogate over operator embeddings",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of defaults for this command")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output directory (default runs/<command>)")
    common.add_argument("--threads", type=int, default=1)

    table_args = argparse.ArgumentParser(add_help=False)
    table_args.add_argument("--table", help="embedding table JSON file")
    table_args.add_argument("--fallback-dim", type=int,
                            help="use the deterministic hash embedder at this dim")
    table_args.add_argument("--save-table", help="write the fallback table here")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common],
                       help="validate a JSONL dataset into the canonical store")
    p.add_argument("dataset")
    p.add_argument("--space", help="space name (nb201, toy27) or descriptor JSON")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", parents=[common, table_args],
                       help="train the surrogate on a labeled dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", type=float, default=0.8,
                   help="training fraction; the rest is held out for rank metrics")
    p.add_argument("--dim-h", type=int, default=32)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--lr", type=float, default=0.02)
    p.add_argument("--weight-decay", type=float, default=1e-5)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--normalize-labels", action="store_true",
                   help="min-max scale label columns to [0,1] and average them")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common, table_args],
                       help="score architectures with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset")
    p.add_argument("--arch", action="append", help="arch string (repeatable)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("search", parents=[common, table_args],
                       help="run the pruning + evolution hybrid search")
    p.add_argument("--space", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--population", type=int, default=50)
    p.add_argument("--generations", type=int, default=100)
    p.add_argument("--mutation", type=float, default=0.5)
    p.add_argument("--crossover", type=float, default=0.9)
    p.add_argument("--prune-only", action="store_true")
    p.add_argument("--evo-only", action="store_true")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("correlate", parents=[common, table_args],
                       help="rank-correlation analysis over sampled architectures")
    p.add_argument("--space", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--sample", type=int, default=1000)
    p.add_argument("--dataset", help="labeled dataset keyed by arch string (ground truth)")
    p.add_argument("--scores", help="external proxy scores CSV (arch_id,<proxy>,...)")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("flops", parents=[common],
                       help="analytic FLOPs for an architecture")
    p.add_argument("--space", default="nb201")
    p.add_argument("--arch", action="append", required=True)
    p.set_defaults(func=cmd_flops)

    p = sub.add_parser("params", parents=[common],
                       help="analytic parameter count for an architecture")
    p.add_argument("--space", default="nb201")
    p.add_argument("--arch", action="append", required=True)
    p.set_defaults(func=cmd_params)

    p = sub.add_parser("embed-info", parents=[common],
                       help="inspect an embedding table or build a fallback one")
    p.add_argument("--table")
    p.add_argument("--fallback-dim", type=int)
    p.add_argument("--ops", help="comma-separated operator names for the fallback")
    p.add_argument("--save-table")
    p.set_defaults(func=cmd_embed_info)
    return parser, dict(sub.choices)


def _apply_config_file(subparsers: dict, argv):
    """Pre-scan for --config and install its values as parser defaults.

    Explicit command-line flags still win: defaults only fill in what the
    invocation leaves unset.
    """
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        with open(known.config, "r", encoding="utf-8") as fh:
            overrides = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config {known.config}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {known.config} is not valid JSON: {exc}") from exc
    if not isinstance(overrides, dict):
        raise ValidationError(f"config {known.config} must hold a JSON object")
    for sp in subparsers.values():
        sp.set_defaults(**{k.replace("-", "_"): v for k, v in overrides.items()})


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subparsers = build_parser()
    try:
        _apply_config_file(subparsers, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

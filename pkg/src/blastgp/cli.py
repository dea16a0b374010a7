"""Command-line surface: ingest, synth, evolve, validate, bench, export.

Every randomised command takes an explicit --seed; given the same flags and
seed the outputs are byte-identical (bench timing aside).  Diagnostics go to
stderr, results to stdout, exit status 0 only on success.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import evolution, seqdata, stats, synth
from .interpreter import prepare_reads, throughput_bench
from .primitives import Role
from .sampling import ConfigError, TaskKind, TaskSpec
from .sexpr import load_model, save_model, to_sexpr
from .trees import Individual, Tree, build_constant_table


def _err(msg: str) -> None:
    print(f"blastgp: {msg}", file=sys.stderr)


def cmd_ingest(args) -> int:
    cfg = seqdata.QualityConfig(offset=args.qual_offset, tile_extent=args.tile_extent)
    try:
        records, stats_ = seqdata.read_fastq(args.fastq, cfg)
    except OSError as exc:
        _err(f"cannot read FASTQ: {exc}")
        return 1
    restrict = [s for s in args.restrict.split(",") if s] if args.restrict else []
    hit_stats = seqdata.HitParseStats()
    try:
        with open(args.hits, "r", encoding="utf-8") as fh:
            hits = seqdata.parse_hits(fh, restrict, stats=hit_stats)
    except OSError as exc:
        _err(f"cannot read hit table: {exc}")
        return 1
    labels = []
    for r in records:
        key = r.id.split()[0]
        labels.append(seqdata.build_label(hits.get(key, seqdata.EMPTY_HITS)))
    manifest = {
        "source_fastq": str(args.fastq),
        "source_hits": str(args.hits),
        "restrict": ",".join(restrict),
        "qual_offset": str(args.qual_offset),
        "tile_extent": repr(args.tile_extent),
        "records": str(len(records)),
        "skipped": str(stats_.total_skipped()),
        "hit_rows": str(hit_stats.rows),
        "hit_rows_skipped": str(hit_stats.skipped_rows),
        "hits_filtered_subject": str(hit_stats.filtered_subject),
    }
    seqdata.save_dataset(records, labels, args.out, manifest)
    print(f"records kept       {len(records)}")
    print(f"records skipped    {stats_.total_skipped()} "
          f"(length {stats_.skipped_length}, alphabet {stats_.skipped_alphabet}, "
          f"malformed {stats_.skipped_malformed})")
    print(f"coordinate warnings {stats_.coord_warnings}")
    print(f"hit rows           {hit_stats.rows} (skipped {hit_stats.skipped_rows}, "
          f"filtered {hit_stats.filtered_subject})")
    print(f"no-match reads     {sum(1 for l in labels if l.best_len == 0)}")
    print(f"dataset written    {args.out}")
    return 0


def cmd_synth(args) -> int:
    spec = synth.OracleSpec(
        name=args.oracle, noise_sd=args.noise, qual_dist=args.qual_dist,
        n_rate=args.n_rate, sentinel_frac=args.sentinel_frac,
        positive_frac=args.positive_frac,
    )
    rng = np.random.default_rng(args.seed)
    records, labels, manifest = synth.generate_synthetic(args.n, spec, rng)
    manifest["seed"] = str(args.seed)
    seqdata.save_dataset(records, labels, args.out, manifest)
    print(f"records            {len(records)}")
    print(f"oracle             {spec.name} ({manifest['mapping']})")
    print(f"dataset written    {args.out}")
    return 0


def cmd_evolve(args) -> int:
    cfg = evolution.RunConfig()
    if args.config:
        cfg = evolution.load_config(args.config, cfg)
    cfg.task = args.task
    cfg.seed = args.seed
    if args.population is not None:
        cfg.population_size = args.population
    if args.generations is not None:
        cfg.generations = args.generations
    if args.workers is not None:
        cfg.workers = args.workers
    if args.early_stop is not None:
        cfg.early_stop_fitness = args.early_stop
    dataset = seqdata.load_dataset(args.data)
    reads = prepare_reads(dataset.matrix)

    def log(rec):
        print(f"gen {rec.generation:4d}  sample {rec.sample_fitness:.6g}  "
              f"train {rec.train_fitness:.6g}  nodes {rec.best_total}", file=sys.stderr)

    result = evolution.run_evolution(cfg, reads, dataset.labels, log=log)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "history.tsv").write_text(result.history_tsv(), encoding="utf-8")
    (out / "samples.tsv").write_text(result.samples_tsv(), encoding="utf-8")
    if result.best_gen10 is not None:
        save_model(out / "model_gen10.txt", result.best_gen10, result.table)
    save_model(out / "model_final.txt", result.best_final, result.table)
    last = result.history[-1]
    print(f"generations run    {len(result.history)}")
    print(f"final train fitness {last.train_fitness!r}")
    print(f"outputs written    {out}")
    return 0


def cmd_validate(args) -> int:
    model = load_model(args.model)
    dataset = seqdata.load_dataset(args.data)
    task = TaskSpec.for_kind(args.task)
    reads = prepare_reads(dataset.matrix)
    report = stats.validate(model.individual, reads, dataset.labels, task, model.table)
    print(report.to_text())
    rows = [stats.TSV_HEADER, report.to_tsv_row("all")]
    breakdown = stats.scan_breakdown(model.individual, reads, dataset.labels, task,
                                     model.table, dataset.matrix.ids)
    if breakdown:
        print("\nper-scan breakdown:")
        for name, rep in breakdown:
            extra = (f"r={rep.r:.4f}" if rep.r is not None
                     else f"acc={rep.accuracy:.4f}" if rep.accuracy is not None
                     else "degenerate")
            print(f"  {name:24s} n={rep.n:6d}  {extra}")
            rows.append(rep.to_tsv_row(name))
    if args.out:
        path = Path(args.out)
        path.mkdir(parents=True, exist_ok=True)
        (path / "report.tsv").write_text("\n".join(rows) + "\n", encoding="utf-8")
        print(f"\nreport written     {path / 'report.tsv'}")
    return 0


def _random_sized_tree(role, target, rng, table):
    """Random tree close to ``target`` nodes: keep opening functions while
    the remaining budget allows, then close with terminals."""
    from .primitives import DEFAULT_CATALOG, Op, arity
    terminals = DEFAULT_CATALOG.terminals[role]
    functions = DEFAULT_CATALOG.functions
    code, cidx = [], []
    need = 1
    while need > 0:
        open_room = target - len(code) - need
        if open_room > 3:  # keep opening functions until the budget is spent
            op = int(functions[rng.integers(0, len(functions))])
            ci = -1
        else:
            op = int(terminals[rng.integers(0, len(terminals))])
            ci = int(rng.integers(0, len(table))) if op == Op.CONST else -1
        code.append(op)
        cidx.append(ci)
        need += arity(op) - 1
    tree = Tree(np.array(code, dtype=np.int16), np.array(cidx, dtype=np.int32), role)
    tree.validate(table)
    return tree


def _random_team(total_nodes: int, seed: int, table):
    rng = np.random.default_rng(seed)
    per_tree = max(1, total_nodes // 3)
    return Individual(*(_random_sized_tree(role, per_tree, rng, table)
                        for role in (Role.PREPASS0, Role.PREPASS1, Role.RESULT)))


def cmd_bench(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.model:
        model = load_model(args.model)
        ind, table = model.individual, model.table
    else:
        table = build_constant_table(rng)
        ind = _random_team(args.random_size, args.seed + 1, table)
    spec = synth.OracleSpec("e_value")
    records, _, _ = synth.generate_synthetic(args.records, spec, rng)
    report = throughput_bench(ind, records, table, repeats=args.repeats)
    print(f"team nodes         {ind.total_nodes} {ind.tree_sizes()}")
    print(report.to_text())
    print()
    print(report.to_tsv(), end="")
    return 0


def cmd_export(args) -> int:
    model = load_model(args.model)
    sizes = model.individual.tree_sizes()
    lines = [
        f"# team: {model.individual.total_nodes} nodes "
        f"(prepas0 {sizes[0]}, prepas1 {sizes[1]}, expect {sizes[2]})",
        "prepas0:",
        to_sexpr(model.individual.prepass0, model.table),
        "prepas1:",
        to_sexpr(model.individual.prepass1, model.table),
        "expect:",
        to_sexpr(model.individual.result, model.table),
    ]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"exported           {args.out}")
    else:
        print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="blastgp",
                                description="Evolve and run three-tree predictors of "
                                            "alignment outcomes for 36-base reads")
    sub = p.add_subparsers(dest="command", required=True)
    tasks = [k.value for k in TaskKind]

    sp = sub.add_parser("ingest", help="build a dataset from FASTQ + hit table")
    sp.add_argument("--fastq", required=True)
    sp.add_argument("--hits", required=True)
    sp.add_argument("--restrict", default="",
                    help="comma-separated subject allowlist (empty accepts all)")
    sp.add_argument("--out", required=True)
    sp.add_argument("--qual-offset", type=int, choices=(33, 64), default=33)
    sp.add_argument("--tile-extent", type=float, default=2048.0)
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("synth", help="generate an oracle-labelled synthetic dataset")
    sp.add_argument("--oracle", required=True, choices=synth.ORACLES)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--noise", type=float, default=0.0,
                    help="gaussian noise as a fraction of the oracle score sd")
    sp.add_argument("--qual-dist", default="auto",
                    choices=("auto", "uniform", "mixed", "high"))
    sp.add_argument("--n-rate", type=float, default=0.01)
    sp.add_argument("--sentinel-frac", type=float, default=synth.DEFAULT_SENTINEL_FRAC)
    sp.add_argument("--positive-frac", type=float, default=synth.DEFAULT_REPEAT_FRAC)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("evolve", help="run the evolutionary loop on a dataset")
    sp.add_argument("--task", required=True, choices=tasks)
    sp.add_argument("--data", required=True)
    sp.add_argument("--config", default=None)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--population", type=int, default=None)
    sp.add_argument("--generations", type=int, default=None)
    sp.add_argument("--workers", type=int, default=None)
    sp.add_argument("--early-stop", type=float, default=None)
    sp.set_defaults(func=cmd_evolve)

    sp = sub.add_parser("validate", help="score a saved model on a dataset")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--task", required=True, choices=tasks)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("bench", help="measure interpreter throughput")
    group = sp.add_mutually_exclusive_group(required=True)
    group.add_argument("--model", default=None)
    group.add_argument("--random-size", type=int, default=None)
    sp.add_argument("--records", type=int, default=10000)
    sp.add_argument("--repeats", type=int, default=3)
    sp.add_argument("--seed", type=int, required=True)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("export", help="print a saved model as plain expressions")
    sp.add_argument("--model", required=True)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        _err(str(exc))
        return 1
    except OSError as exc:
        _err(str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())

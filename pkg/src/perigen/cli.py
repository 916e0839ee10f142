"""Command-line pipeline: data generation, training, sampling, evaluation.

Every subcommand is deterministic given its flags and input files, and
writes a JSON run manifest next to its outputs recording the resolved
configuration.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import datagen, evaluate, model, pgraph
from .train import NonFiniteLossError, TrainConfig, train as run_training


def _write_manifest(out: Path, is_dir: bool, subcommand: str, resolved: dict) -> None:
    manifest = {
        "subcommand": subcommand,
        "tool_version": __version__,
        "resolved": resolved,
    }
    path = out / "manifest.json" if is_dir else Path(str(out) + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, default=str) + "\n", encoding="utf-8")


def _cmd_gen_data(args) -> int:
    kinds = [k.strip() for k in args.units.split(",") if k.strip()]
    manifest = datagen.DatasetManifest(
        counts={k: args.count_per_unit for k in kinds},
        m_max=args.m_max,
        n_max=args.n_max,
        global_pattern=args.pattern,
        seed=args.seed,
    )
    records = datagen.generate_dataset(manifest)
    out = Path(args.out)
    datagen.save_dataset(records, out)
    _write_manifest(
        out, False, "gen-data",
        {
            "units": kinds, "count_per_unit": args.count_per_unit,
            "m_max": args.m_max, "n_max": args.n_max, "pattern": args.pattern,
            "seed": args.seed, "out": str(out), "records": len(records),
        },
    )
    print(f"wrote {len(records)} records to {out}")
    return 0


def _load_train_config(args) -> TrainConfig:
    data = {}
    if args.config:
        data = json.loads(Path(args.config).read_text(encoding="utf-8"))
    overrides = {
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "learning_rate": args.lr,
        "seed": args.seed,
    }
    for key, val in overrides.items():
        if val is not None:
            data[key] = val
    return TrainConfig.from_dict(data)


def _cmd_train(args) -> int:
    config = _load_train_config(args)
    records = datagen.load_dataset(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_manifest(
        out, True, "train",
        {"data": args.data, "config": config.to_dict(), "out": str(out)},
    )
    run_training(config, records, out_dir=out)
    print(f"trained {config.epochs} epochs; checkpoints and log in {out}")
    return 0


def _cmd_sample(args) -> int:
    cfg, params, _ = model.load_params(args.ckpt)
    rng = np.random.default_rng(args.seed)
    records = []
    for _ in range(args.count):
        g = model.sample_graph(params, cfg, mode=args.mode, rng=rng)
        records.append(
            datagen.DatasetRecord(
                unit_kind=None, decomposition=g.decomposition, adjacency=g.adjacency
            )
        )
    out = Path(args.out)
    datagen.save_dataset(records, out)
    _write_manifest(
        out, False, "sample",
        {"ckpt": args.ckpt, "count": args.count, "mode": args.mode,
         "seed": args.seed, "out": str(out)},
    )
    print(f"wrote {len(records)} samples to {out}")
    return 0


def _cmd_eval(args) -> int:
    gen = [r.graph() for r in datagen.load_dataset(args.gen)]
    ref = [r.graph() for r in datagen.load_dataset(args.ref)]
    train_set = [r.graph() for r in datagen.load_dataset(args.train_set)]
    report = evaluate.evaluate_sets(gen, ref, train_set)
    out = Path(args.out)
    evaluate.write_report(report, out)
    _write_manifest(
        out, False, "eval",
        {"ref": args.ref, "gen": args.gen, "train_set": args.train_set, "out": str(out)},
    )
    print(report.to_json())
    return 0


def _cmd_traverse(args) -> int:
    cfg, params, _ = model.load_params(args.ckpt)
    values = [float(v) for v in args.values.split(",") if v.strip()]
    base = model.LatentPair(np.zeros(cfg.local_dim), np.zeros(cfg.global_dim))
    graphs, steps = evaluate.latent_traversal(params, cfg, base, args.latent, args.dim, values)
    records = [
        datagen.DatasetRecord(unit_kind=None, decomposition=g.decomposition, adjacency=g.adjacency)
        for g in graphs
    ]
    out = Path(args.out)
    datagen.save_dataset(records, out)
    stats_path = Path(str(out) + ".stats.csv")
    with stats_path.open("w", encoding="utf-8") as fh:
        fh.write("value,n,m,clustering,density\n")
        for s in steps:
            fh.write(f"{s.value:.6g},{s.n},{s.m},{s.clustering:.6g},{s.density:.6g}\n")
    _write_manifest(
        out, False, "traverse",
        {"ckpt": args.ckpt, "latent": args.latent, "dim": args.dim,
         "values": values, "out": str(out), "stats": str(stats_path)},
    )
    print(f"wrote {len(records)} traversal steps to {out}")
    return 0


def _cmd_decompose(args) -> int:
    records = datagen.load_dataset(args.infile)
    out_records = []
    for rec in records:
        g = rec.graph()
        d = pgraph.decompose(g, args.n)
        out_records.append(
            datagen.DatasetRecord(
                unit_kind=rec.unit_kind, decomposition=d,
                adjacency=rec.adjacency, seed=rec.seed,
            )
        )
    out = Path(args.out)
    datagen.save_dataset(out_records, out)
    _write_manifest(out, False, "decompose", {"in": args.infile, "n": args.n, "out": str(out)})
    print(f"decomposed {len(out_records)} records into {out}")
    return 0


def _cmd_assemble(args) -> int:
    records = datagen.load_dataset(args.infile)
    out_records = []
    for i, rec in enumerate(records, start=1):
        if rec.decomposition is None:
            raise ValueError(f"record {i} has no decomposition to assemble")
        g = pgraph.assemble(rec.decomposition)
        size = args.pad if args.pad else g.num_nodes
        out_records.append(
            datagen.DatasetRecord(
                unit_kind=rec.unit_kind, decomposition=rec.decomposition,
                adjacency=pgraph.pad_adjacency(g.stripped, size), seed=rec.seed,
            )
        )
    out = Path(args.out)
    datagen.save_dataset(out_records, out)
    _write_manifest(out, False, "assemble", {"in": args.infile, "out": str(out), "pad": args.pad})
    print(f"assembled {len(out_records)} records into {out}")
    return 0


def _cmd_bfs_stability(args) -> int:
    graphs = [r.graph() for r in datagen.load_dataset(args.data)]
    report = evaluate.bfs_stability(graphs, permutations=args.perms, seed=args.seed)
    print("scheme,spearman,kendall")
    print(f"bfs,{report.spearman_bfs:.4f},{report.kendall_bfs:.4f}")
    print(f"random,{report.spearman_rand:.4f},{report.kendall_rand:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="perigen", description="Periodic-graph generative model pipeline"
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("gen-data", help="generate a labeled synthetic dataset")
    p.add_argument("--units", default="triangle,grid,hexagon")
    p.add_argument("--count-per-unit", type=int, default=100)
    p.add_argument("--m-max", type=int, default=datagen.DEFAULT_M_MAX)
    p.add_argument("--n-max", type=int, default=datagen.DEFAULT_N_MAX)
    p.add_argument("--pattern", choices=datagen.GLOBAL_PATTERNS, default="chain")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train", help="train the model on a dataset file")
    p.add_argument("--data", required=True)
    p.add_argument("--config", default=None, help="JSON config; flags override")
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("sample", help="draw graphs from a trained checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--mode", choices=("threshold", "bernoulli"), default="bernoulli")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("eval", help="score a generated set against references")
    p.add_argument("--ref", required=True)
    p.add_argument("--gen", required=True)
    p.add_argument("--train-set", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("traverse", help="sweep one latent coordinate")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--latent", choices=("local", "global"), required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--values", required=True, help="comma-separated floats")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_traverse)

    p = sub.add_parser("decompose", help="recover unit/layout/bonds from adjacencies")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_decompose)

    p = sub.add_parser("assemble", help="expand decompositions into adjacencies")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--pad", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_assemble)

    p = sub.add_parser("bfs-stability", help="rank-correlation stability experiment")
    p.add_argument("--data", required=True)
    p.add_argument("--perms", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_bfs_stability)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError, NonFiniteLossError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

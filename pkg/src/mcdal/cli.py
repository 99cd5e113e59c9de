"""Command-line interface.

Subcommands:
  run       execute a multi-stage experiment from a flat key=value config
  gen-data  write a synthetic dataset to CSV
  score     dump per-sample acquisition scores for a checkpointed model

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

import argparse
import sys
from dataclasses import replace

import numpy as np

from . import __version__, backend
from .acquisition import AcquisitionScore, labeled_mean_discrepancy, mcdal_scores, save_scores_csv
from .data import Pool, load_csv, save_csv
from .experiment import (
    ConfigError,
    ExperimentConfig,
    build_dataset,
    DataConfig,
    load_config,
    run_experiment,
    summarize,
    summary_path,
)
from .losses import parse_distance
from .model import load_checkpoint


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; the CLI contract wants 1."""

    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser():
    parser = _Parser(prog="mcdal", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mcdal {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an active-learning experiment")
    run.add_argument("--config", help="flat key=value config file (see README)")
    run.add_argument("--out", help="metrics output path (overrides config)")
    run.add_argument("--format", choices=["csv", "json"], help="metrics format")
    run.add_argument("--seeds", help='comma list, e.g. "1,2,3"')
    run.add_argument(
        "--strategy",
        help='"all" or comma list of arm tokens: mcdal|random|entropy|margin, '
        "with optional modifiers like mcdal+l2+pair",
    )
    run.add_argument("--distance", choices=["l1", "l2", "kl"], help="default distance")

    gen = sub.add_parser("gen-data", help="write a synthetic dataset to CSV")
    gen.add_argument("--kind", choices=["moons", "rings", "blobs"], default="moons")
    gen.add_argument("--n", type=int, default=2000, help="total sample count")
    gen.add_argument("--classes", type=int, default=4, help="blob class count")
    gen.add_argument("--noise", type=float, default=0.25, help="moons/rings noise")
    gen.add_argument("--spread", type=float, default=1.0, help="blob cluster stddev")
    gen.add_argument("--seed", type=int, default=7)
    gen.add_argument("--out", required=True)

    score = sub.add_parser("score", help="score an unlabeled pool with a checkpointed model")
    score.add_argument("--checkpoint", required=True, help="model checkpoint (JSON)")
    score.add_argument("--data", required=True, help="dataset CSV")
    score.add_argument("--label-column", default="label")
    score.add_argument(
        "--labeled", required=True, help="file with one labeled dataset index per line"
    )
    score.add_argument("--distance", choices=["l1", "l2", "kl"], default="l1")
    score.add_argument("--terms", choices=["all", "aux"], default="all")
    score.add_argument("--raw", action="store_true", help="score by D(x) without centering")
    score.add_argument("--standardize", action="store_true")
    score.add_argument("--out", required=True)
    return parser


def _apply_run_overrides(cfg, args):
    if args.out:
        cfg = replace(cfg, out=args.out)
    if args.format:
        cfg = replace(cfg, format=args.format)
    if args.seeds:
        try:
            seeds = tuple(int(s) for s in args.seeds.split(",") if s.strip())
        except ValueError:
            raise ConfigError(f"--seeds: expected comma-separated ints, got {args.seeds!r}")
        cfg = replace(cfg, seeds=seeds)
    if args.distance:
        cfg = replace(cfg, distance=parse_distance(args.distance))
    if args.strategy:
        if args.strategy == "all":
            tokens = ("mcdal", "random", "entropy", "margin")
        else:
            tokens = tuple(t.strip() for t in args.strategy.split(",") if t.strip())
        cfg = replace(cfg, strategies=tokens)
    return cfg


def _cmd_run(args):
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    cfg = _apply_run_overrides(cfg, args)
    records = run_experiment(cfg)
    print(f"backend: {backend.BACKEND_NAME}")
    print(f"wrote {len(records)} records to {cfg.out} (summary: {summary_path(cfg.out)})")
    final_stage = max(r.stage for r in records)
    for row in summarize(records):
        if row["stage"] == final_stage:
            print(
                f"  {row['strategy']:<24} final accuracy "
                f"{row['mean_test_accuracy']:.4f} +- {row['std_test_accuracy']:.4f}"
            )
    return 0


def _cmd_gen_data(args):
    cfg = DataConfig(
        kind=args.kind,
        n=args.n,
        classes=args.classes,
        noise=args.noise,
        spread=args.spread,
        seed=args.seed,
    )
    dataset = build_dataset(cfg)
    save_csv(dataset, args.out)
    print(f"wrote {dataset.n} samples ({dataset.num_classes} classes) to {args.out}")
    return 0


def _read_index_file(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read index file {path}: {exc}") from exc
    try:
        return np.array(
            [int(tok) for tok in text.replace(",", "\n").split()], dtype=np.int64
        )
    except ValueError:
        raise ConfigError(f"{path}: expected integer indices") from None


def _cmd_score(args):
    model = load_checkpoint(args.checkpoint)
    dataset = load_csv(args.data, args.label_column, standardize=args.standardize)
    labeled = _read_index_file(args.labeled)
    unlabeled = np.setdiff1d(np.arange(dataset.n), labeled)
    pool = Pool(dataset, labeled, unlabeled)
    kind = parse_distance(args.distance)
    mean = labeled_mean_discrepancy(model, pool.labeled_features(), kind, args.terms)
    scores = mcdal_scores(
        model, pool.unlabeled_features(), mean, kind, args.terms, raw_score=args.raw
    )
    # report dataset-level indices, not positions within the unlabeled view
    scores = [
        AcquisitionScore(int(pool.unlabeled_indices[s.sample_index]), s.d_total, s.score)
        for s in scores
    ]
    save_scores_csv(scores, args.out)
    print(f"scored {len(scores)} unlabeled samples (labeled mean D = {mean:.6f}) -> {args.out}")
    return 0


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors (code 1), --help/--version (code 0)
        return int(exc.code or 0)
    handlers = {"run": _cmd_run, "gen-data": _cmd_gen_data, "score": _cmd_score}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"mcdal: config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"mcdal: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

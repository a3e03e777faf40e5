"""Command line entry point: ``digishield <command> [options]``.

Exit codes: 0 success, 1 runtime failure, 2 usage error. The cache directory
defaults to ``$DIGISHIELD_CACHE`` when set, else ``cache/`` next to the manifest.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from pathlib import Path

from .avpreproc import MfccConfig, PreprocessConfig, preprocess_manifest
from .avpreproc.cache import CACHE_ENV, default_cache_dir
from .manifest import ManifestError, Split, load_manifest, make_splits, write_manifest
from .metrics import format_report, plot_roc
from .model import ABLATIONS, FULL
from .synthdata import ToySpec, gen_toy_dataset
from .trainer import (
    CheckpointError,
    TrainConfig,
    TrainingDiverged,
    format_ablation_table,
    load_checkpoint,
    load_config,
    run_ablation_suite,
    save_config,
    summarize_ablation,
    train,
    evaluate,
)

log = logging.getLogger("digishield")

COMMANDS = ("gen-toy", "preprocess", "split", "train", "eval", "ablate", "report")


class CommandError(RuntimeError):
    pass


def _listed(values: list[str], kind, n: int | None = None, flag: str = "") -> list:
    """Values given space- or comma-separated: ``--seeds 0 1 2`` or ``--seeds 0,1,2``."""
    out = [kind(v) for chunk in values for v in str(chunk).split(",") if v.strip()]
    if n is not None and len(out) != n:
        raise CommandError(f"{flag} needs {n} values, got {len(out)}")
    return out


def _refuse(path: Path, force: bool) -> None:
    if path.exists() and not force:
        raise FileExistsError(f"{path} already exists (use --force to overwrite)")


def _cache_dir(args, manifest: Path) -> Path:
    if getattr(args, "cache", None):
        return Path(args.cache)
    return default_cache_dir(manifest.parent / "cache")


def _train_config(args, out_dir: Path) -> TrainConfig:
    """Config file (if any) overlaid with command-line flags; unset flags keep the file's values."""
    cfg = load_config(args.config) if args.config else TrainConfig()
    overrides = {
        "manifest": args.manifest,
        "out_dir": str(out_dir),
        "preset": args.preset,
        "ablation": getattr(args, "ablation", None),
        "lr": args.lr,
        "weight_decay": args.weight_decay,
        "batch_size": args.batch_size,
        "epochs": args.epochs,
        "patience": args.patience,
        "seed": getattr(args, "seed", None),
        "margin": args.margin,
        "augment": False if args.no_augment else None,
    }
    cfg = dataclasses.replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
    if not cfg.manifest:
        raise CommandError("no manifest given (--manifest or 'manifest' in --config)")
    # precedence: --cache, then $DIGISHIELD_CACHE, then the config file, then <manifest dir>/cache
    if args.cache or os.environ.get(CACHE_ENV) or not cfg.cache_dir:
        cfg = dataclasses.replace(cfg, cache_dir=str(_cache_dir(args, Path(cfg.manifest))))
    return cfg


def cmd_gen_toy(args) -> int:
    out = Path(args.out)
    _refuse(out / "manifest.jsonl", args.force)
    spec = ToySpec(
        n_clips=args.n,
        frames=args.frames,
        side=args.side,
        desync_frames=args.desync,
        n_identities=args.identities,
        seed=args.seed,
    )
    manifest = gen_toy_dataset(spec, out, force=args.force, cache=not args.no_cache, jobs=args.jobs)
    print(f"manifest\t{manifest}")
    if not args.no_cache:
        print(f"cache\t{out / 'cache'}")
    return 0


def cmd_preprocess(args) -> int:
    manifest = Path(args.manifest)
    out = Path(args.out) if args.out else _cache_dir(args, manifest)
    cfg = PreprocessConfig(
        frames=args.frames,
        side=args.side,
        margin=args.margin,
        segment=args.segment,
        mfcc=MfccConfig(width=args.audio_width),
    )
    paths = preprocess_manifest(manifest, out, cfg, jobs=args.jobs, force=args.force)
    print(f"cached\t{len(paths)}\t{out}")
    return 0


def cmd_split(args) -> int:
    out = Path(args.out)
    _refuse(out, args.force)
    records = load_manifest(args.manifest)
    ratios = tuple(_listed(args.ratios, float, 3, "--ratios"))
    records, plan = make_splits(records, ratios, seed=args.seed)
    write_manifest(records, out)
    for split in (Split.TRAIN, Split.VAL, Split.TEST):
        n = sum(r.split is split for r in records)
        print(f"{split.value}\t{n} clips\t{len(plan.identities(split))} identities")
    print(f"manifest\t{out}")
    return 0


def cmd_train(args) -> int:
    out = Path(args.out)
    _refuse(out / "best.ckpt", args.force)
    cfg = _train_config(args, out)
    result = train(cfg)
    save_config(cfg, out / "config.ini")
    for row in result.history:
        print(f"epoch {row['epoch']}\tloss {row['train_loss']:.4f}\tval_auc {row['val_auc']:.4f}")
    print(f"best_epoch\t{result.best_epoch}")
    print(f"val_auc\t{result.best_val_auc:.6f}")
    print(f"checkpoint\t{result.checkpoint_path}")
    return 0


def _scored(args):
    model, ckpt = load_checkpoint(args.ckpt)
    manifest = Path(args.manifest or ckpt["train_config"]["manifest"])
    records = load_manifest(manifest)
    cache_dir = Path(args.cache) if args.cache else default_cache_dir(
        ckpt["train_config"]["cache_dir"] or manifest.parent / "cache"
    )
    return evaluate(model, records, cache_dir, args.split)


def cmd_eval(args) -> int:
    if args.roc:
        _refuse(Path(args.roc), args.force)
    scored, value = _scored(args)
    print(f"split\t{args.split}")
    print(f"n\t{len(scored.labels)}")
    print(f"auc\t{value:.6f}")
    if args.roc:
        print(f"roc\t{plot_roc(scored, args.roc)}")
    return 0


def cmd_report(args) -> int:
    if args.out:
        _refuse(Path(args.out), args.force)
    scored, _ = _scored(args)
    text = format_report(scored, args.threshold)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    return 0


def cmd_ablate(args) -> int:
    out = Path(args.out)
    table_path = out / "ablation.csv"
    _refuse(table_path, args.force)
    base = _train_config(args, out)
    rows = run_ablation_suite(base, _listed(args.seeds, int))
    table = format_ablation_table(rows)
    out.mkdir(parents=True, exist_ok=True)
    table_path.write_text(table + "\n", encoding="utf-8")
    print(table)
    for ablation, value in summarize_ablation(rows).items():
        print(f"mean_test_auc[{ablation}]\t{value:.6f}")
    print(f"table\t{table_path}")
    return 0


def _add_train_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value training config file")
    p.add_argument("--manifest", help="split manifest (JSONL)")
    p.add_argument("--cache", help=f"cache directory (default: ${CACHE_ENV} or <manifest dir>/cache)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--preset", choices=("toy", "full"))
    p.add_argument("--lr", type=float)
    p.add_argument("--weight-decay", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--patience", type=int, help="early-stopping patience in epochs (0 disables)")
    p.add_argument("--margin", type=float, help="contrastive margin")
    p.add_argument("--no-augment", action="store_true", help="disable video augmentation")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")


def _add_eval_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ckpt", required=True, help="checkpoint written by 'train'")
    p.add_argument("--manifest", help="split manifest (default: the one used for training)")
    p.add_argument("--cache", help=f"cache directory (default: ${CACHE_ENV} or the training cache)")
    p.add_argument("--split", choices=[s.value for s in Split], default=Split.TEST.value)
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="digishield",
        description="Audio-visual deepfake detector: data preparation, training, evaluation and ablations.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(COMMANDS) + "}")
    sub.required = True

    p = sub.add_parser("gen-toy", help="generate the synthetic audio-video corpus (media, manifest, cache)")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=200, help="number of clips (even)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--side", type=int, default=32)
    p.add_argument("--desync", type=int, default=ToySpec.desync_frames, help="frames the fake video runs ahead")
    p.add_argument("--identities", type=int, default=10)
    p.add_argument("--no-cache", action="store_true", help="write media and manifest only")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_gen_toy)

    p = sub.add_parser("preprocess", help="decode, crop and cache every clip of a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", help=f"cache directory (default: ${CACHE_ENV} or <manifest dir>/cache)")
    p.add_argument("--frames", type=int, default=30)
    p.add_argument("--side", type=int, default=224)
    p.add_argument("--margin", type=float, default=1.5)
    p.add_argument("--audio-width", type=int, default=96, help="time frames of the MFCC image")
    p.add_argument("--segment", action="store_true", help="split long clips into 3-5 s windows")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("split", help="identity-disjoint train/val/test assignment")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output manifest path")
    p.add_argument("--ratios", nargs="+", default=["0.8", "0.1", "0.1"], help="train/val/test, e.g. 0.8 0.1 0.1 or 0.8,0.1,0.1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train one model and keep the best checkpoint by val AUC")
    _add_train_options(p)
    p.add_argument("--ablation", choices=ABLATIONS, help=f"model variant (default {FULL})")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="AUC of a checkpoint on one split")
    _add_eval_options(p)
    p.add_argument("--roc", help="write a ROC plot (PNG) to this path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train all three variants for each seed and tabulate AUCs")
    _add_train_options(p)
    p.add_argument("--seeds", nargs="+", default=["0", "1", "2"], help="e.g. 0 1 2 or 0,1,2")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("report", help="AUC and per-category error rates of a checkpoint")
    _add_eval_options(p)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", help="also write the report to this file")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: 0 for --help, 2 for usage errors
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (
        CommandError,
        CheckpointError,
        FileExistsError,
        FileNotFoundError,
        ManifestError,
        TrainingDiverged,
        ValueError,
        OSError,
    ) as exc:
        print(f"digishield {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Training, evaluation, checkpointing and the ablation suite."""

from __future__ import annotations

import configparser
import copy
import csv
import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch

from .avpreproc import cache
from .avpreproc.frames import AugmentParams, FrameStack, augment
from .encoders import EncoderConfig, preset
from .losses import DEFAULT_MARGIN, contrastive_loss, cross_entropy_loss
from .manifest import ClipRecord, Split, balance_training_set, load_manifest, split_records
from .metrics import ScoredSet, auc
from .model import ABLATIONS, CE_ONLY, CROSS, FULL, REFERENCE_ABLATION_AUC, DigiShield

log = logging.getLogger(__name__)

CKPT_FORMAT = "digishield-checkpoint"
CKPT_VERSION = 1


class TrainingDiverged(RuntimeError):
    pass


class CheckpointError(ValueError):
    pass


@dataclass
class TrainConfig:
    preset: str = "toy"
    ablation: str = FULL
    optimizer: str = "adam"
    lr: float = 1e-4
    weight_decay: float = 1e-4
    batch_size: int = 8
    epochs: int = 20
    seed: int = 0
    margin: float = DEFAULT_MARGIN
    patience: int = 5
    d: int = 0  # 0 keeps the preset's width
    head_down: int = 2
    augment: bool = True
    jitter: float = 0.2
    crop_scale: float = 0.9
    manifest: str = ""
    cache_dir: str = ""
    out_dir: str = ""

    def __post_init__(self) -> None:
        if self.ablation not in ABLATIONS:
            raise ValueError(f"ablation must be one of {ABLATIONS}, got {self.ablation!r}")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unsupported optimizer {self.optimizer!r}")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be positive")
        if self.margin <= 0:
            raise ValueError("margin must be positive")

    def encoder_config(self) -> EncoderConfig:
        return preset(self.preset, self.d or None)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def load_config(path: str | Path) -> TrainConfig:
    """Read a flat ``key = value`` file (``#`` comments). Unknown keys are an error."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.read_string("[train]\n" + Path(path).read_text(encoding="utf-8"))
    types = {f.name: f.type for f in dataclasses.fields(TrainConfig)}
    kwargs = {}
    for key, raw in parser["train"].items():
        if key not in types:
            raise ValueError(f"{path}: unknown config key {key!r}")
        kind = types[key]
        if kind == "bool":
            kwargs[key] = parser["train"].getboolean(key)
        elif kind == "int":
            kwargs[key] = int(raw)
        elif kind == "float":
            kwargs[key] = float(raw)
        else:
            kwargs[key] = raw.strip()
    cfg = TrainConfig(**kwargs)
    base = Path(path).parent
    for key in ("manifest", "cache_dir", "out_dir"):
        value = getattr(cfg, key)
        if value and not Path(value).is_absolute():
            setattr(cfg, key, str(base / value))
    return cfg


def save_config(cfg: TrainConfig, path: str | Path) -> Path:
    path = Path(path)
    lines = [f"{k} = {v}" for k, v in cfg.to_dict().items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


class ClipStore:
    """Lazily loaded, memoized cache arrays keyed by clip_id."""

    def __init__(self, cache_dir: str | Path):
        self.cache_dir = Path(cache_dir)
        self._arrays: dict[str, tuple[np.ndarray, np.ndarray]] = {}

    def get(self, rec: ClipRecord) -> tuple[np.ndarray, np.ndarray]:
        if rec.clip_id not in self._arrays:
            path = cache.cache_path(self.cache_dir, rec.clip_id)
            if not path.exists():
                raise FileNotFoundError(f"missing cache entry for {rec.clip_id}: {path}")
            self._arrays[rec.clip_id] = cache.read_clip(path)
        return self._arrays[rec.clip_id]

    def check(self, records: Sequence[ClipRecord]) -> None:
        missing = [r.clip_id for r in records if not cache.cache_path(self.cache_dir, r.clip_id).exists()]
        if missing:
            raise FileNotFoundError(f"{len(missing)} clips have no cache entry in {self.cache_dir}, e.g. {missing[:3]}")


# scorer(record, frames K x T x C x H x W, mfcc K x 3 x H_a x W_a) -> K probabilities
ClipScorer = Callable[[ClipRecord, np.ndarray, np.ndarray], np.ndarray]


class ModelScorer:
    def __init__(self, model: DigiShield):
        self.model = model

    @torch.no_grad()
    def __call__(self, rec: ClipRecord, frames: np.ndarray, mfcc: np.ndarray) -> np.ndarray:
        self.model.eval()
        out = self.model(torch.from_numpy(frames), torch.from_numpy(mfcc))
        return out.prob.double().numpy()


def score_records(scorer: ClipScorer, records: Sequence[ClipRecord], store: ClipStore) -> ScoredSet:
    """One score per clip: the mean probability over its windows."""
    if not records:
        raise ValueError("no records to score")
    scores = []
    for rec in records:
        frames, mfcc = store.get(rec)
        scores.append(float(np.mean(scorer(rec, frames, mfcc))))
    return ScoredSet(
        scores=scores,
        labels=[r.label for r in records],
        categories=[r.category.value for r in records],
        clip_ids=[r.clip_id for r in records],
    )


def evaluate(
    model_or_scorer: DigiShield | ClipScorer,
    records: Sequence[ClipRecord],
    cache_dir: str | Path | ClipStore,
    split: Split | str = Split.VAL,
) -> tuple[ScoredSet, float]:
    subset = split_records(records, split)
    if not subset:
        raise ValueError(f"split {Split(split).value!r} is empty")
    store = cache_dir if isinstance(cache_dir, ClipStore) else ClipStore(cache_dir)
    scorer = ModelScorer(model_or_scorer) if isinstance(model_or_scorer, DigiShield) else model_or_scorer
    scored = score_records(scorer, subset, store)
    return scored, auc(scored)


@dataclass
class TrainResult:
    model: DigiShield
    history: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    best_val_auc: float = float("nan")
    checkpoint_path: Path | None = None

    def checkpoint(self, config: TrainConfig) -> dict:
        return make_checkpoint(self.model, config, self.best_epoch, self.history)


def build_model(cfg: TrainConfig) -> DigiShield:
    torch.manual_seed(cfg.seed)
    return DigiShield(cfg.encoder_config(), cfg.ablation, head_down=cfg.head_down)


def _optimizer(cfg: TrainConfig, model: DigiShield) -> torch.optim.Optimizer:
    if cfg.optimizer == "adam":
        return torch.optim.Adam(model.parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay)
    return torch.optim.SGD(model.parameters(), lr=cfg.lr, momentum=0.9, weight_decay=cfg.weight_decay)


def _batches(items: list, order: torch.Tensor, size: int):
    for start in range(0, len(order), size):
        yield [items[i] for i in order[start : start + size].tolist()]


def train(cfg: TrainConfig, manifest: str | Path | None = None, records: Sequence[ClipRecord] | None = None) -> TrainResult:
    """Minibatch training on the train split, model selection on val AUC.

    The video-only ablation optimizes cross-entropy alone; the two-stream
    variants optimize contrastive + cross-entropy. Raises TrainingDiverged
    on a non-finite loss.
    """
    if records is None:
        records = load_manifest(manifest or cfg.manifest)
    train_recs = split_records(records, Split.TRAIN)
    val_recs = split_records(records, Split.VAL)
    if not train_recs or not val_recs:
        raise ValueError("manifest needs non-empty train and val splits")
    store = ClipStore(cfg.cache_dir)
    store.check(train_recs + val_recs)

    model = build_model(cfg)
    opt = _optimizer(cfg, model)
    order_gen = torch.Generator().manual_seed(cfg.seed)
    aug_params = AugmentParams(cfg.jitter, cfg.jitter, cfg.jitter, cfg.crop_scale)

    history: list[dict] = []
    best_auc, best_epoch, best_state, stale = -math.inf, 0, None, 0
    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        model.train()
        balanced = balance_training_set(train_recs, seed=cfg.seed * 100_003 + epoch)
        items = [(rec, k) for rec in balanced for k in range(store.get(rec)[0].shape[0])]
        order = torch.randperm(len(items), generator=order_gen)
        aug_rng = np.random.default_rng([cfg.seed, epoch])
        sums = {"loss": 0.0, "ce": 0.0, "con": 0.0}
        n_seen = 0
        for batch in _batches(items, order, cfg.batch_size):
            frames, mfcc, labels = [], [], []
            for rec, k in batch:
                f, m = store.get(rec)
                clip = f[k]
                if cfg.augment:
                    clip = augment(FrameStack(clip), int(aug_rng.integers(2**63 - 1)), aug_params).data
                frames.append(clip)
                mfcc.append(m[k])
                labels.append(rec.label)
            x_v = torch.from_numpy(np.stack(frames))
            x_a = torch.from_numpy(np.stack(mfcc))
            y = torch.tensor(labels)

            out = model(x_v, x_a if model.two_stream else None)
            ce = cross_entropy_loss(out.prob, y)
            con = contrastive_loss(out.h_v, out.h_a, y, cfg.margin) if model.two_stream else torch.zeros(())
            loss = ce + con
            if not torch.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch} (ce={ce.item()}, con={con.item()}); try a lower lr"
                )
            opt.zero_grad(set_to_none=True)
            loss.backward()
            opt.step()
            n = len(batch)
            n_seen += n
            sums["loss"] += loss.item() * n
            sums["ce"] += ce.item() * n
            sums["con"] += con.item() * n

        _, val_auc = evaluate(model, val_recs, store, Split.VAL)
        row = {
            "epoch": epoch,
            "train_loss": sums["loss"] / n_seen,
            "train_ce": sums["ce"] / n_seen,
            "train_con": sums["con"] / n_seen,
            "val_auc": val_auc,
            "seconds": time.perf_counter() - t0,
        }
        history.append(row)
        log.info("epoch %d loss %.4f val_auc %.4f", epoch, row["train_loss"], val_auc)
        if val_auc > best_auc:
            best_auc, best_epoch, stale = val_auc, epoch, 0
            best_state = copy.deepcopy(model.state_dict())
        else:
            stale += 1
            if cfg.patience and stale >= cfg.patience:
                log.info("early stop after epoch %d (best %d)", epoch, best_epoch)
                break

    model.load_state_dict(best_state)
    model.eval()
    result = TrainResult(model=model, history=history, best_epoch=best_epoch, best_val_auc=best_auc)
    if cfg.out_dir:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        result.checkpoint_path = save_checkpoint(result.checkpoint(cfg), out / "best.ckpt")
        write_history(history, out / "history.csv")
    return result


HISTORY_FIELDS = ("epoch", "train_loss", "train_ce", "train_con", "val_auc", "seconds")


def write_history(history: list[dict], path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=HISTORY_FIELDS)
        w.writeheader()
        w.writerows(history)
    return path


def make_checkpoint(model: DigiShield, cfg: TrainConfig, epoch: int, history: list[dict]) -> dict:
    return {
        "format": CKPT_FORMAT,
        "version": CKPT_VERSION,
        "train_config": cfg.to_dict(),
        "encoder_config": model.enc_config.to_dict(),
        "epoch": epoch,
        "history": history,
        "state_dict": {k: v.detach().clone() for k, v in model.state_dict().items()},
    }


def save_checkpoint(ckpt: dict, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(ckpt, path)
    return path


def load_checkpoint(path: str | Path) -> tuple[DigiShield, dict]:
    """Rebuild the model from a checkpoint, validating every tensor shape."""
    ckpt = torch.load(path, map_location="cpu", weights_only=True)
    if not isinstance(ckpt, dict) or ckpt.get("format") != CKPT_FORMAT:
        raise CheckpointError(f"{path} is not a detector checkpoint")
    if ckpt.get("version") != CKPT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {ckpt.get('version')}")
    return model_from_checkpoint(ckpt), ckpt


def model_from_checkpoint(ckpt: dict) -> DigiShield:
    cfg = TrainConfig(**ckpt["train_config"])
    model = DigiShield(EncoderConfig.from_dict(ckpt["encoder_config"]), cfg.ablation, head_down=cfg.head_down)
    expected = model.state_dict()
    state = ckpt["state_dict"]
    missing = sorted(set(expected) - set(state))
    unexpected = sorted(set(state) - set(expected))
    if missing or unexpected:
        raise CheckpointError(f"parameter names differ: missing {missing[:3]}, unexpected {unexpected[:3]}")
    for name, tensor in expected.items():
        if tuple(state[name].shape) != tuple(tensor.shape):
            raise CheckpointError(f"{name}: checkpoint shape {tuple(state[name].shape)} != model {tuple(tensor.shape)}")
    model.load_state_dict(state)
    model.eval()
    return model


@dataclass
class AblationRow:
    ablation: str
    seed: int
    val_auc: float
    test_auc: float
    best_epoch: int
    reference_auc: float


def run_ablation_suite(
    base: TrainConfig, seeds: Sequence[int], records: Sequence[ClipRecord] | None = None
) -> list[AblationRow]:
    """Train every ablation variant for every seed; data order depends only on the seed."""
    if records is None:
        records = load_manifest(base.manifest)
    has_test = bool(split_records(records, Split.TEST))
    rows = []
    for seed in seeds:
        for ablation in ABLATIONS:
            out_dir = str(Path(base.out_dir) / f"{ablation}_seed{seed}") if base.out_dir else ""
            cfg = dataclasses.replace(base, ablation=ablation, seed=seed, out_dir=out_dir)
            result = train(cfg, records=records)
            test_auc = evaluate(result.model, records, cfg.cache_dir, Split.TEST)[1] if has_test else float("nan")
            rows.append(
                AblationRow(ablation, seed, result.best_val_auc, test_auc, result.best_epoch, REFERENCE_ABLATION_AUC[ablation])
            )
    return rows


def summarize_ablation(rows: Sequence[AblationRow], metric: str = "test_auc") -> dict[str, float]:
    return {a: float(np.mean([getattr(r, metric) for r in rows if r.ablation == a])) for a in ABLATIONS}


def format_ablation_table(rows: Sequence[AblationRow]) -> str:
    lines = ["ablation,seed,val_auc,test_auc,best_epoch,reference_auc"]
    for r in rows:
        lines.append(f"{r.ablation},{r.seed},{r.val_auc:.6f},{r.test_auc:.6f},{r.best_epoch},{r.reference_auc}")
    return "\n".join(lines)


__all__ = [
    "ABLATIONS",
    "CE_ONLY",
    "CROSS",
    "FULL",
    "TrainConfig",
    "train",
    "evaluate",
    "run_ablation_suite",
    "load_checkpoint",
    "save_checkpoint",
]

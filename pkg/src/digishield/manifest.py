"""Clip records, the category/label taxonomy, identity-disjoint splits and class balancing.

Manifests are JSON Lines files: one JSON object per line carrying exactly the
``ClipRecord`` fields. Blank lines and lines starting with ``#`` are skipped.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable


class ManifestError(ValueError):
    """Raised for malformed or inconsistent manifest content."""


class Category(str, enum.Enum):
    # Real video with fake audio is intentionally not representable.
    RV_RA = "RV_RA"
    FV_RA = "FV_RA"
    FV_FA = "FV_FA"

    @property
    def label(self) -> int:
        return 1 if self is Category.RV_RA else 0


class Split(str, enum.Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"
    UNASSIGNED = "unassigned"


REAL, FAKE = 1, 0
FIELDS = (
    "clip_id",
    "video_path",
    "audio_path",
    "identity_id",
    "category",
    "label",
    "split",
    "duration_s",
    "fps",
    "width",
    "height",
)


@dataclass(frozen=True)
class ClipRecord:
    clip_id: str
    video_path: str
    audio_path: str
    identity_id: str
    category: Category
    label: int
    split: Split = Split.UNASSIGNED
    duration_s: float = 1.0
    fps: float = 25.0
    width: int = 0
    height: int = 0

    def __post_init__(self) -> None:
        # Coerce plain strings so records built by hand and from JSON agree.
        object.__setattr__(self, "category", Category(self.category))
        object.__setattr__(self, "split", Split(self.split))
        if self.label not in (0, 1) or isinstance(self.label, bool):
            raise ManifestError(f"{self.clip_id}: label must be 0 or 1, got {self.label!r}")
        if self.category.label != self.label:
            raise ManifestError(
                f"{self.clip_id}: label/category contradiction "
                f"(category={self.category.value}, label={self.label})"
            )
        if not self.duration_s > 0:
            raise ManifestError(f"{self.clip_id}: duration_s must be > 0")
        if not self.fps > 0:
            raise ManifestError(f"{self.clip_id}: fps must be > 0")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["category"] = self.category.value
        d["split"] = self.split.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ClipRecord":
        missing = [k for k in ("clip_id", "video_path", "audio_path", "identity_id", "category", "label") if k not in d]
        if missing:
            raise ManifestError(f"missing fields: {', '.join(missing)}")
        unknown = set(d) - set(FIELDS)
        if unknown:
            raise ManifestError(f"unknown fields: {', '.join(sorted(unknown))}")
        return cls(**d)


@dataclass(frozen=True)
class SplitPlan:
    ratios: tuple[float, float, float]
    seed: int
    assignment: dict[str, Split] = field(default_factory=dict)

    def __post_init__(self) -> None:
        _check_ratios(self.ratios)

    def identities(self, split: Split) -> set[str]:
        return {i for i, s in self.assignment.items() if s is split}


def _check_ratios(ratios: Iterable[float]) -> tuple[float, float, float]:
    r = tuple(float(x) for x in ratios)
    if len(r) != 3:
        raise ManifestError(f"ratios must have three entries, got {len(r)}")
    if any(x < 0 or not math.isfinite(x) for x in r):
        raise ManifestError(f"ratios must be finite and non-negative: {r}")
    if abs(sum(r) - 1.0) > 1e-9:
        raise ManifestError(f"ratios must sum to 1 (got {sum(r)!r})")
    return r  # type: ignore[return-value]


def load_manifest(path: str | Path) -> list[ClipRecord]:
    records: list[ClipRecord] = []
    seen: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            try:
                obj = json.loads(text)
                if not isinstance(obj, dict):
                    raise ManifestError("record must be a JSON object")
                rec = ClipRecord.from_dict(obj)
            except (json.JSONDecodeError, ManifestError, TypeError, ValueError) as exc:
                raise ManifestError(f"{path}:{lineno}: {exc}") from exc
            if rec.clip_id in seen:
                raise ManifestError(
                    f"{path}:{lineno}: duplicate clip_id {rec.clip_id!r} (first seen on line {seen[rec.clip_id]})"
                )
            seen[rec.clip_id] = lineno
            records.append(rec)
    return records


def write_manifest(records: Iterable[ClipRecord], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), sort_keys=False) + "\n")
    return path


def _split_counts(n: int, ratios: tuple[float, float, float]) -> tuple[int, int, int]:
    """Largest-remainder apportionment with every split getting at least one identity."""
    raw = [r * n for r in ratios]
    counts = [math.floor(x) for x in raw]
    order = sorted(range(3), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    # Borrow from the largest split so that val/test are never empty.
    for i in range(3):
        if counts[i] == 0 and ratios[i] > 0:
            donor = max(range(3), key=lambda j: counts[j])
            counts[donor] -= 1
            counts[i] += 1
    return counts[0], counts[1], counts[2]


def make_splits(
    records: list[ClipRecord], ratios=(0.8, 0.1, 0.1), seed: int = 0
) -> tuple[list[ClipRecord], SplitPlan]:
    """Assign whole identities to train/val/test.

    Ratios are applied to the number of distinct identities, so clip-level
    proportions follow from how many clips each identity has.
    """
    if not records:
        raise ManifestError("cannot split an empty manifest")
    ratios = _check_ratios(ratios)
    identities = sorted({r.identity_id for r in records})
    if len(identities) < 3:
        raise ManifestError(f"need at least 3 distinct identities to populate all splits, got {len(identities)}")

    random.Random(seed).shuffle(identities)
    n_train, n_val, _ = _split_counts(len(identities), ratios)
    assignment: dict[str, Split] = {}
    for k, ident in enumerate(identities):
        if k < n_train:
            assignment[ident] = Split.TRAIN
        elif k < n_train + n_val:
            assignment[ident] = Split.VAL
        else:
            assignment[ident] = Split.TEST

    plan = SplitPlan(ratios=ratios, seed=seed, assignment=dict(sorted(assignment.items())))
    out = [dataclasses.replace(r, split=assignment[r.identity_id]) for r in records]
    return out, plan


def balance_training_set(records: list[ClipRecord], seed: int = 0) -> list[ClipRecord]:
    """Upsample the minority class until real and fake counts match.

    Minority records are duplicated round-robin in clip_id order, then the
    combined list is shuffled with ``seed``. An already balanced input is
    returned unchanged (as a new list).
    """
    bad = [r.clip_id for r in records if r.split is not Split.TRAIN]
    if bad:
        raise ManifestError(f"balance_training_set expects train records only; got {bad[:3]}...")
    real = [r for r in records if r.label == REAL]
    fake = [r for r in records if r.label == FAKE]
    if not real or not fake:
        raise ManifestError("single-class input: both real and fake records are required")
    if abs(len(real) - len(fake)) <= 1:
        return list(records)

    minority, majority = (real, fake) if len(real) < len(fake) else (fake, real)
    donors = sorted(minority, key=lambda r: r.clip_id)
    extra = [donors[k % len(donors)] for k in range(len(majority) - len(minority))]
    out = list(records) + extra
    random.Random(seed).shuffle(out)
    return out


def split_records(records: Iterable[ClipRecord], split: Split | str) -> list[ClipRecord]:
    split = Split(split)
    return [r for r in records if r.split is split]

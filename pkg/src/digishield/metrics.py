"""ROC-AUC (Mann-Whitney form) and per-category error rates."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .manifest import Category


@dataclass
class ScoredSet:
    scores: Sequence[float]
    labels: Sequence[int]
    categories: Sequence[str] | None = None
    clip_ids: Sequence[str] | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.scores.shape != self.labels.shape or self.scores.ndim != 1:
            raise ValueError("scores and labels must be 1-D and of equal length")
        if not np.all(np.isfinite(self.scores)):
            raise ValueError("scores must be finite")
        if self.categories is not None:
            self.categories = [Category(c).value for c in self.categories]
            if len(self.categories) != len(self.labels):
                raise ValueError("categories must match scores in length")


def auc(scores, labels=None) -> float:
    """P(score_real > score_fake) + 0.5 * P(tie), computed from average ranks."""
    if isinstance(scores, ScoredSet):
        s, y = scores.scores, scores.labels
    else:
        s, y = np.asarray(scores, dtype=np.float64), np.asarray(labels)
    pos = y == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("single-class input: AUC needs both real and fake samples")
    ranks = rankdata(s)  # ties receive their average rank
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_curve(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    """False- and true-positive rates at every distinct threshold, real = positive."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    thresholds = np.r_[np.inf, np.unique(s)[::-1]]
    n_pos, n_neg = max((y == 1).sum(), 1), max((y == 0).sum(), 1)
    tpr = np.array([((s >= t) & (y == 1)).sum() / n_pos for t in thresholds])
    fpr = np.array([((s >= t) & (y == 0)).sum() / n_neg for t in thresholds])
    return fpr, tpr


def misclassification_report(scored: ScoredSet, threshold: float = 0.5) -> dict[str, dict[str, float]]:
    """Error rate per category plus ``overall``. Categories with no samples are omitted."""
    pred = (scored.scores >= threshold).astype(np.int64)
    wrong = pred != scored.labels
    report: dict[str, dict[str, float]] = {}
    if scored.categories is not None:
        cats = np.asarray(scored.categories)
        for cat in Category:
            mask = cats == cat.value
            n = int(mask.sum())
            if n:
                report[cat.value] = {"n": n, "errors": int(wrong[mask].sum()), "rate": float(wrong[mask].mean())}
    if len(wrong):
        report["overall"] = {"n": len(wrong), "errors": int(wrong.sum()), "rate": float(wrong.mean())}
    return report


def format_report(scored: ScoredSet, threshold: float = 0.5) -> str:
    lines = []
    try:
        lines.append(f"auc\t{auc(scored):.6f}")
    except ValueError as exc:
        lines.append(f"auc\tundefined ({exc})")
    lines.append(f"n\t{len(scored.labels)}")
    for name, row in misclassification_report(scored, threshold).items():
        lines.append(f"error[{name}]\t{row['rate']:.4f}\t({row['errors']}/{row['n']})")
    return "\n".join(lines)


def plot_roc(scored: ScoredSet, path: str | Path) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fpr, tpr = roc_curve(scored.scores, scored.labels)
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.plot(fpr, tpr, lw=1.5, label=f"AUC = {auc(scored):.3f}")
    ax.plot([0, 1], [0, 1], ls="--", c="grey", lw=0.8)
    ax.set_xlabel("false positive rate (fake scored real)")
    ax.set_ylabel("true positive rate")
    ax.legend(loc="lower right")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path)
    plt.close(fig)
    return path

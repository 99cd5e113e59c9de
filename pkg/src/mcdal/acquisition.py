"""Acquisition scoring and pool transfer.

The discrepancy score of a sample is the sum of pairwise distances between
the heads' probability outputs, D(x). Unlabeled samples are ranked by
|D(x_u) - mean of D over the labeled pool|: both unusually discrepant and
unusually agreeable samples sit far from the labeled distribution and are
worth labeling. Classical uncertainty baselines (random / entropy / margin)
are included for comparison curves.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .data import PoolError
from .losses import L1, PROB_FLOOR, classifier_pairs, distance_rows
from .model import forward

TERM_CHOICES = ("all", "aux")  # "all": every head pair; "aux": aux-aux pairs only


@dataclass(frozen=True)
class Strategy:
    variant: str  # "mcdal" | "random" | "entropy" | "margin"
    distance: object = L1
    terms: str = "all"
    raw_score: bool = False  # score by D(x) itself instead of |D(x) - labeled mean|

    def __post_init__(self):
        if self.variant not in ("mcdal", "random", "entropy", "margin"):
            raise ValueError(f"unknown strategy variant {self.variant!r}")
        if self.terms not in TERM_CHOICES:
            raise ValueError(f"terms must be one of {TERM_CHOICES}, got {self.terms!r}")


@dataclass(frozen=True)
class AcquisitionScore:
    sample_index: int  # position within the unlabeled view
    d_total: float
    score: float


def total_discrepancy(record, kind=L1, terms="all"):
    """Per-sample D(x): summed pairwise distances between head outputs."""
    probs = [record.p] + list(record.aux_p)
    if terms == "all":
        pairs = classifier_pairs(len(probs))
    elif terms == "aux":
        k = len(record.aux_p)
        pairs = [(i, j) for i in range(1, k + 1) for j in range(i + 1, k + 1)]
    else:
        raise ValueError(f"terms must be one of {TERM_CHOICES}, got {terms!r}")
    total = np.zeros(record.p.shape[0])
    for a, b in pairs:
        total += distance_rows(probs[a], probs[b], kind)
    return total


def _batched_discrepancy(model, x, kind, terms, batch_size):
    out = np.empty(x.shape[0])
    for start in range(0, x.shape[0], batch_size):
        chunk = x[start : start + batch_size]
        out[start : start + chunk.shape[0]] = total_discrepancy(
            forward(model, chunk), kind, terms
        )
    return out


def labeled_mean_discrepancy(model, x_labeled, kind=L1, terms="all", batch_size=512):
    """Mean D over the whole labeled pool (batched for memory)."""
    x_labeled = np.asarray(x_labeled, dtype=np.float64)
    if x_labeled.shape[0] == 0:
        raise PoolError("labeled pool is empty")
    return float(_batched_discrepancy(model, x_labeled, kind, terms, batch_size).mean())


def mcdal_scores(
    model, x_unlabeled, labeled_mean, kind=L1, terms="all", raw_score=False, batch_size=512
):
    """Score every unlabeled sample; higher means further from the labeled
    pool's average discrepancy (or plain D when raw_score is set)."""
    x_unlabeled = np.asarray(x_unlabeled, dtype=np.float64)
    if x_unlabeled.shape[0] == 0:
        raise PoolError("unlabeled pool is empty")
    d = _batched_discrepancy(model, x_unlabeled, kind, terms, batch_size)
    s = d if raw_score else np.abs(d - labeled_mean)
    return [AcquisitionScore(i, float(d[i]), float(s[i])) for i in range(len(d))]


def baseline_scores(model, x_unlabeled, strategy, rng=None):
    """Random / entropy / margin scores over the unlabeled view."""
    x_unlabeled = np.asarray(x_unlabeled, dtype=np.float64)
    n = x_unlabeled.shape[0]
    if n == 0:
        raise PoolError("unlabeled pool is empty")
    if strategy.variant == "random":
        if rng is None:
            raise ValueError("random strategy needs an rng")
        s = rng.uniform(0.0, 1.0, n)
    elif strategy.variant == "entropy":
        p = forward(model, x_unlabeled).p
        terms = np.where(p > 0.0, p * np.log(np.maximum(p, PROB_FLOOR)), 0.0)
        s = -terms.sum(axis=1)
    elif strategy.variant == "margin":
        p = forward(model, x_unlabeled).p
        part = np.partition(p, -2, axis=1)
        s = 1.0 - (part[:, -1] - part[:, -2])
    else:
        raise ValueError(f"baseline_scores cannot handle strategy {strategy.variant!r}")
    return [AcquisitionScore(i, 0.0, float(s[i])) for i in range(n)]


def select_top(scores, b):
    """Indices of the b highest scores; ties resolved by ascending index."""
    if b > len(scores):
        raise ValueError(f"cannot select {b} from {len(scores)} scores")
    if b < 0:
        raise ValueError(f"b must be >= 0, got {b}")
    idx = np.array([s.sample_index for s in scores], dtype=np.int64)
    val = np.array([s.score for s in scores])
    order = np.lexsort((idx, -val))  # primary: score desc; secondary: index asc
    return idx[order[:b]]


def transfer(pool, selected, oracle):
    """Move selected samples to the labeled pool, labeling them via the
    oracle; indices are into the pool's dataset."""
    selected = np.asarray(selected, dtype=np.int64)
    if len(np.unique(selected)) != len(selected):
        raise PoolError("duplicate indices in selection")
    unlabeled = set(pool.unlabeled_indices.tolist())
    missing = [int(i) for i in selected if int(i) not in unlabeled]
    if missing:
        raise PoolError(f"indices not in the unlabeled pool: {missing[:5]}")
    oracle.label(selected)  # the transferred samples become labeled
    pool.labeled_indices = np.concatenate([pool.labeled_indices, selected])
    pool.unlabeled_indices = np.setdiff1d(pool.unlabeled_indices, selected)
    pool.check_partition()
    return pool


def _aux_disagreement_rate(model, x):
    record = forward(model, x)
    a = np.argmax(record.aux_logits[0], axis=1)
    b = np.argmax(record.aux_logits[1], axis=1)
    return float(np.mean(a != b))


def empirical_hdh_gap(model, x_labeled, x_unlabeled):
    """|disagreement rate on labeled - disagreement rate on unlabeled| of
    the first two auxiliary heads' argmax predictions; in [0, 1]."""
    x_labeled = np.asarray(x_labeled, dtype=np.float64)
    x_unlabeled = np.asarray(x_unlabeled, dtype=np.float64)
    if x_labeled.shape[0] == 0 or x_unlabeled.shape[0] == 0:
        raise PoolError("both pools must be nonempty")
    return abs(_aux_disagreement_rate(model, x_labeled) - _aux_disagreement_rate(model, x_unlabeled))


def unlabeled_disagreement_rate(model, x_unlabeled):
    """Fraction of unlabeled samples where the two aux heads disagree."""
    x_unlabeled = np.asarray(x_unlabeled, dtype=np.float64)
    if x_unlabeled.shape[0] == 0:
        raise PoolError("unlabeled pool is empty")
    return _aux_disagreement_rate(model, x_unlabeled)


def save_scores_csv(scores, path):
    """Dump (sample_index, d_total, score) rows for inspection."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_index", "d_total", "score"])
        for s in scores:
            writer.writerow(
                [s.sample_index, format(s.d_total, ".17g"), format(s.score, ".17g")]
            )

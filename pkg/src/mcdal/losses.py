"""Classification and discrepancy losses.

The discrepancy loss is the batch-mean sum of pairwise distances between the
probability outputs of all classifier heads. The distance d is L1 by
default: d(u, v) = (1/C) * sum_c |u_c - v_c|. L2 (squared, same 1/C
normalization) and KL variants exist for ablations; KL is directed,
d(u, v) = KL(u || v) with the denominator clamped at epsilon.

All inputs are probability rows (post-softmax). Gradients returned here are
with respect to the probability rows; the model module chains them through
softmax to head logits.
"""

from dataclasses import dataclass

import numpy as np

from .numeric import ShapeError

PROB_FLOOR = 1e-12  # clamp before any log


@dataclass(frozen=True)
class DistanceKind:
    variant: str  # "l1" | "l2" | "kl"
    epsilon: float = 1e-12

    def __post_init__(self):
        if self.variant not in ("l1", "l2", "kl"):
            raise ValueError(f"unknown distance variant {self.variant!r}")
        if self.epsilon <= 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


L1 = DistanceKind("l1")
L2 = DistanceKind("l2")
KL = DistanceKind("kl")


def parse_distance(name):
    try:
        return {"l1": L1, "l2": L2, "kl": KL}[name.lower()]
    except KeyError:
        raise ValueError(f"unknown distance {name!r}; expected l1, l2, or kl") from None


def cross_entropy(p, labels):
    """Batch mean of -log p[label], probabilities clamped at 1e-12."""
    p = np.asarray(p, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if p.ndim != 2 or labels.ndim != 1 or p.shape[0] != labels.shape[0]:
        raise ShapeError(f"cross_entropy: p {p.shape} vs labels {labels.shape}")
    if p.shape[0] == 0:
        raise ValueError("cross_entropy: empty batch")
    c = p.shape[1]
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError(f"cross_entropy: label out of range [0, {c})")
    picked = p[np.arange(p.shape[0]), labels]
    return float(-np.log(np.maximum(picked, PROB_FLOOR)).mean())


def _check_pair(pa, pb):
    if pa.shape != pb.shape:
        raise ShapeError(f"distance: row shapes differ {pa.shape} vs {pb.shape}")


def distance_rows(pa, pb, kind):
    """Per-row distance between two (n, C) probability arrays."""
    pa = np.asarray(pa, dtype=np.float64)
    pb = np.asarray(pb, dtype=np.float64)
    _check_pair(pa, pb)
    c = pa.shape[1]
    if kind.variant == "l1":
        return np.abs(pa - pb).sum(axis=1) / c
    if kind.variant == "l2":
        return ((pa - pb) ** 2).sum(axis=1) / c
    # kl: terms with pa == 0 contribute 0; denominator clamped at epsilon.
    ratio = np.log(np.maximum(pa, PROB_FLOOR)) - np.log(np.maximum(pb, kind.epsilon))
    vals = np.where(pa > 0.0, pa * ratio, 0.0).sum(axis=1)
    return np.maximum(vals, 0.0)


def distance_rows_grad(pa, pb, kind):
    """Per-row gradients (d/dpa, d/dpb) of distance_rows.

    Subgradient conventions: |t| has slope 0 at t = 0; the KL epsilon clamp
    zeroes the pb gradient wherever it is active.
    """
    pa = np.asarray(pa, dtype=np.float64)
    pb = np.asarray(pb, dtype=np.float64)
    _check_pair(pa, pb)
    c = pa.shape[1]
    if kind.variant == "l1":
        ga = np.sign(pa - pb) / c
        return ga, -ga
    if kind.variant == "l2":
        ga = 2.0 * (pa - pb) / c
        return ga, -ga
    log_ratio = np.log(np.maximum(pa, PROB_FLOOR)) - np.log(np.maximum(pb, kind.epsilon))
    ga = np.where(pa > 0.0, log_ratio + 1.0, 0.0)
    gb = np.where(pb > kind.epsilon, -pa / np.maximum(pb, kind.epsilon), 0.0)
    return ga, gb


def pair_distance(p_a, p_b, kind=L1):
    """Distance between two single probability rows."""
    p_a = np.atleast_2d(np.asarray(p_a, dtype=np.float64))
    p_b = np.atleast_2d(np.asarray(p_b, dtype=np.float64))
    return float(distance_rows(p_a, p_b, kind)[0])


def classifier_pairs(num_probs):
    """Ordered index pairs over [main, aux1, aux2, ...].

    Matches the loss definition: each auxiliary head paired with the main
    head (aux argument first), plus every aux-aux pair (lower index first).
    For three classifiers this is (1,0), (2,0), (1,2).
    """
    pairs = [(i, 0) for i in range(1, num_probs)]
    pairs += [(i, j) for i in range(1, num_probs) for j in range(i + 1, num_probs)]
    return pairs


def discrepancy_values(probs, kind):
    """Per-sample sum of pairwise distances; probs = [p, p1, p2, ...]."""
    pairs = classifier_pairs(len(probs))
    total = np.zeros(probs[0].shape[0])
    for a, b in pairs:
        total += distance_rows(probs[a], probs[b], kind)
    return total


def discrepancy_loss(p, p1, p2, kind=L1):
    """Batch mean of d(p1,p) + d(p2,p) + d(p1,p2)."""
    return discrepancy_loss_multi(p, [p1, p2], kind)


def discrepancy_loss_multi(p, aux_probs, kind=L1):
    """Generalized discrepancy loss over the main head and >=2 aux heads."""
    probs = [np.asarray(p, dtype=np.float64)] + [
        np.asarray(a, dtype=np.float64) for a in aux_probs
    ]
    for q in probs[1:]:
        _check_pair(probs[0], q)
    if probs[0].shape[0] == 0:
        raise ValueError("discrepancy_loss: empty batch")
    return float(discrepancy_values(probs, kind).mean())


def discrepancy_grads_wrt_aux(probs, kind):
    """Batch-mean-loss gradients w.r.t. each auxiliary probability array.

    probs = [p, p1, ..., pk]; returns a list of k arrays, one per aux head.
    The main-head probabilities are treated as constants (its parameters are
    never trained with this loss).
    """
    n = probs[0].shape[0]
    grads = [np.zeros_like(q) for q in probs]
    for a, b in classifier_pairs(len(probs)):
        ga, gb = distance_rows_grad(probs[a], probs[b], kind)
        grads[a] += ga
        grads[b] += gb
    return [g / n for g in grads[1:]]

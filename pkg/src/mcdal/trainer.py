"""Training loop: supervised descent plus discrepancy ascent.

Each epoch is a full shuffled pass over the labeled set. Every labeled
batch gets (a) a cross-entropy descent step on the backbone+main head and
on each auxiliary head (auxiliary CE stops at the feature boundary), then
(b) one unlabeled batch on which the discrepancy loss is *ascended* for the
auxiliary heads only. Unlabeled batches cycle through reshuffled
permutations when the pool is smaller or runs out mid-epoch; the unlabeled
batch size equals the labeled one. A single learning-rate schedule serves
both steps.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import backend as K
from .losses import L1, DistanceKind, cross_entropy, discrepancy_loss_multi
from .model import MAIN, backward_ce, backward_dis, forward
from .numeric import LrSchedule, Rng


class DivergenceError(RuntimeError):
    """A loss became non-finite during training."""


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 100
    batch_size: int = 64
    lr_schedule: LrSchedule = field(default_factory=lambda: LrSchedule(0.1))
    distance: DistanceKind = L1
    use_discrepancy_loss: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ValueError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    ce_loss: float  # main-head CE, mean over labeled batches
    dis_loss: float  # mean over unlabeled batches (0.0 when step skipped)
    learning_rate: float


@dataclass
class TrainLog:
    epochs: list = field(default_factory=list)

    def to_rows(self):
        return [
            {
                "epoch": e.epoch,
                "ce_loss": e.ce_loss,
                "dis_loss": e.dis_loss,
                "learning_rate": e.learning_rate,
            }
            for e in self.epochs
        ]


class _UnlabeledCycler:
    """Deterministic endless batches over a pool; reshuffles on exhaustion.

    Draws from the rng lazily, so a run that never requests a batch
    consumes no randomness.
    """

    def __init__(self, n, rng):
        self.n = n
        self.rng = rng
        self._order = None
        self._pos = 0

    def next(self, size):
        chunks = []
        need = size
        while need > 0:
            if self._order is None or self._pos >= self.n:
                self._order = self.rng.permutation(self.n)
                self._pos = 0
            take = min(need, self.n - self._pos)
            chunks.append(self._order[self._pos : self._pos + take])
            self._pos += take
            need -= take
        return np.concatenate(chunks)


def _update_layer(layer, grads, rate, direction):
    layer.weight = K.scaled_add(layer.weight, direction * rate, grads.weight)
    layer.bias = K.scaled_add_vec(layer.bias, direction * rate, grads.bias)


def _ce_descent_step(model, x, y, rate):
    record = forward(model, x)
    ce = cross_entropy(record.p, y)
    main_grads = backward_ce(model, record, x, y, head=MAIN)
    aux_grads = [backward_ce(model, record, x, y, head=i) for i in range(1, model.num_aux + 1)]
    for layer, g in zip(model.g_layers, main_grads.g_layers):
        _update_layer(layer, g, rate, -1.0)
    _update_layer(model.main_head, main_grads.head, rate, -1.0)
    for head, g in zip(model.aux_heads, aux_grads):
        _update_layer(head, g.head, rate, -1.0)
    return ce


def discrepancy_ascent_step(model, x_batch, rate, kind=L1):
    """One gradient-ascent step of the discrepancy loss on the aux heads.

    The backbone and main head are untouched. rate=0 is a no-op. Returns
    the (mutated) model.
    """
    if rate == 0.0:
        return model
    record = forward(model, x_batch)
    for head, g in zip(model.aux_heads, backward_dis(model, record, kind)):
        _update_layer(head, g, rate, +1.0)
    return model


def train(model, x_labeled, y_labeled, x_unlabeled, cfg, rng=None):
    """Train in place per the alternating schedule; returns (model, TrainLog)."""
    x_labeled = np.asarray(x_labeled, dtype=np.float64)
    y_labeled = np.asarray(y_labeled, dtype=np.int64)
    n_l = x_labeled.shape[0]
    if n_l == 0:
        raise ValueError("train: labeled set is empty")
    if x_unlabeled is None:
        x_unlabeled = np.zeros((0, x_labeled.shape[1]))
    x_unlabeled = np.asarray(x_unlabeled, dtype=np.float64)
    n_u = x_unlabeled.shape[0]
    if rng is None:
        rng = Rng(cfg.seed)

    run_dis = cfg.use_discrepancy_loss and n_u > 0
    cycler = _UnlabeledCycler(n_u, rng)
    log = TrainLog()
    bs = cfg.batch_size
    for epoch in range(cfg.max_epochs):
        rate = cfg.lr_schedule.rate(epoch, cfg.max_epochs)
        order = rng.permutation(n_l)
        ce_vals, dis_vals = [], []
        for start in range(0, n_l, bs):
            idx = order[start : start + bs]
            ce = _ce_descent_step(model, x_labeled[idx], y_labeled[idx], rate)
            if not math.isfinite(ce):
                raise DivergenceError(f"non-finite CE loss at epoch {epoch}")
            ce_vals.append(ce)
            if run_dis:
                xu = x_unlabeled[cycler.next(bs)]
                urec = forward(model, xu)
                dis = discrepancy_loss_multi(urec.p, urec.aux_p, cfg.distance)
                if not math.isfinite(dis):
                    raise DivergenceError(f"non-finite discrepancy loss at epoch {epoch}")
                dis_vals.append(dis)
                for head, g in zip(model.aux_heads, backward_dis(model, urec, cfg.distance)):
                    _update_layer(head, g, rate, +1.0)
        log.epochs.append(
            EpochStats(
                epoch=epoch,
                ce_loss=float(np.mean(ce_vals)),
                dis_loss=float(np.mean(dis_vals)) if dis_vals else 0.0,
                learning_rate=rate,
            )
        )
    return model, log

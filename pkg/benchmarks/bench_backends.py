#!/usr/bin/env python3
"""Kernel and end-to-end timing: compiled backend vs numpy fallback.

Usage:
    python benchmarks/bench_backends.py [--repeats N]

Kernel shapes mirror the two regimes the package actually hits: small
training batches (where per-call overhead dominates and the compiled loops
win) and pool-sized scoring batches (where BLAS catches up).
"""

import argparse
import time
import timeit

import numpy as np

from mcdal import backend
from mcdal.data import make_moons, initial_split
from mcdal.model import MlpSpec, init_model
from mcdal.numeric import Rng
from mcdal.trainer import TrainConfig, train


def kernel_cases():
    rng = np.random.default_rng(0)

    def c(shape):
        return np.ascontiguousarray(rng.normal(size=shape))

    batch, feat, classes = 64, 32, 4
    pool = 1800
    labels = rng.integers(0, classes, batch).astype(np.int64)
    p_small = np.ascontiguousarray(rng.dirichlet(np.ones(classes), size=batch))
    cases = [
        ("matmul 64x32 @ 32x32", "matmul", (c((batch, feat)), c((feat, feat)))),
        ("matmul 1800x32 @ 32x32", "matmul", (c((pool, feat)), c((feat, feat)))),
        ("matmul_at_b 64x32, 64x4", "matmul_at_b", (c((batch, feat)), c((batch, classes)))),
        ("softmax_rows 64x4", "softmax_rows", (c((batch, classes)),)),
        ("softmax_backward 64x4", "softmax_backward", (p_small, c((batch, classes)))),
        ("relu 64x32", "relu", (c((batch, feat)),)),
        ("scaled_add 32x32", "scaled_add", (c((feat, feat)), 0.01, c((feat, feat)))),
        ("ce_grad 64x4", "ce_grad", (p_small, labels)),
    ]
    return cases


def time_kernel(fn, args, repeats):
    best = min(timeit.repeat(lambda: fn(*args), number=200, repeat=repeats))
    return best / 200 * 1e6  # microseconds per call


def end_to_end_seconds():
    ds = make_moons(2000, 0.25, Rng(7))
    pool, _ = initial_split(ds, 0.2, 0.25, Rng(1))
    spec = MlpSpec(input_dim=2, hidden_dims=(32, 32), num_classes=2)
    model = init_model(spec, Rng(2))
    cfg = TrainConfig(max_epochs=30, batch_size=64)
    t0 = time.perf_counter()
    train(model, pool.labeled_features(), pool.labeled_labels(),
          pool.unlabeled_features(), cfg, Rng(3))
    return time.perf_counter() - t0


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5, help="timeit repeats per case")
    args = parser.parse_args()

    names = backend.available_backends()
    if "cython" not in names:
        print("compiled backend unavailable; build it with: pip install -e . --no-build-isolation")

    print(f"{'kernel':<28}" + "".join(f"{n + ' (us)':>14}" for n in names) + f"{'speedup':>10}")
    for label, fn_name, fn_args in kernel_cases():
        per = {}
        for name in names:
            with backend.use(name):
                per[name] = time_kernel(getattr(backend, fn_name), fn_args, args.repeats)
        row = f"{label:<28}" + "".join(f"{per[n]:>14.2f}" for n in names)
        if "cython" in per:
            row += f"{per['numpy'] / per['cython']:>9.2f}x"
        print(row)

    print()
    for name in names:
        with backend.use(name):
            secs = end_to_end_seconds()
        print(f"train 30 epochs (n=1500, MLP 2-32-32-2) [{name}]: {secs:.3f}s")


if __name__ == "__main__":
    main()

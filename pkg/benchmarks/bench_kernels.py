#!/usr/bin/env python3
"""Head-to-head timing of the compiled and pure-numpy kernel backends.

Times the hot kernels at the tensor sizes this package actually runs at
(tiny matrices, where per-call overhead matters) plus a full
training-step microbenchmark through the autodiff engine.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from syngen import _kernels_py

try:
    from syngen import _ckernels
except ImportError:
    _ckernels = None


def bench(fn, args, repeats, warmup=50):
    for _ in range(warmup):
        fn(*args)
    best = float("inf")
    for _ in range(5):
        t0 = time.perf_counter()
        for _ in range(repeats):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / repeats)
    return best * 1e6  # microseconds per call


def kernel_cases(rng):
    cases = []
    for m, k, n in ((8, 8, 8), (12, 32, 32), (14, 64, 64), (64, 64, 64), (128, 128, 128)):
        a = rng.standard_normal((m, k))
        b = rng.standard_normal((k, n))
        cases.append((f"matmul {m}x{k} @ {k}x{n}", "matmul", (a, b)))
    for rows, cols in ((12, 12), (14, 64), (64, 64)):
        x = rng.standard_normal((rows, cols))
        cases.append((f"softmax_rows {rows}x{cols}", "softmax_rows", (x,)))
        cases.append((f"log_softmax_rows {rows}x{cols}", "log_softmax_rows", (x,)))
    x = rng.standard_normal((14, 64))
    cases.append(("sigmoid 14x64", "sigmoid", (x,)))
    cases.append(("leaky_relu 14x64", "leaky_relu", (x, 0.2)))
    cases.append(("relu 14x64", "relu", (x,)))
    return cases


def bench_kernels(repeats):
    rng = np.random.default_rng(0)
    rows = []
    for label, name, args in kernel_cases(rng):
        t_py = bench(getattr(_kernels_py, name), args, repeats)
        t_cy = bench(getattr(_ckernels, name), args, repeats) if _ckernels else None
        rows.append((label, t_py, t_cy))
    adam_args = lambda: (  # noqa: E731 - fresh buffers, updates are in place
        rng.standard_normal(2048), rng.standard_normal(2048),
        np.zeros(2048), np.zeros(2048), 1e-4, 0.9, 0.999, 1e-8, 1,
    )
    rows.append((
        "adam_update 2048",
        bench(_kernels_py.adam_update, adam_args(), repeats),
        bench(_ckernels.adam_update, adam_args(), repeats) if _ckernels else None,
    ))
    return rows


def bench_train_step():
    """One tiny end-to-end training run per backend, in subprocesses so
    the import-time backend choice can differ."""
    script = (
        "import time; "
        "from syngen.synth import generate_dataset; "
        "from syngen.data import parse_sentence, SubtaskKind; "
        "from syngen.model import ModelConfig; "
        "from syngen.training import TrainConfig, train; "
        "import syngen.backend as b; "
        "sents = [parse_sentence(o) for o in generate_dataset(4, seed=1)]; "
        "cfg = TrainConfig(subtask=SubtaskKind.TRIPLET, epochs=20, batch_size=2, seed=3, "
        "model=ModelConfig(d=32, max_positions=32, dec_max_positions=32)); "
        "t0 = time.perf_counter(); train(sents, cfg); "
        "print(f'{b.BACKEND_NAME} {time.perf_counter() - t0:.3f}')"
    )
    out = {}
    for backend in ("python", "compiled"):
        env = dict(os.environ, SYNGEN_BACKEND=backend)
        proc = subprocess.run(
            [sys.executable, "-c", script], env=env, capture_output=True, text=True
        )
        if proc.returncode != 0:
            out[backend] = None
            continue
        out[backend] = float(proc.stdout.split()[-1])
    return out


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=2000)
    parser.add_argument("--skip-train", action="store_true")
    args = parser.parse_args()

    if _ckernels is None:
        print("compiled backend not built; timing the python backend only\n")

    print(f"{'kernel':36s} {'python us':>12s} {'compiled us':>12s} {'speedup':>9s}")
    for label, t_py, t_cy in bench_kernels(args.repeats):
        if t_cy is None:
            print(f"{label:36s} {t_py:12.2f} {'-':>12s} {'-':>9s}")
        else:
            print(f"{label:36s} {t_py:12.2f} {t_cy:12.2f} {t_py / t_cy:8.2f}x")

    if not args.skip_train:
        print("\nend-to-end: 20 epochs x 4 sentences, d=32 (seconds)")
        for backend, seconds in bench_train_step().items():
            print(f"  {backend:9s} {'failed' if seconds is None else f'{seconds:.3f}'}")


if __name__ == "__main__":
    main()

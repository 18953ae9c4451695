#!/usr/bin/env python3
"""Benchmark the hot LSTM kernels: numba backend vs pure-numpy fallback.

Runs the forward pass, the full gradient, and one training epoch for a few
window sizes under each backend (selected via HIMON_BACKEND in a child
process) and prints the speedups. Usage:

    python benchmarks/bench_kernels.py            # compare both backends
    python benchmarks/bench_kernels.py --iters 50
"""

import argparse
import json
import os
import subprocess
import sys
import time

CASES = [
    {"name": "window=8 batch=32", "n": 8, "batch": 32},
    {"name": "window=64 batch=32", "n": 64, "batch": 32},
    {"name": "window=256 batch=16", "n": 256, "batch": 16},
]


def run_case(n: int, batch: int, iters: int) -> dict:
    import numpy as np

    from himon import kernels, nn

    params = nn.init_dae_params(n, seed=1)
    rng = np.random.default_rng(0)
    clean = rng.normal(size=(batch, n))
    noisy = clean + rng.normal(0.0, 0.05, size=clean.shape)
    masks = nn.make_dropout_masks(params, batch, rng)
    batch_pairs = list(zip(noisy, clean))

    # Warm up (JIT compilation on the numba backend).
    kernels.warmup()
    nn.dae_batch_forward(params, clean)
    nn.dae_gradient(params, batch_pairs, masks)

    t0 = time.perf_counter()
    for _ in range(iters):
        nn.dae_batch_forward(params, clean)
    fwd = (time.perf_counter() - t0) / iters

    t0 = time.perf_counter()
    for _ in range(iters):
        nn.dae_gradient(params, batch_pairs, masks)
    grad = (time.perf_counter() - t0) / iters

    state = nn.init_adam_state(params)
    t0 = time.perf_counter()
    for _ in range(max(1, iters // 4)):
        loss, grads = nn.dae_gradient(params, batch_pairs, masks)
        params, state = nn.adam_step(params, grads, state, 1e-3)
    epoch = (time.perf_counter() - t0) / max(1, iters // 4)

    return {"backend": kernels.BACKEND, "forward_s": fwd, "gradient_s": grad,
            "train_step_s": epoch}


def child_main() -> None:
    spec = json.loads(sys.argv[2])
    print(json.dumps(run_case(spec["n"], spec["batch"], spec["iters"])))


def spawn(backend: str, case: dict, iters: int) -> dict:
    env = dict(os.environ, HIMON_BACKEND=backend)
    spec = json.dumps({"n": case["n"], "batch": case["batch"], "iters": iters})
    proc = subprocess.run([sys.executable, __file__, "--child", spec],
                          env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main() -> None:
    if len(sys.argv) > 1 and sys.argv[1] == "--child":
        child_main()
        return
    parser = argparse.ArgumentParser()
    parser.add_argument("--iters", type=int, default=20)
    args = parser.parse_args()

    print(f"{'case':<22} {'metric':<14} {'numpy':>12} {'numba':>12} {'speedup':>9}")
    for case in CASES:
        results = {b: spawn(b, case, args.iters) for b in ("numpy", "numba")}
        for metric in ("forward_s", "gradient_s", "train_step_s"):
            np_t = results["numpy"][metric]
            nb_t = results["numba"][metric]
            print(f"{case['name']:<22} {metric:<14} {np_t * 1e3:>10.3f}ms "
                  f"{nb_t * 1e3:>10.3f}ms {np_t / nb_t:>8.1f}x")


if __name__ == "__main__":
    main()

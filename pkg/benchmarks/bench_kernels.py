"""Compare the compiled and pure-numpy kernel backends.

Times the two per-batch kernels in isolation, then the end-to-end
controller step (simulation + forward + detection + update) under each
backend in a fresh interpreter, since the backend is chosen at import.

    python benchmarks/bench_kernels.py [--dim 32] [--classes 10] [--batch 64]
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from driftreset import _pykernels

try:
    from driftreset import _ckernels
except ImportError:
    _ckernels = None

END_TO_END = """
import time
from driftreset import kernels
from driftreset.controller import Controller, run_stream
from driftreset.harness import pretrained_model
from driftreset.streamsim import StreamConfig, StreamSimulator
cfg = StreamConfig(dim={dim}, n_classes={classes}, batch_size={batch})
ctrl = Controller(pretrained_model(cfg), "entropy-full")
sim = StreamSimulator(cfg)
run_stream(ctrl, sim, 200)
t = time.perf_counter()
run_stream(ctrl, sim, {steps})
dt = time.perf_counter() - t
print(kernels.BACKEND, dt / {steps})
"""


def kernel_times(mod, args, mask, repeat):
    fwd = min(timeit.repeat(lambda: mod.batch_forward(*args), number=200, repeat=repeat)) / 200
    xhat, _, probs, logp, ent = mod.batch_forward(*args)
    grad_args = (xhat, probs, logp, ent, mask, args[3])
    grad = min(timeit.repeat(lambda: mod.entropy_grad(*grad_args), number=200, repeat=repeat)) / 200
    return fwd, grad


def end_to_end(dim, classes, batch, steps, pure):
    env = dict(os.environ, DRIFTRESET_PURE="1" if pure else "0")
    code = END_TO_END.format(dim=dim, classes=classes, batch=batch, steps=steps)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    backend, per_step = out.stdout.split()
    return backend, float(per_step)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dim", type=int, default=32)
    ap.add_argument("--classes", type=int, default=10)
    ap.add_argument("--batch", type=int, default=64)
    ap.add_argument("--steps", type=int, default=3000)
    ap.add_argument("--repeat", type=int, default=5)
    a = ap.parse_args()

    rng = np.random.default_rng(0)
    x = rng.normal(size=(a.batch, a.dim))
    args = (x, rng.uniform(0.5, 1.5, a.dim), rng.normal(size=a.dim), rng.normal(size=(a.classes, a.dim)),
            rng.normal(size=a.classes), 1e-6)
    mask = rng.random(a.batch) < 0.5

    print(f"d={a.dim} C={a.classes} B={a.batch}")
    print(f"{'kernel':<16}{'python (us)':>14}{'cython (us)':>14}{'speedup':>10}")
    py = kernel_times(_pykernels, args, mask, a.repeat)
    cy = kernel_times(_ckernels, args, mask, a.repeat) if _ckernels else (float("nan"),) * 2
    for name, p, c in zip(("batch_forward", "entropy_grad"), py, cy):
        print(f"{name:<16}{p * 1e6:14.1f}{c * 1e6:14.1f}{p / c:10.2f}")

    print(f"\nend-to-end step ({a.steps} steps, entropy-full)")
    results = {}
    for pure in (True, False):
        backend, per_step = end_to_end(a.dim, a.classes, a.batch, a.steps, pure)
        results[backend] = per_step
        print(f"{backend:<8}{per_step * 1e6:10.1f} us/step {a.batch / per_step:12.0f} samples/s")
    if len(results) == 2:
        print(f"speedup {results['python'] / results['cython']:.2f}x")


if __name__ == "__main__":
    main()

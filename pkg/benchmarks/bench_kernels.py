"""Time the compiled and numpy decoding kernels on the same syndromes.

    python benchmarks/bench_kernels.py [--d 4] [--count 2000] [--repeat 3]

Prints decodes per second for each available backend and checks that the
corrections agree.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from priorqec._backend import available
from priorqec.bposd import BpOsdDecoder, PriorVector
from priorqec.codes import FAMILIES


def random_syndromes(h: np.ndarray, count: int, rate: float, rng: np.random.Generator) -> np.ndarray:
    errors = (rng.random((count, h.shape[1])) < rate).astype(np.int64)
    return (errors @ h.T.astype(np.int64) % 2).astype(np.uint8)


def time_backend(name: str, h, syndromes, priors, repeat: int) -> tuple[float, np.ndarray]:
    dec = BpOsdDecoder(h, backend=name)
    dec.decode_batch(syndromes[:4], priors)  # warm-up
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        corr, *_ = dec.decode_batch(syndromes, priors)
        best = min(best, time.perf_counter() - t0)
    return best, corr


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--code", default="rotated", choices=sorted(FAMILIES))
    ap.add_argument("--d", type=int, default=4)
    ap.add_argument("--count", type=int, default=2000)
    ap.add_argument("--rate", type=float, default=0.05)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    code = FAMILIES[args.code](args.d)
    h = code.hz.to_array()
    syn = random_syndromes(h, args.count, args.rate, np.random.default_rng(args.seed))
    priors = PriorVector.uniform(code.n, args.rate)
    print(f"{code.label}: {args.count} syndromes, error rate {args.rate}")
    results = {}
    for name in available()[::-1]:
        elapsed, corr = time_backend(name, h, syn, priors, args.repeat)
        results[name] = (elapsed, corr)
        print(f"  {name:>7}: {elapsed:8.4f} s  ({args.count / elapsed:10.0f} decodes/s)")
    if len(results) == 2:
        (tp, cp), (tc, cc) = results["python"], results["cython"]
        print(f"  speedup: {tp / tc:.1f}x, corrections identical: {np.array_equal(cp, cc)}")


if __name__ == "__main__":
    main()

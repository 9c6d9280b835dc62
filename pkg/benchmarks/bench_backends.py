#!/usr/bin/env python3
"""Compare the numba and numpy kernel backends on the hot pipeline stages.

Run from the repository root:

    python3 benchmarks/bench_backends.py [--size 320x240] [--repeat 10]

For each stage (quadratic expansion, full displacement estimation, and the
detector end to end) the script times both backends on identical inputs,
prints per-call wall times with the speedup, and reports the largest
absolute disagreement between their outputs -- the backends share the same
per-element accumulation order, so the expected disagreement is zero.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from flownav import backend
from flownav.detector import DetectorConfig, DetectorState, detect
from flownav.flow import estimate_flow, poly_expand
from flownav.flow.imops import gaussian_blur


def parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}")
    if w < 32 or h < 32:
        raise argparse.ArgumentTypeError("size must be at least 32x32")
    return w, h


def frame_pair(width: int, height: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    tex = gaussian_blur(rng.random((height, width)), 2.0)
    return tex, np.roll(np.roll(tex, 5, axis=1), 2, axis=0)


def time_call(fn, repeat: int) -> float:
    fn()  # warm: JIT compile / cache fill
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times)) * 1e3


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=parse_size, default=(320, 240),
                        help="frame size as WxH (default 320x240)")
    parser.add_argument("--repeat", type=int, default=10,
                        help="timed repetitions per stage (default 10)")
    args = parser.parse_args(argv)
    width, height = args.size

    if not backend._numba_usable():
        print("numba is not importable; nothing to compare", file=sys.stderr)
        return 1

    a, b = frame_pair(width, height, seed=7)
    cfg = DetectorConfig(work_width=width, work_height=height)

    def detect_once():
        # Fresh state per call so the five-report history cost is identical.
        detect(a, b, DetectorState(cfg), cfg)

    stages = {
        "poly_expand": lambda: poly_expand(a),
        "estimate_flow": lambda: estimate_flow(a, b),
        "detect": detect_once,
    }

    ms: dict[tuple[str, str], float] = {}
    outputs: dict[str, object] = {}
    for name in ("numpy", "numba"):
        backend.set_backend(name)
        for stage, fn in stages.items():
            ms[name, stage] = time_call(fn, args.repeat)
        outputs[name] = estimate_flow(a, b)

    ref, jit = outputs["numpy"], outputs["numba"]
    d_diff = float(np.abs(ref.d - jit.d).max())
    e_diff = float(np.abs(ref.e - jit.e).max())
    valid_same = bool(np.array_equal(ref.valid, jit.valid))

    print(f"frame {width}x{height}, median of {args.repeat} runs, times in ms\n")
    print(f"{'stage':<16}{'numpy':>10}{'numba':>10}{'speedup':>10}")
    for stage in stages:
        t_np, t_nb = ms["numpy", stage], ms["numba", stage]
        print(f"{stage:<16}{t_np:>10.2f}{t_nb:>10.2f}{t_np / t_nb:>9.1f}x")
    print(f"\nbackend agreement on the displacement field: "
          f"max |d| diff {d_diff:.2e}, max |e| diff {e_diff:.2e}, "
          f"valid masks identical: {valid_same}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

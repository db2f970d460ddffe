"""Benchmark the compiled kernels against the numpy fallback.

Run as `python -m fusionsort.bench`.  Times forward plus backward for the
three hot kernels on training-shaped inputs and prints the per-call best
of N repeats for whichever backends are importable.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from ._kernels import py_kernels


def _load_compiled():
    try:
        from ._kernels import _ckernels
        return _ckernels
    except ImportError:
        return None


def _workloads(rng: np.random.Generator):
    x = rng.standard_normal((2, 16, 32, 32))
    w = rng.standard_normal((32, 16, 3, 3)) * 0.1
    g_conv = rng.standard_normal((2, 32, 32, 32))

    def conv(mod):
        out = mod.conv2d_forward(x, w, 1, 1, 1)
        mod.conv2d_backward_input(g_conv, w, 32, 32, 1, 1, 1)
        mod.conv2d_backward_weight(g_conv, x, 3, 3, 1, 1, 1)
        return out

    u = rng.standard_normal((2, 256, 32))
    delta = np.abs(rng.standard_normal((2, 256, 32))) + 0.1
    a = -np.abs(rng.standard_normal((32, 4))) - 0.1
    b = rng.standard_normal((2, 256, 4))
    c = rng.standard_normal((2, 256, 4))
    d = rng.standard_normal(32)
    g_scan = rng.standard_normal((2, 256, 32))

    def scan(mod):
        y, h_all = mod.ssm_scan_forward(u, delta, a, b, c, d)
        mod.ssm_scan_backward(g_scan, u, delta, a, b, c, d, np.asarray(h_all))
        return y

    wd = rng.standard_normal((32, 3))

    def dwconv(mod):
        y = mod.dwconv1d_forward(u, wd)
        mod.dwconv1d_backward(g_scan, u, wd)
        return y

    return [("conv2d 2x16x32x32 k3", conv),
            ("ssm_scan B2 L256 D32 N4", scan),
            ("dwconv1d B2 L256 D32 K3", dwconv)]


def _best_time(fn, mod, repeat: int) -> float:
    fn(mod)  # warm up
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn(mod)
        best = min(best, time.perf_counter() - start)
    return best


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fusionsort.bench")
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    compiled = _load_compiled()
    rng = np.random.default_rng(args.seed)
    workloads = _workloads(rng)

    print(f"{'kernel':<28} {'numpy':>12} {'compiled':>12} {'speedup':>9}")
    for name, fn in workloads:
        t_py = _best_time(fn, py_kernels, args.repeat)
        if compiled is None:
            print(f"{name:<28} {t_py * 1e3:>10.3f}ms {'n/a':>12} {'n/a':>9}")
            continue
        ref = fn(py_kernels)
        got = fn(compiled)
        if not np.allclose(np.asarray(ref), np.asarray(got), atol=1e-10):
            raise AssertionError(f"backends disagree on {name}")
        t_c = _best_time(fn, compiled, args.repeat)
        print(f"{name:<28} {t_py * 1e3:>10.3f}ms {t_c * 1e3:>10.3f}ms {t_py / t_c:>8.1f}x")
    if compiled is None:
        print("compiled backend unavailable; showing numpy fallback only")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

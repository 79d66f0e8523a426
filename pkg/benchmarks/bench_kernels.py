"""Time the compiled spatial-attention kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 20]

Prints one line per (size, pass) with the best wall time of each backend and
the speed ratio, after checking that both backends agree to 1e-12.
"""

import argparse
import timeit

import numpy as np

from divattn import _kernels_py
from divattn.kernels import BACKEND

try:
    from divattn import _kernels as compiled
except ImportError:
    compiled = None

SIZES = {
    # name: (N, L, D, K, d)
    "tiny": (3, 6, 5, 2, 3),
    "default": (6, 32, 64, 6, 16),
    "wide": (6, 128, 256, 6, 64),
}


def make_inputs(N, L, D, K, d, seed=0):
    rng = np.random.default_rng(seed)
    F = rng.standard_normal((N, L, D))
    Ws = 0.3 * rng.standard_normal((K, d, D))
    bs = 0.1 * rng.standard_normal((K, d))
    ws2 = rng.standard_normal((K, d))
    bs2 = rng.standard_normal(K)
    gX = rng.standard_normal((N, K, D))
    gS = rng.standard_normal((N, K, L))
    return F, Ws, bs, ws2, bs2, gX, gS


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=20)
    args = p.parse_args(argv)
    print(f"active backend: {BACKEND}")
    if compiled is None:
        print("compiled extension not built; nothing to compare")
        return 0
    print(f"{'size':8s} {'pass':8s} {'numpy_ms':>10s} {'cython_ms':>10s} {'speedup':>8s}")
    for name, dims in SIZES.items():
        F, Ws, bs, ws2, bs2, gX, gS = make_inputs(*dims)
        out_py = _kernels_py.spatial_forward(F, Ws, bs, ws2, bs2)
        out_c = compiled.spatial_forward(F, Ws, bs, ws2, bs2)
        for a, b in zip(out_py, out_c):
            np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)
        H, _, S, _ = out_py
        fwd = {
            "numpy": lambda: _kernels_py.spatial_forward(F, Ws, bs, ws2, bs2),
            "cython": lambda: compiled.spatial_forward(F, Ws, bs, ws2, bs2),
        }
        bwd = {
            "numpy": lambda: _kernels_py.spatial_backward(F, Ws, ws2, H, S, gX, gS),
            "cython": lambda: compiled.spatial_backward(F, Ws, ws2, H, S, gX, gS),
        }
        for label, fns in (("forward", fwd), ("backward", bwd)):
            t_py, t_c = best(fns["numpy"], args.repeat), best(fns["cython"], args.repeat)
            print(f"{name:8s} {label:8s} {1e3 * t_py:10.3f} {1e3 * t_c:10.3f} {t_py / t_c:8.2f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

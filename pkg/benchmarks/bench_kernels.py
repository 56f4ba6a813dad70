"""Time the compiled kernels against the pure-Python reference.

    python benchmarks/bench_kernels.py [--repeat N]

Each kernel runs on identical inputs under both backends; outputs are
checked for bit equality before timings are reported.
"""

import argparse
import random
import sys
import timeit
from array import array

from symkit import _backend


def _rand(rng, n):
    return array("d", [rng.uniform(-1, 1) for _ in range(n)])


def cases(rng):
    m, k, n = 64, 64, 64
    a, b = _rand(rng, m * k), _rand(rng, k * n)
    c, h, w = 16, 24, 24
    f = _rand(rng, c * h * w)
    kern = _rand(rng, c * 9)
    bias = _rand(rng, c)
    gamma, beta = array("d", [1.0] * n), array("d", [0.0] * n)
    bumps = array("d", [12.0, 12.0, 3.0, 1.0, 30.0, 20.0, 3.0, 0.6])
    scores = _rand(rng, 49 * 49)
    return {
        "matmul 64x64x64": lambda K: K.matmul(a, b, m, k, n),
        "softmax_rows 64x64": lambda K: K.softmax_rows(a, m, n),
        "layer_norm 64x64": lambda K: K.layer_norm(a, m, n, gamma, beta, 1e-5),
        "sigmoid 4096": lambda K: K.sigmoid(a),
        "depthwise_conv 16x24x24 k3": lambda K: K.depthwise_conv(f, c, h, w, kern, 3, bias),
        "gaussian_map 49x49, 2 bumps": lambda K: K.gaussian_map(0.0, 0.0, 1.0, 49, 49, bumps),
        "hann_peak 49x49": lambda K: K.hann_peak(scores, 49, 49),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20, help="calls per timing (default: 20)")
    args = ap.parse_args(argv)
    if "cython" not in _backend.available():
        print("compiled extension not built; only the python backend is available", file=sys.stderr)
        return 1
    py, cy = _backend.get("python"), _backend.get("cython")
    print(f"{'kernel':<30}{'python ms':>12}{'cython ms':>12}{'speedup':>10}")
    for name, fn in cases(random.Random(0)).items():
        if fn(py) != fn(cy):
            print(f"{name}: backends disagree", file=sys.stderr)
            return 1
        t_py = min(timeit.repeat(lambda: fn(py), number=args.repeat, repeat=3)) / args.repeat * 1e3
        t_cy = min(timeit.repeat(lambda: fn(cy), number=args.repeat, repeat=3)) / args.repeat * 1e3
        print(f"{name:<30}{t_py:>12.3f}{t_cy:>12.4f}{t_py / t_cy:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Pure-Python reference kernels.

Every function here has a compiled twin in ``_ckernels.pyx`` with the same
signature and the same floating-point operation order, so both backends
produce bit-identical results. Buffers are flat row-major ``array('d')``.
"""

from array import array
from math import cos, exp, pi, sqrt

NAME = "python"


def _zeros(n):
    return array("d", bytes(8 * n))


def matmul(a, b, m, k, n):
    out = _zeros(m * n)
    for i in range(m):
        row = i * k
        for j in range(n):
            acc = 0.0
            for t in range(k):
                acc += a[row + t] * b[t * n + j]
            out[i * n + j] = acc
    return out


def softmax_rows(a, m, n):
    out = _zeros(m * n)
    for i in range(m):
        base = i * n
        top = a[base]
        for j in range(1, n):
            if a[base + j] > top:
                top = a[base + j]
        total = 0.0
        for j in range(n):
            e = exp(a[base + j] - top)
            out[base + j] = e
            total += e
        for j in range(n):
            out[base + j] = out[base + j] / total
    return out


def layer_norm(a, m, n, gamma, beta, eps):
    out = _zeros(m * n)
    for i in range(m):
        base = i * n
        total = 0.0
        for j in range(n):
            total += a[base + j]
        mean = total / n
        sq = 0.0
        for j in range(n):
            d = a[base + j] - mean
            sq += d * d
        inv = 1.0 / sqrt(sq / n + eps)
        for j in range(n):
            out[base + j] = (a[base + j] - mean) * inv * gamma[j] + beta[j]
    return out


def sigmoid(a):
    out = _zeros(len(a))
    for i in range(len(a)):
        x = a[i]
        if x >= 0.0:
            out[i] = 1.0 / (1.0 + exp(-x))
        else:
            e = exp(x)
            out[i] = e / (1.0 + e)
    return out


def conv1x1(f, c, h, w, weight, bias, k):
    hw = h * w
    out = _zeros(k * hw)
    for o in range(k):
        for s in range(hw):
            acc = 0.0
            for ch in range(c):
                acc += weight[o * c + ch] * f[ch * hw + s]
            out[o * hw + s] = acc + bias[o]
    return out


def depthwise_conv(f, c, h, w, kernels, ks, bias):
    pad = (ks - 1) // 2
    hw = h * w
    kk = ks * ks
    out = _zeros(c * hw)
    for ch in range(c):
        fbase = ch * hw
        kbase = ch * kk
        for y in range(h):
            for x in range(w):
                acc = 0.0
                for u in range(ks):
                    yy = y + u - pad
                    if yy < 0 or yy >= h:
                        continue
                    for v in range(ks):
                        xx = x + v - pad
                        if xx < 0 or xx >= w:
                            continue
                        acc += kernels[kbase + u * ks + v] * f[fbase + yy * w + xx]
                out[fbase + y * w + x] = acc + bias[ch]
    return out


def gaussian_map(x0, y0, cell, rows, cols, bumps):
    """Sum of isotropic Gaussian bumps sampled at cell centres.

    ``bumps`` is flat ``(cx, cy, sigma, amplitude)`` quadruples. Each bump is
    separable, so it is built from one row profile and one column profile.
    """
    nb = len(bumps) // 4
    ex = []
    ey = []
    for b in range(nb):
        cx, cy, s, amp = bumps[4 * b:4 * b + 4]
        k = 2.0 * s * s
        ex.append([amp * exp(-(d * d) / k) for d in (x0 + (c + 0.5) * cell - cx for c in range(cols))])
        ey.append([exp(-(d * d) / k) for d in (y0 + (r + 0.5) * cell - cy for r in range(rows))])
    out = _zeros(rows * cols)
    for r in range(rows):
        row = [0.0] * cols
        for b in range(nb):
            w = ey[b][r]
            row = [v + w * e for v, e in zip(row, ex[b])]
        out[r * cols:(r + 1) * cols] = array("d", row)
    return out


def hann_window(n):
    if n == 1:
        return array("d", [1.0])
    return array("d", [0.5 * (1.0 - cos(2.0 * pi * i / (n - 1))) for i in range(n)])


def hann_peak(scores, h, w):
    wr = hann_window(h)
    wc = hann_window(w)
    best = scores[0] * wr[0] * wc[0]
    br = 0
    bc = 0
    for r in range(h):
        for c in range(w):
            v = scores[r * w + c] * wr[r] * wc[c]
            if v > best:
                best = v
                br = r
                bc = c
    return best, br, bc

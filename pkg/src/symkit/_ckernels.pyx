# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_kernels_py``.

Operation order mirrors the Python reference line for line; the extension is
built with ``-ffp-contract=off`` so no fused multiply-adds change rounding.
"""

from cpython cimport array
import array
from libc.math cimport cos, exp, sqrt, M_PI

NAME = "cython"

cdef array.array _template = array.array("d", [])


cdef inline array.array _zeros(Py_ssize_t n):
    return array.clone(_template, n, zero=True)


def matmul(const double[::1] a, const double[::1] b, Py_ssize_t m, Py_ssize_t k, Py_ssize_t n):
    cdef array.array out = _zeros(m * n)
    cdef double[::1] o = out
    cdef Py_ssize_t i, j, t, row
    cdef double acc
    for i in range(m):
        row = i * k
        for j in range(n):
            acc = 0.0
            for t in range(k):
                acc += a[row + t] * b[t * n + j]
            o[i * n + j] = acc
    return out


def softmax_rows(const double[::1] a, Py_ssize_t m, Py_ssize_t n):
    cdef array.array out = _zeros(m * n)
    cdef double[::1] o = out
    cdef Py_ssize_t i, j, base
    cdef double top, total, e
    for i in range(m):
        base = i * n
        top = a[base]
        for j in range(1, n):
            if a[base + j] > top:
                top = a[base + j]
        total = 0.0
        for j in range(n):
            e = exp(a[base + j] - top)
            o[base + j] = e
            total += e
        for j in range(n):
            o[base + j] = o[base + j] / total
    return out


def layer_norm(const double[::1] a, Py_ssize_t m, Py_ssize_t n,
               const double[::1] gamma, const double[::1] beta, double eps):
    cdef array.array out = _zeros(m * n)
    cdef double[::1] o = out
    cdef Py_ssize_t i, j, base
    cdef double total, mean, sq, d, inv
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
            o[base + j] = (a[base + j] - mean) * inv * gamma[j] + beta[j]
    return out


def sigmoid(const double[::1] a):
    cdef Py_ssize_t n = a.shape[0]
    cdef array.array out = _zeros(n)
    cdef double[::1] o = out
    cdef Py_ssize_t i
    cdef double x, e
    for i in range(n):
        x = a[i]
        if x >= 0.0:
            o[i] = 1.0 / (1.0 + exp(-x))
        else:
            e = exp(x)
            o[i] = e / (1.0 + e)
    return out


def conv1x1(const double[::1] f, Py_ssize_t c, Py_ssize_t h, Py_ssize_t w,
            const double[::1] weight, const double[::1] bias, Py_ssize_t k):
    cdef Py_ssize_t hw = h * w
    cdef array.array out = _zeros(k * hw)
    cdef double[::1] o = out
    cdef Py_ssize_t oc, s, ch
    cdef double acc
    for oc in range(k):
        for s in range(hw):
            acc = 0.0
            for ch in range(c):
                acc += weight[oc * c + ch] * f[ch * hw + s]
            o[oc * hw + s] = acc + bias[oc]
    return out


def depthwise_conv(const double[::1] f, Py_ssize_t c, Py_ssize_t h, Py_ssize_t w,
                   const double[::1] kernels, Py_ssize_t ks, const double[::1] bias):
    cdef Py_ssize_t pad = (ks - 1) // 2
    cdef Py_ssize_t hw = h * w
    cdef Py_ssize_t kk = ks * ks
    cdef array.array out = _zeros(c * hw)
    cdef double[::1] o = out
    cdef Py_ssize_t ch, y, x, u, v, yy, xx, fbase, kbase
    cdef double acc
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
                o[fbase + y * w + x] = acc + bias[ch]
    return out


def gaussian_map(double x0, double y0, double cell, Py_ssize_t rows, Py_ssize_t cols,
                 const double[::1] bumps):
    cdef array.array out = _zeros(rows * cols)
    cdef double[::1] o = out
    cdef Py_ssize_t nb = bumps.shape[0] // 4
    cdef array.array exa = _zeros(nb * cols)
    cdef array.array eya = _zeros(nb * rows)
    cdef double[::1] ex = exa
    cdef double[::1] ey = eya
    cdef Py_ssize_t r, c, b
    cdef double d, k, w
    for b in range(nb):
        k = 2.0 * bumps[4 * b + 2] * bumps[4 * b + 2]
        for c in range(cols):
            d = x0 + (c + 0.5) * cell - bumps[4 * b]
            ex[b * cols + c] = bumps[4 * b + 3] * exp(-(d * d) / k)
        for r in range(rows):
            d = y0 + (r + 0.5) * cell - bumps[4 * b + 1]
            ey[b * rows + r] = exp(-(d * d) / k)
    for r in range(rows):
        for b in range(nb):
            w = ey[b * rows + r]
            for c in range(cols):
                o[r * cols + c] = o[r * cols + c] + w * ex[b * cols + c]
    return out


def hann_window(Py_ssize_t n):
    cdef array.array out = _zeros(n)
    cdef double[::1] o = out
    cdef Py_ssize_t i
    if n == 1:
        o[0] = 1.0
        return out
    for i in range(n):
        o[i] = 0.5 * (1.0 - cos(2.0 * M_PI * i / (n - 1)))
    return out


def hann_peak(const double[::1] scores, Py_ssize_t h, Py_ssize_t w):
    cdef double[::1] wr = hann_window(h)
    cdef double[::1] wc = hann_window(w)
    cdef double best = scores[0] * wr[0] * wc[0]
    cdef Py_ssize_t br = 0, bc = 0, r, c
    cdef double v
    for r in range(h):
        for c in range(w):
            v = scores[r * w + c] * wr[r] * wc[c]
            if v > best:
                best = v
                br = r
                bc = c
    return best, br, bc

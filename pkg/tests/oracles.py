"""Independent reference implementations used by the tests.

Written against numpy or plain loops, never against the package kernels.
"""

import math
import random

import numpy as np


def naive_attention(q, k, v, heads, wq, wk, wv, wo):
    """Triple-loop multi-head attention over nested lists."""
    nq, d = len(q), len(q[0])
    nk = len(k)
    dh = d // heads

    def proj(x, w):
        return [[sum(row[t] * w[t][j] for t in range(d)) for j in range(d)] for row in x]

    qp, kp, vp = proj(q, wq), proj(k, wk), proj(v, wv)
    concat = [[0.0] * d for _ in range(nq)]
    for h in range(heads):
        lo = h * dh
        for i in range(nq):
            logits = []
            for j in range(nk):
                s = 0.0
                for t in range(dh):
                    s += qp[i][lo + t] * kp[j][lo + t]
                logits.append(s / math.sqrt(dh))
            m = max(logits)
            e = [math.exp(x - m) for x in logits]
            z = sum(e)
            for t in range(dh):
                concat[i][lo + t] = sum(e[j] / z * vp[j][lo + t] for j in range(nk))
    return proj(concat, wo)


def np_depthwise(f, kernels, bias):
    c, h, w = f.shape
    k = kernels.shape[1]
    p = k // 2
    padded = np.pad(f, ((0, 0), (p, p), (p, p)))
    out = np.zeros_like(f)
    for ch in range(c):
        for r in range(h):
            for col in range(w):
                out[ch, r, col] = np.sum(padded[ch, r:r + k, col:col + k] * kernels[ch]) + bias[ch]
    return out


def np_layer_norm(x, gamma, beta, eps):
    mu = x.mean(axis=1, keepdims=True)
    var = x.var(axis=1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps) * gamma + beta


def raster_iou(a, b):
    """IoU of integer boxes by counting covered unit pixels."""
    size = 130
    ga = np.zeros((size, size), bool)
    gb = np.zeros((size, size), bool)
    ga[a[1]:a[1] + a[3], a[0]:a[0] + a[2]] = True
    gb[b[1]:b[1] + b[3], b[0]:b[0] + b[2]] = True
    union = np.logical_or(ga, gb).sum()
    return 0.0 if union == 0 else np.logical_and(ga, gb).sum() / union


def random_matrix(rng: random.Random, rows, cols, scale=1.0):
    return [[rng.uniform(-scale, scale) for _ in range(cols)] for _ in range(rows)]

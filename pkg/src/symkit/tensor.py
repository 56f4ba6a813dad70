"""Minimal dense tensor type and the numeric primitives used by PTR and CEC.

Storage is a flat row-major ``array('d')``; all shapes are explicit and the
only broadcasting is scalar/per-channel bias addition inside the kernels.
"""

from __future__ import annotations

import math
from array import array
from typing import Iterable, Sequence

from ._backend import kernels as _k


class ShapeError(ValueError):
    pass


def _prod(dims: Iterable[int]) -> int:
    n = 1
    for d in dims:
        n *= d
    return n


class Tensor:
    __slots__ = ("shape", "data")

    def __init__(self, shape: Sequence[int], data=None):
        shape = tuple(int(d) for d in shape)
        if not shape or any(d <= 0 for d in shape):
            raise ShapeError(f"dimensions must be positive, got {shape}")
        n = _prod(shape)
        if data is None:
            data = array("d", bytes(8 * n))
        elif not isinstance(data, array) or data.typecode != "d":
            data = array("d", data)
        if len(data) != n:
            raise ShapeError(f"shape {shape} needs {n} values, got {len(data)}")
        self.shape = shape
        self.data = data

    @classmethod
    def zeros(cls, *shape: int) -> "Tensor":
        return cls(shape)

    @classmethod
    def full(cls, shape: Sequence[int], value: float) -> "Tensor":
        return cls(shape, array("d", [float(value)]) * _prod(shape))

    @classmethod
    def eye(cls, n: int) -> "Tensor":
        t = cls((n, n))
        for i in range(n):
            t.data[i * n + i] = 1.0
        return t

    @classmethod
    def from_list(cls, nested) -> "Tensor":
        """Build from a (possibly nested) list of numbers; ragged input is rejected."""
        shape = []
        probe = nested
        while isinstance(probe, (list, tuple)):
            if not probe:
                raise ShapeError("empty dimension")
            shape.append(len(probe))
            probe = probe[0]
        flat: list[float] = []

        def walk(node, depth):
            if depth == len(shape):
                flat.append(float(node))
                return
            if not isinstance(node, (list, tuple)) or len(node) != shape[depth]:
                raise ShapeError("ragged nested list")
            for item in node:
                walk(item, depth + 1)

        walk(nested, 0)
        return cls(shape or (1,), flat)

    @property
    def size(self) -> int:
        return len(self.data)

    @property
    def ndim(self) -> int:
        return len(self.shape)

    def _offset(self, idx: Sequence[int]) -> int:
        if len(idx) != len(self.shape):
            raise IndexError(f"expected {len(self.shape)} indices, got {len(idx)}")
        off = 0
        for i, d in zip(idx, self.shape):
            if not 0 <= i < d:
                raise IndexError(f"index {tuple(idx)} out of range for shape {self.shape}")
            off = off * d + i
        return off

    def __getitem__(self, idx) -> float:
        if not isinstance(idx, tuple):
            idx = (idx,)
        return self.data[self._offset(idx)]

    def __setitem__(self, idx, value: float) -> None:
        if not isinstance(idx, tuple):
            idx = (idx,)
        self.data[self._offset(idx)] = value

    def reshape(self, *shape: int) -> "Tensor":
        return Tensor(shape, array("d", self.data))

    def copy(self) -> "Tensor":
        return Tensor(self.shape, array("d", self.data))

    def tolist(self):
        def build(off, depth):
            if depth == len(self.shape) - 1:
                return list(self.data[off:off + self.shape[-1]])
            stride = _prod(self.shape[depth + 1:])
            return [build(off + i * stride, depth + 1) for i in range(self.shape[depth])]

        return build(0, 0)

    def __eq__(self, other) -> bool:
        return isinstance(other, Tensor) and self.shape == other.shape and self.data == other.data

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"


def is_finite(t: Tensor) -> bool:
    return all(math.isfinite(v) for v in t.data)


def max_abs_diff(a: Tensor, b: Tensor) -> float:
    _same_shape(a, b)
    return max((abs(x - y) for x, y in zip(a.data, b.data)), default=0.0)


def _same_shape(a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")


def _require_2d(t: Tensor, name: str) -> tuple[int, int]:
    if t.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {t.shape}")
    return t.shape


# -- elementwise / structural -------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b)
    return Tensor(a.shape, array("d", [x + y for x, y in zip(a.data, b.data)]))


def scale(a: Tensor, s: float) -> Tensor:
    return Tensor(a.shape, array("d", [x * s for x in a.data]))


def transpose(a: Tensor) -> Tensor:
    m, n = _require_2d(a, "transpose input")
    d = a.data
    return Tensor((n, m), array("d", [d[i * n + j] for j in range(n) for i in range(m)]))


def columns(a: Tensor, start: int, stop: int) -> Tensor:
    m, n = _require_2d(a, "columns input")
    if not 0 <= start < stop <= n:
        raise ShapeError(f"column range [{start}, {stop}) invalid for shape {a.shape}")
    out = array("d")
    for i in range(m):
        out.extend(a.data[i * n + start:i * n + stop])
    return Tensor((m, stop - start), out)


def concat_columns(parts: Sequence[Tensor]) -> Tensor:
    if not parts:
        raise ShapeError("nothing to concatenate")
    m = _require_2d(parts[0], "concat part")[0]
    for p in parts:
        if _require_2d(p, "concat part")[0] != m:
            raise ShapeError(f"row counts differ: {[q.shape for q in parts]}")
    out = array("d")
    for i in range(m):
        for p in parts:
            n = p.shape[1]
            out.extend(p.data[i * n:(i + 1) * n])
    return Tensor((m, sum(p.shape[1] for p in parts)), out)


def gate(f: Tensor, mask: Tensor) -> Tensor:
    """Multiply a ``C×H×W`` map by a single ``H×W`` plane, shared across channels."""
    if f.ndim != 3 or mask.ndim != 2 or f.shape[1:] != mask.shape:
        raise ShapeError(f"cannot gate feature map {f.shape} with mask {mask.shape}")
    c = f.shape[0]
    hw = mask.size
    m = mask.data
    src = f.data
    out = array("d", bytes(8 * f.size))
    for ch in range(c):
        base = ch * hw
        for s in range(hw):
            out[base + s] = src[base + s] * m[s]
    return Tensor(f.shape, out)


# -- kernels ------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    m, k = a.shape
    n = b.shape[1]
    return Tensor((m, n), _k.matmul(a.data, b.data, m, k, n))


def softmax_rows(a: Tensor) -> Tensor:
    m, n = _require_2d(a, "softmax input")
    return Tensor((m, n), _k.softmax_rows(a.data, m, n))


def layer_norm(a: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    m, n = _require_2d(a, "layer_norm input")
    if gamma.shape != (n,) or beta.shape != (n,):
        raise ShapeError(f"gamma/beta must have shape ({n},), got {gamma.shape}, {beta.shape}")
    if not eps > 0:
        raise ValueError("eps must be positive")
    return Tensor((m, n), _k.layer_norm(a.data, m, n, gamma.data, beta.data, float(eps)))


def sigmoid(a: Tensor) -> Tensor:
    return Tensor(a.shape, _k.sigmoid(a.data))


def mean_rows(a: Tensor) -> Tensor:
    """Column-wise arithmetic mean of an ``N×C`` token matrix."""
    if a.ndim != 2:
        raise ShapeError(f"mean_rows expects N×C, got {a.shape}")
    n, c = a.shape
    out = array("d", bytes(8 * c))
    d = a.data
    for j in range(c):
        acc = 0.0
        for i in range(n):
            acc += d[i * c + j]
        out[j] = acc / n
    return Tensor((c,), out)


def conv1x1(f: Tensor, w: Tensor, b: Tensor) -> Tensor:
    if f.ndim != 3 or w.ndim != 2 or w.shape[1] != f.shape[0] or b.shape != (w.shape[0],):
        raise ShapeError(f"conv1x1 shape mismatch: input {f.shape}, weight {w.shape}, bias {b.shape}")
    c, h, wd = f.shape
    k = w.shape[0]
    return Tensor((k, h, wd), _k.conv1x1(f.data, c, h, wd, w.data, b.data, k))


def depthwise_conv(f: Tensor, kernels: Tensor, bias: Tensor) -> Tensor:
    """Per-channel 2-D correlation with zero 'same' padding plus a per-channel bias."""
    if f.ndim != 3 or kernels.ndim != 3:
        raise ShapeError(f"depthwise_conv expects C×H×W and C×k×k, got {f.shape}, {kernels.shape}")
    c, h, w = f.shape
    ks = kernels.shape[1]
    if kernels.shape != (c, ks, ks) or bias.shape != (c,):
        raise ShapeError(f"depthwise_conv shape mismatch: input {f.shape}, kernels {kernels.shape}, bias {bias.shape}")
    if ks % 2 == 0:
        raise ValueError(f"kernel size must be odd, got {ks}")
    return Tensor(f.shape, _k.depthwise_conv(f.data, c, h, w, kernels.data, ks, bias.data))


def conv2d_single(f: Tensor, weight: Tensor, bias: float) -> Tensor:
    """Full ``C -> 1`` convolution with odd ``k×k`` kernels, zero padding, stride 1.

    ``weight`` has shape ``1×C×k×k``; the result is ``H×W``.
    """
    if f.ndim != 3 or weight.ndim != 4 or weight.shape[0] != 1 or weight.shape[1] != f.shape[0]:
        raise ShapeError(f"conv2d_single shape mismatch: input {f.shape}, weight {weight.shape}")
    c, h, w = f.shape
    ks = weight.shape[2]
    per_channel = depthwise_conv(f, Tensor((c, ks, ks), weight.data), Tensor((c,)))
    summed = conv1x1(per_channel, Tensor.full((1, c), 1.0), Tensor((1,), [bias]))
    return Tensor((h, w), summed.data)


def multi_head_cross_attention(
    q: Tensor,
    k: Tensor,
    v: Tensor,
    heads: int,
    wq: Tensor,
    wk: Tensor,
    wv: Tensor,
    wo: Tensor,
) -> Tensor:
    """Scaled dot-product attention of ``q`` rows over ``k``/``v`` rows.

    Projections act on row vectors (``x @ W``), all ``d×d``. Each head sees a
    contiguous slice of ``d / heads`` columns and is scaled by ``1/sqrt(d/heads)``.
    """
    nq, d = _require_2d(q, "query")
    nk, dk = _require_2d(k, "key")
    if dk != d or v.shape != (nk, d):
        raise ShapeError(f"attention shape mismatch: q {q.shape}, k {k.shape}, v {v.shape}")
    for name, w in (("wq", wq), ("wk", wk), ("wv", wv), ("wo", wo)):
        if w.shape != (d, d):
            raise ShapeError(f"{name} must be {d}x{d}, got {w.shape}")
    if heads < 1 or d % heads:
        raise ValueError(f"model dim {d} not divisible by {heads} heads")
    dh = d // heads
    qp, kp, vp = matmul(q, wq), matmul(k, wk), matmul(v, wv)
    inv = 1.0 / math.sqrt(dh)
    outs = []
    for h in range(heads):
        qh = columns(qp, h * dh, (h + 1) * dh)
        kh = columns(kp, h * dh, (h + 1) * dh)
        vh = columns(vp, h * dh, (h + 1) * dh)
        attn = softmax_rows(scale(matmul(qh, transpose(kh)), inv))
        outs.append(matmul(attn, vh))
    return matmul(concat_columns(outs), wo)


# -- debug text format --------------------------------------------------------


def dumps(t: Tensor) -> str:
    """``shape: d1 d2 ...`` header, then one line per innermost row."""
    lines = ["shape: " + " ".join(str(d) for d in t.shape)]
    n = t.shape[-1]
    for i in range(0, t.size, n):
        lines.append(" ".join(repr(x) for x in t.data[i:i + n]))
    return "\n".join(lines) + "\n"


def loads(text: str) -> Tensor:
    head, _, body = text.partition("\n")
    if not head.startswith("shape:"):
        raise ValueError("tensor text must start with 'shape:'")
    shape = [int(tok) for tok in head[len("shape:"):].split()]
    return Tensor(shape, [float(tok) for tok in body.split()])

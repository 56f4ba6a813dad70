"""Predictive token rectification.

Template tokens are averaged into a semantic query, an MLP maps the query to a
per-channel modulation field, and the field is injected as the bias of a
depthwise correlation over the search features. A 1x1 convolution collapses
the result to one plane, whose sigmoid gates every channel of the search map.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .bundle import load_bundle, save_bundle
from .tensor import (
    ShapeError,
    Tensor,
    conv1x1,
    depthwise_conv,
    gate,
    matmul,
    mean_rows,
    sigmoid,
)

DEFAULT_SEED = 1234


def _gelu(x: float) -> float:
    return 0.5 * x * (1.0 + math.erf(x / math.sqrt(2.0)))


ACTIVATIONS = {
    "gelu": _gelu,
    "relu": lambda x: x if x > 0.0 else 0.0,
    "tanh": math.tanh,
    "identity": lambda x: x,
}


@dataclass(frozen=True)
class PtrWeights:
    mlp_layers: tuple  # ((weight out×in, bias out), ...)
    dw_kernels: Tensor
    conv1_w: Tensor
    conv1_b: Tensor
    activation: str = "gelu"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if not self.mlp_layers:
            raise ShapeError("mapping network needs at least one layer")
        c = self.dw_kernels.shape[0]
        width = c
        for i, (w, b) in enumerate(self.mlp_layers):
            if w.ndim != 2 or w.shape[1] != width or b.shape != (w.shape[0],):
                raise ShapeError(f"mlp layer {i}: weight {w.shape}, bias {b.shape} after width {width}")
            width = w.shape[0]
        if width != c:
            raise ShapeError(f"mapping network must end at {c} channels, ends at {width}")
        k = self.dw_kernels.shape[1]
        if self.dw_kernels.shape != (c, k, k) or k % 2 == 0:
            raise ShapeError(f"dw_kernels must be C×k×k with odd k, got {self.dw_kernels.shape}")
        if self.conv1_w.shape != (1, c) or self.conv1_b.shape != (1,):
            raise ShapeError(f"conv1 must map {c} channels to 1, got {self.conv1_w.shape}, {self.conv1_b.shape}")

    @property
    def channels(self) -> int:
        return self.dw_kernels.shape[0]

    @property
    def kernel_size(self) -> int:
        return self.dw_kernels.shape[1]

    @classmethod
    def neutral(cls, channels: int, kernel_size: int = 3, hidden: int | None = None,
                layers: int = 2, activation: str = "gelu") -> "PtrWeights":
        """Zero MLP, delta depthwise kernels, zero 1x1 conv: the mask is exactly 0.5."""
        widths = _widths(channels, hidden, layers)
        mlp = tuple((Tensor((o, i)), Tensor((o,))) for i, o in zip(widths, widths[1:]))
        dw = Tensor((channels, kernel_size, kernel_size))
        mid = (kernel_size - 1) // 2
        for c in range(channels):
            dw[c, mid, mid] = 1.0
        return cls(mlp, dw, Tensor((1, channels)), Tensor((1,)), activation)

    @classmethod
    def random(cls, channels: int, kernel_size: int = 3, hidden: int | None = None,
               layers: int = 2, activation: str = "gelu", seed: int = DEFAULT_SEED) -> "PtrWeights":
        rng = random.Random(seed)
        widths = _widths(channels, hidden, layers)
        mlp = tuple(
            (_gauss((o, i), rng, 1.0 / math.sqrt(i)), _gauss((o,), rng, 0.1))
            for i, o in zip(widths, widths[1:])
        )
        dw = _gauss((channels, kernel_size, kernel_size), rng, 1.0 / kernel_size)
        conv1_w = _gauss((1, channels), rng, 1.0 / math.sqrt(channels))
        return cls(mlp, dw, conv1_w, _gauss((1,), rng, 0.1), activation)

    def save(self, directory):
        tensors = {}
        for i, (w, b) in enumerate(self.mlp_layers):
            tensors[f"mlp.{i}.weight"] = w
            tensors[f"mlp.{i}.bias"] = b
        tensors.update(dw_kernels=self.dw_kernels, conv1_w=self.conv1_w, conv1_b=self.conv1_b)
        return save_bundle(directory, "ptr", tensors, {"activation": self.activation})

    @classmethod
    def load(cls, directory) -> "PtrWeights":
        tensors, meta = load_bundle(directory, "ptr")
        layers = []
        i = 0
        while f"mlp.{i}.weight" in tensors:
            layers.append((tensors[f"mlp.{i}.weight"], tensors[f"mlp.{i}.bias"]))
            i += 1
        return cls(tuple(layers), tensors["dw_kernels"], tensors["conv1_w"], tensors["conv1_b"],
                   meta.get("activation", "gelu"))


def _widths(channels, hidden, layers):
    if layers < 1:
        raise ValueError("layers must be >= 1")
    hidden = channels if hidden is None else hidden
    return [channels] + [hidden] * (layers - 1) + [channels]


def _gauss(shape, rng, std):
    n = 1
    for d in shape:
        n *= d
    return Tensor(shape, [rng.gauss(0.0, std) for _ in range(n)])


@dataclass(frozen=True)
class RectifiedFeatures:
    f_hat: Tensor
    mask: Tensor


def distill_semantic_query(template_tokens: Tensor) -> Tensor:
    if template_tokens.ndim != 2:
        raise ShapeError(f"template tokens must be Nz×C, got {template_tokens.shape}")
    return mean_rows(template_tokens)


def map_modulation(q_sem: Tensor, weights: PtrWeights) -> Tensor:
    if q_sem.shape != (weights.channels,):
        raise ShapeError(f"query has shape {q_sem.shape}, weights expect ({weights.channels},)")
    act = ACTIVATIONS[weights.activation]
    x = q_sem
    last = len(weights.mlp_layers) - 1
    for i, (w, b) in enumerate(weights.mlp_layers):
        y = matmul(w, x.reshape(x.size, 1))
        vals = [v + bb for v, bb in zip(y.data, b.data)]
        if i < last:
            vals = [act(v) for v in vals]
        x = Tensor((w.shape[0],), vals)
    return x


def gating_mask(f_x: Tensor, w_m: Tensor, weights: PtrWeights) -> Tensor:
    if f_x.ndim != 3 or f_x.shape[0] != weights.channels or w_m.shape != (weights.channels,):
        raise ShapeError(f"features {f_x.shape} / modulation {w_m.shape} vs {weights.channels} channels")
    corr = depthwise_conv(f_x, weights.dw_kernels, w_m)
    logits = conv1x1(corr, weights.conv1_w, weights.conv1_b)
    return sigmoid(Tensor(f_x.shape[1:], logits.data))


def rectify(f_x: Tensor, mask: Tensor) -> RectifiedFeatures:
    return RectifiedFeatures(gate(f_x, mask), mask)


def ptr_forward(template_tokens: Tensor, f_x: Tensor, weights: PtrWeights) -> RectifiedFeatures:
    w_m = map_modulation(distill_semantic_query(template_tokens), weights)
    return rectify(f_x, gating_mask(f_x, w_m, weights))

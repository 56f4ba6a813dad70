"""Cross-expert calibration of search features using textual-expert tokens."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .bundle import load_bundle, save_bundle
from .tensor import (
    ShapeError,
    Tensor,
    add,
    conv2d_single,
    gate,
    layer_norm,
    matmul,
    multi_head_cross_attention,
    sigmoid,
    transpose,
)

DEFAULT_DIM = 256
DEFAULT_HEADS = 4
DEFAULT_SEED = 4321


@dataclass(frozen=True)
class CecWeights:
    proj_w: Tensor  # d × C_txt, shared by template and search tokens
    proj_b: Tensor
    wq: Tensor
    wk: Tensor
    wv: Tensor
    wo: Tensor
    ln_gamma: Tensor
    ln_beta: Tensor
    head_w: Tensor  # 1 × d × k × k
    head_b: Tensor  # (1,)
    heads: int = DEFAULT_HEADS
    ln_eps: float = 1e-5

    def __post_init__(self):
        if self.proj_w.ndim != 2 or self.proj_b.shape != (self.proj_w.shape[0],):
            raise ShapeError(f"projection weight {self.proj_w.shape} / bias {self.proj_b.shape}")
        d = self.dim
        for name in ("wq", "wk", "wv", "wo"):
            if getattr(self, name).shape != (d, d):
                raise ShapeError(f"{name} must be {d}x{d}")
        if self.ln_gamma.shape != (d,) or self.ln_beta.shape != (d,):
            raise ShapeError("layer norm parameters must match the embedding dim")
        hw = self.head_w.shape
        if len(hw) != 4 or hw[0] != 1 or hw[1] != d or hw[2] != hw[3] or hw[2] % 2 == 0:
            raise ShapeError(f"conv head must be 1×{d}×k×k with odd k, got {hw}")
        if self.head_b.shape != (1,):
            raise ShapeError("conv head has a single output channel")
        if self.heads < 1 or d % self.heads:
            raise ValueError(f"embedding dim {d} not divisible by {self.heads} heads")

    @property
    def dim(self) -> int:
        return self.proj_w.shape[0]

    @property
    def text_dim(self) -> int:
        return self.proj_w.shape[1]

    @classmethod
    def neutral(cls, text_dim: int, dim: int = DEFAULT_DIM, heads: int = DEFAULT_HEADS,
                head_kernel: int = 3) -> "CecWeights":
        """Identity-style projections and a zero conv head: the mask is exactly 0.5."""
        proj = Tensor((dim, text_dim))
        for i in range(min(dim, text_dim)):
            proj[i, i] = 1.0
        eye = Tensor.eye(dim)
        return cls(proj, Tensor((dim,)), eye, eye, eye, eye,
                   Tensor.full((dim,), 1.0), Tensor((dim,)),
                   Tensor((1, dim, head_kernel, head_kernel)), Tensor((1,)), heads)

    @classmethod
    def random(cls, text_dim: int, dim: int = DEFAULT_DIM, heads: int = DEFAULT_HEADS,
               head_kernel: int = 3, seed: int = DEFAULT_SEED) -> "CecWeights":
        rng = random.Random(seed)

        def g(shape, std):
            n = 1
            for s in shape:
                n *= s
            return Tensor(shape, [rng.gauss(0.0, std) for _ in range(n)])

        a = 1.0 / math.sqrt(dim)
        return cls(
            g((dim, text_dim), 1.0 / math.sqrt(text_dim)), g((dim,), 0.1),
            g((dim, dim), a), g((dim, dim), a), g((dim, dim), a), g((dim, dim), a),
            Tensor([dim], [1.0 + rng.gauss(0.0, 0.1) for _ in range(dim)]), g((dim,), 0.1),
            g((1, dim, head_kernel, head_kernel), a / head_kernel), g((1,), 0.1),
            heads,
        )

    def save(self, directory):
        names = ("proj_w", "proj_b", "wq", "wk", "wv", "wo", "ln_gamma", "ln_beta", "head_w", "head_b")
        return save_bundle(directory, "cec", {n: getattr(self, n) for n in names},
                           {"heads": str(self.heads), "ln_eps": repr(self.ln_eps)})

    @classmethod
    def load(cls, directory) -> "CecWeights":
        tensors, meta = load_bundle(directory, "cec")
        return cls(**tensors, heads=int(meta["heads"]), ln_eps=float(meta["ln_eps"]))


@dataclass(frozen=True)
class CalibratedFeatures:
    f_calib: Tensor
    m_calib: Tensor


def _linear_rows(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    if x.ndim != 2 or x.shape[1] != w.shape[1]:
        raise ShapeError(f"tokens {x.shape} do not match projection {w.shape}")
    y = matmul(x, transpose(w))
    n, d = y.shape
    out = y.data
    for i in range(n):
        for j in range(d):
            out[i * d + j] += b.data[j]
    return y


def project_textual(z_txt: Tensor, x_txt: Tensor, w: CecWeights) -> tuple[Tensor, Tensor]:
    return _linear_rows(z_txt, w.proj_w, w.proj_b), _linear_rows(x_txt, w.proj_w, w.proj_b)


def enhance(x_proj: Tensor, z_proj: Tensor, w: CecWeights) -> Tensor:
    attended = multi_head_cross_attention(x_proj, z_proj, z_proj, w.heads, w.wq, w.wk, w.wv, w.wo)
    return layer_norm(add(x_proj, attended), w.ln_gamma, w.ln_beta, w.ln_eps)


def resample_nearest(plane: Tensor, out_h: int, out_w: int) -> Tensor:
    h, w = plane.shape
    if (h, w) == (out_h, out_w):
        return plane
    src = plane.data
    vals = []
    for r in range(out_h):
        sr = min(r * h // out_h, h - 1)
        for c in range(out_w):
            vals.append(src[sr * w + min(c * w // out_w, w - 1)])
    return Tensor((out_h, out_w), vals)


def calibration_mask(x_fused: Tensor, grid_h: int, grid_w: int, w: CecWeights,
                     out_shape: tuple[int, int] | None = None) -> Tensor:
    n, d = x_fused.shape
    if n != grid_h * grid_w:
        raise ShapeError(f"{n} tokens cannot form a {grid_h}x{grid_w} grid")
    if d != w.dim:
        raise ShapeError(f"token dim {d} does not match conv head dim {w.dim}")
    # token i sits at row i // grid_w, column i % grid_w
    grid = Tensor((d, grid_h, grid_w), transpose(x_fused).data)
    mask = sigmoid(conv2d_single(grid, w.head_w, w.head_b.data[0]))
    if out_shape is not None:
        mask = resample_nearest(mask, *out_shape)
    return mask


def fuse_calibrated(f_hat: Tensor, m_calib: Tensor) -> CalibratedFeatures:
    return CalibratedFeatures(gate(f_hat, m_calib), m_calib)


def cec_forward(z_txt: Tensor, x_txt: Tensor, f_hat: Tensor, grid_h: int, grid_w: int,
                w: CecWeights) -> CalibratedFeatures:
    z_proj, x_proj = project_textual(z_txt, x_txt, w)
    fused = enhance(x_proj, z_proj, w)
    m_calib = calibration_mask(fused, grid_h, grid_w, w, out_shape=f_hat.shape[1:])
    return fuse_calibrated(f_hat, m_calib)

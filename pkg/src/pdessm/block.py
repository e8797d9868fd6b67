"""Residual transformer-style block with the spectral operator as the mixer,
patch embedding/readout, and flow-matching evaluation helpers.

Forward-only: time conditioning, adaptive normalization and positional
embeddings are deliberately absent so the block isolates the mixing swap.
Patch tokens stay on their 2D grid; the mixer never sees a flattened 1D scan
order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operator import EmbedParams, PdeParams, pde_ssm_forward
from .validation import check_feature_map, check_matrix, check_positive_int

_SQRT_2_OVER_PI = 0.7978845608028654


@dataclass(frozen=True)
class PatchConfig:
    """Patch embedding geometry and its linear maps.

    ``w_embed`` maps a flattened ``C_img * k * k`` patch vector to a
    ``c_hid`` token; ``w_out`` maps a token back to a patch vector.
    """

    k: int
    c_img: int
    c_hid: int
    w_embed: np.ndarray
    w_out: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "k", check_positive_int(self.k, "k"))
        object.__setattr__(self, "c_img", check_positive_int(self.c_img, "c_img"))
        object.__setattr__(self, "c_hid", check_positive_int(self.c_hid, "c_hid"))
        flat = self.c_img * self.k * self.k
        object.__setattr__(
            self, "w_embed", check_matrix(self.w_embed, (self.c_hid, flat), "w_embed")
        )
        object.__setattr__(
            self, "w_out", check_matrix(self.w_out, (flat, self.c_hid), "w_out")
        )


@dataclass(frozen=True)
class BlockParams:
    """One residual block: spectral mixer followed by a per-token MLP."""

    g: EmbedParams
    z: PdeParams
    mlp_w1: np.ndarray
    mlp_b1: np.ndarray
    mlp_w2: np.ndarray
    mlp_b2: np.ndarray
    activation: str = "gelu"

    def __post_init__(self):
        if self.g.c_in != self.g.c_hid:
            raise ValueError(
                "the block mixer must map the hidden width to itself "
                f"(got c_in={self.g.c_in}, c_hid={self.g.c_hid})"
            )
        if self.g.c_hid != self.z.c_hid:
            raise ValueError("embedding and evolution widths differ")
        c_hid = self.g.c_hid
        w1 = check_matrix(self.mlp_w1, name="mlp_w1")
        if w1.shape[1] != c_hid:
            raise ValueError(f"mlp_w1 must have {c_hid} columns, got {w1.shape}")
        c_mlp = w1.shape[0]
        object.__setattr__(self, "mlp_w1", w1)
        object.__setattr__(
            self, "mlp_w2", check_matrix(self.mlp_w2, (c_hid, c_mlp), "mlp_w2")
        )
        b1 = np.ascontiguousarray(np.asarray(self.mlp_b1, dtype=np.float64)).reshape(-1)
        b2 = np.ascontiguousarray(np.asarray(self.mlp_b2, dtype=np.float64)).reshape(-1)
        if b1.shape != (c_mlp,) or b2.shape != (c_hid,):
            raise ValueError("MLP bias shapes do not match the weights")
        object.__setattr__(self, "mlp_b1", b1)
        object.__setattr__(self, "mlp_b2", b2)
        if self.activation not in ("gelu", "relu"):
            raise ValueError(f"activation must be 'gelu' or 'relu', got {self.activation!r}")

    @property
    def c_hid(self) -> int:
        return self.g.c_hid


def patchify(img, cfg: PatchConfig) -> np.ndarray:
    """Embed non-overlapping ``k x k`` patches into a 2D token grid.

    ``(B, C_img, H, W)`` with ``H, W`` divisible by ``k`` maps to
    ``(B, c_hid, H/k, W/k)``.  Patch vectors are flattened channel-first
    (channel index outermost, then the two in-patch offsets).
    """
    img = check_feature_map(img, "image")
    b, c, h, w = img.shape
    if c != cfg.c_img:
        raise ValueError(f"image has {c} channels, patch config expects {cfg.c_img}")
    k = cfg.k
    if h % k or w % k:
        raise ValueError(f"extents ({h}, {w}) are not divisible by patch size {k}")
    hp, wp = h // k, w // k
    blocks = (
        img.reshape(b, c, hp, k, wp, k)
        .transpose(0, 2, 4, 1, 3, 5)
        .reshape(b, hp, wp, c * k * k)
    )
    tokens = blocks @ cfg.w_embed.T
    return np.ascontiguousarray(tokens.transpose(0, 3, 1, 2))


def unpatchify(tokens, cfg: PatchConfig) -> np.ndarray:
    """Map a token grid back to image layout with ``w_out`` (inverse of patchify)."""
    tokens = check_feature_map(tokens, "tokens")
    b, c, hp, wp = tokens.shape
    if c != cfg.c_hid:
        raise ValueError(f"tokens have width {c}, patch config expects {cfg.c_hid}")
    k = cfg.k
    patches = tokens.transpose(0, 2, 3, 1) @ cfg.w_out.T
    img = (
        patches.reshape(b, hp, wp, cfg.c_img, k, k)
        .transpose(0, 3, 1, 4, 2, 5)
        .reshape(b, cfg.c_img, hp * k, wp * k)
    )
    return np.ascontiguousarray(img)


def _activate(x: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(x, 0.0)
    inner = _SQRT_2_OVER_PI * (x + 0.044715 * x**3)
    return 0.5 * x * (1.0 + np.tanh(inner))


def dit_block_forward(h, p: BlockParams) -> np.ndarray:
    """``h + mixer(h)`` followed by ``(.) + MLP(.)`` applied per token."""
    h = check_feature_map(h, "h")
    if h.shape[1] != p.c_hid:
        raise ValueError(f"input width {h.shape[1]} does not match block width {p.c_hid}")
    mixed = h + pde_ssm_forward(h, p.g, p.z)
    tokens = mixed.transpose(0, 2, 3, 1)
    hidden = _activate(tokens @ p.mlp_w1.T + p.mlp_b1, p.activation)
    out = mixed + (hidden @ p.mlp_w2.T + p.mlp_b2).transpose(0, 3, 1, 2)
    return out


def stack_forward(img, cfg: PatchConfig, blocks, *, return_layer_norms: bool = False):
    """patchify, run the block sequence, unpatchify.

    With ``return_layer_norms=True`` also returns the token L2 norm after the
    patch embedding and after every block.
    """
    for i, blk in enumerate(blocks):
        if blk.c_hid != cfg.c_hid:
            raise ValueError(
                f"block {i} width {blk.c_hid} does not match patch width {cfg.c_hid}"
            )
    tokens = patchify(img, cfg)
    norms = [float(np.linalg.norm(tokens))]
    for blk in blocks:
        tokens = dit_block_forward(tokens, blk)
        norms.append(float(np.linalg.norm(tokens)))
    out = unpatchify(tokens, cfg)
    if return_layer_norms:
        return out, norms
    return out


# ---------------------------------------------------------------------------
# flow-matching evaluation operations (forward only)


def _check_same_shape(a, b, name_a, name_b):
    a = check_feature_map(a, name_a)
    b = check_feature_map(b, name_b)
    if a.shape != b.shape:
        raise ValueError(f"{name_a} shape {a.shape} != {name_b} shape {b.shape}")
    return a, b


def fm_interpolate(u, z, t: float) -> np.ndarray:
    """Linear interpolant ``t*u + (1-t)*z`` between clean data and noise."""
    u, z = _check_same_shape(u, z, "u", "z")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    return t * u + (1.0 - t) * z


def fm_loss(v, u, z) -> float:
    """Mean squared error between a velocity estimate and ``u - z``."""
    v, u = _check_same_shape(v, u, "v", "u")
    u, z = _check_same_shape(u, z, "u", "z")
    return float(np.mean((v - (u - z)) ** 2))


def fm_denoise(u_t, v, t: float) -> np.ndarray:
    """Clean-image estimate ``u_t + (1-t)*v`` from a velocity estimate."""
    u_t, v = _check_same_shape(u_t, v, "u_t", "v")
    return u_t + (1.0 - t) * v


# ---------------------------------------------------------------------------
# default construction for smoke runs


def make_dit_block(
    c_hid: int,
    rng: np.random.Generator,
    *,
    mlp_ratio: int = 4,
    activation: str = "gelu",
    tau: float = 1.0,
    mode: str = "stable",
) -> BlockParams:
    """Random block with decoupled (diagonal) evolution coefficients.

    Diagonal coefficients keep wide stacks on the cheap per-channel
    evolution path; channel mixing still happens through the dense embedding
    coefficients and the MLP.
    """
    c_hid = check_positive_int(c_hid, "c_hid")

    def diag():
        return np.diag(rng.uniform(-0.5, 0.5, size=c_hid))

    g = EmbedParams(
        r=np.eye(c_hid),
        g0=0.5 * np.eye(c_hid) + 0.1 * rng.standard_normal((c_hid, c_hid)) / np.sqrt(c_hid),
        gx=0.05 * rng.standard_normal((c_hid, c_hid)) / np.sqrt(c_hid),
        gy=0.05 * rng.standard_normal((c_hid, c_hid)) / np.sqrt(c_hid),
    )
    z = PdeParams(
        fx=diag(), fy=diag(), bx=diag(), by=diag(),
        rm=np.diag(-np.abs(rng.uniform(0.0, 0.5, size=c_hid))),
        tau=tau, mode=mode,
    )
    c_mlp = mlp_ratio * c_hid
    return BlockParams(
        g=g, z=z,
        mlp_w1=rng.standard_normal((c_mlp, c_hid)) / np.sqrt(c_hid),
        mlp_b1=0.1 * rng.uniform(-1.0, 1.0, size=c_mlp),
        mlp_w2=0.1 * rng.standard_normal((c_hid, c_mlp)) / np.sqrt(c_mlp),
        mlp_b2=0.1 * rng.uniform(-1.0, 1.0, size=c_hid),
        activation=activation,
    )


def make_stack(
    depth: int,
    c_img: int,
    c_hid: int,
    k: int,
    rng: np.random.Generator,
    *,
    mlp_ratio: int = 4,
    activation: str = "gelu",
) -> tuple[PatchConfig, list[BlockParams]]:
    """Patch config plus ``depth`` randomly initialized blocks."""
    if depth < 0:
        raise ValueError(f"depth must be >= 0, got {depth}")
    flat = c_img * k * k
    cfg = PatchConfig(
        k=k, c_img=c_img, c_hid=c_hid,
        w_embed=rng.standard_normal((c_hid, flat)) / np.sqrt(flat),
        w_out=rng.standard_normal((flat, c_hid)) / np.sqrt(c_hid),
    )
    blocks = [
        make_dit_block(c_hid, rng, mlp_ratio=mlp_ratio, activation=activation)
        for _ in range(depth)
    ]
    return cfg, blocks

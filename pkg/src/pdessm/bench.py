"""Wall-clock scaling harness: spectral mixer vs. naive softmax attention.

The harness times forward passes of two configured mixing layers on identical
token grids across image and patch sizes.  The attention baseline is the
plain unfused formulation (explicit token-by-token score matrix, computed in
row chunks to bound memory), which is the O(tokens^2) construction whose
scaling the spectral mixer is meant to beat.  The spectral mixer draws its
evolution coefficients from a simultaneously diagonalizable family, so its
per-frequency operators are materialized as an eigenbasis change plus
per-channel spectral factors; the timed path is then FFTs plus a handful of
``(tokens, width) @ (width, width)`` products, which realizes the intended
``O(width * N log N + N * width^2)`` forward cost without storing per-bin
matrices.  ``SpectralMixer.equivalent_params`` exposes the same draw as
reference operator parameters so tests can pin the mixer to the verified
forward pass.

Timing uses the monotonic high-resolution clock, medians over >= 5 repeats
after 3 warm-ups.  Single-thread mode pins BLAS pools via threadpoolctl for
fair exponent fits.  Double precision by default; ``use_float32`` exists for
exploratory runs only and is never used by the verification path.
"""

from __future__ import annotations

import time
import warnings
from contextlib import nullcontext
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from .grid import make_frequency_grid
from .operator import EmbedParams, PdeParams, pair_symmetrize
from .validation import check_positive_int

MIN_REPEATS = 5
WARMUP_ITERATIONS = 3


@dataclass(frozen=True)
class BenchRecord:
    """One timing measurement for one mixer at one grid configuration."""

    mixer: str
    image_size: int
    patch_size: int
    tokens: int
    width: int
    repeats: int
    median_seconds: float
    p10_seconds: float
    p90_seconds: float

    def __post_init__(self):
        if self.mixer not in ("attention", "pde_ssm"):
            raise ValueError(f"unknown mixer {self.mixer!r}")
        if self.patch_size < 1 or self.image_size < 1:
            raise ValueError("image_size and patch_size must be >= 1")
        expected = (self.image_size // self.patch_size) ** 2
        if self.image_size % self.patch_size or self.tokens != expected:
            raise ValueError(
                f"tokens={self.tokens} inconsistent with image {self.image_size} "
                f"/ patch {self.patch_size}"
            )
        if self.repeats < MIN_REPEATS:
            raise ValueError(f"repeats must be >= {MIN_REPEATS}, got {self.repeats}")
        for name in ("median_seconds", "p10_seconds", "p90_seconds"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")


def attention_forward(tokens, wq, wk, wv, *, chunk: int = 2048) -> np.ndarray:
    """Single-head softmax attention over the flattened token set.

    ``softmax(Q K^T / sqrt(C)) V`` with ``Q = X Wq`` etc.; the score matrix
    is formed in row chunks of ``chunk`` tokens so peak memory stays
    O(chunk * tokens).  A float32 input is processed in float32 (the
    benchmark's opt-in single-precision path); everything else runs in
    float64.
    """
    arr = np.asarray(tokens)
    dtype = np.float32 if arr.dtype == np.float32 else np.float64
    arr = np.ascontiguousarray(arr, dtype=dtype)
    if arr.ndim != 4:
        raise ValueError(f"tokens must have shape (B, C, Hp, Wp), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("tokens contain non-finite entries")
    b, c, hp, wp = arr.shape
    weights = []
    for name, mat in (("wq", wq), ("wk", wk), ("wv", wv)):
        mat = np.ascontiguousarray(np.asarray(mat), dtype=dtype)
        if mat.shape != (c, c):
            raise ValueError(f"{name} must have shape ({c}, {c}), got {mat.shape}")
        weights.append(mat)
    wq, wk, wv = weights
    n = hp * wp
    x = arr.reshape(b, c, n).transpose(0, 2, 1)
    out = np.empty_like(x)
    scale = 1.0 / np.sqrt(c)
    for bi in range(b):
        q = x[bi] @ wq
        k = x[bi] @ wk
        v = x[bi] @ wv
        kt = np.ascontiguousarray(k.T)
        for start in range(0, n, chunk):
            scores = q[start:start + chunk] @ kt
            scores *= scale
            scores -= scores.max(axis=1, keepdims=True)
            np.exp(scores, out=scores)
            scores /= scores.sum(axis=1, keepdims=True)
            out[bi, start:start + chunk] = scores @ v
    return np.ascontiguousarray(out.transpose(0, 2, 1).reshape(b, c, hp, wp))


class AttentionMixer:
    """Configured attention layer; ``forward`` is the timed operation."""

    name = "attention"

    def __init__(self, width: int, rng: np.random.Generator, dtype=np.float64):
        self.wq = (rng.standard_normal((width, width)) / np.sqrt(width)).astype(dtype)
        self.wk = (rng.standard_normal((width, width)) / np.sqrt(width)).astype(dtype)
        self.wv = (rng.standard_normal((width, width)) / np.sqrt(width)).astype(dtype)

    def forward(self, x: np.ndarray) -> np.ndarray:
        return attention_forward(x, self.wq, self.wk, self.wv)


class SpectralMixer:
    """Configured spectral mixing layer with precomputed frequency factors.

    Coefficients are drawn as ``V diag(.) V^T`` for one shared orthogonal
    ``V``, so the evolution symbols share the eigenbasis ``V`` and the
    per-frequency exponentials reduce to per-channel factors.  The forward
    pass applies: FFT, the embedding as three width-by-width products
    (folded into the eigenbasis), the spectral factors elementwise, the
    basis change back, inverse FFT.
    """

    name = "pde_ssm"

    def __init__(self, width: int, hp: int, wp: int, rng: np.random.Generator,
                 dtype=np.float64, tau: float = 1.0):
        cdtype = np.complex64 if dtype == np.float32 else np.complex128
        self.hp, self.wp, self.width = hp, wp, width
        v = np.linalg.qr(rng.standard_normal((width, width)))[0]
        self._v = v
        self._dfx = rng.uniform(-0.5, 0.5, size=width)
        self._dfy = rng.uniform(-0.5, 0.5, size=width)
        self._dbx = rng.uniform(-0.5, 0.5, size=width)
        self._dby = rng.uniform(-0.5, 0.5, size=width)
        self._drm = -np.abs(rng.uniform(0.0, 0.2, size=width))
        self._tau = tau
        self._g0 = np.eye(width) + 0.1 * rng.standard_normal((width, width)) / np.sqrt(width)
        self._gx = 0.1 * rng.standard_normal((width, width)) / np.sqrt(width)
        self._gy = 0.1 * rng.standard_normal((width, width)) / np.sqrt(width)

        grid = make_frequency_grid(hp, wp)
        kx, ky = grid.mesh()
        mdiag = kx[..., None] * self._dfx + ky[..., None] * self._dfy
        lam = (
            -(mdiag**2)
            + self._drm
            + 1j * (kx[..., None] * self._dbx + ky[..., None] * self._dby)
        )
        factors = pair_symmetrize(np.exp(tau * lam))
        self._factors = factors.reshape(hp * wp, width).astype(cdtype)
        kxo, kyo = grid.odd_mesh()
        self._ikx = (1j * np.broadcast_to(kxo, (hp, wp)).reshape(-1, 1)).astype(cdtype)
        self._iky = (1j * np.broadcast_to(kyo, (hp, wp)).reshape(-1, 1)).astype(cdtype)
        # Embedding maps precomposed with the change into the eigenbasis.
        self._a0 = (self._g0.T @ v).astype(cdtype)
        self._ax = (self._gx.T @ v).astype(cdtype)
        self._ay = (self._gy.T @ v).astype(cdtype)
        self._vt = v.T.astype(cdtype)

    def forward(self, x: np.ndarray) -> np.ndarray:
        b, c, hp, wp = x.shape
        spec = np.fft.fft2(x, axes=(-2, -1)).reshape(b, c, hp * wp)
        out = np.empty_like(x)
        for bi in range(b):
            u = spec[bi].T
            w = u @ self._a0
            w += self._ikx * (u @ self._ax)
            w += self._iky * (u @ self._ay)
            w *= self._factors
            h = (w @ self._vt).T.reshape(c, hp, wp)
            out[bi] = np.fft.ifft2(h, axes=(-2, -1)).real
        return out

    def equivalent_params(self) -> tuple[EmbedParams, PdeParams]:
        """The same layer as reference operator parameters (for equivalence tests)."""
        v = self._v
        def undiag(d):
            return (v * d) @ v.T
        g = EmbedParams(r=np.eye(self.width), g0=self._g0, gx=self._gx, gy=self._gy)
        z = PdeParams(
            fx=undiag(self._dfx), fy=undiag(self._dfy),
            bx=undiag(self._dbx), by=undiag(self._dby),
            rm=undiag(self._drm), tau=self._tau, mode="raw",
        )
        return g, z


def _time_forward(mixer, x: np.ndarray, repeats: int) -> np.ndarray:
    for _ in range(WARMUP_ITERATIONS):
        mixer.forward(x)
    times = np.empty(repeats)
    for i in range(repeats):
        start = time.perf_counter()
        mixer.forward(x)
        times[i] = time.perf_counter() - start
    return times


def run_bench(
    sizes,
    patches,
    width: int,
    repeats: int = MIN_REPEATS,
    threads: int | str = 1,
    *,
    seed: int = 0,
    use_float32: bool = False,
) -> list[BenchRecord]:
    """Time both mixers across image sizes and patch sizes.

    Each configuration warms up ``WARMUP_ITERATIONS`` iterations and then
    measures ``repeats`` forward passes per mixer on one shared input (batch
    1).  ``threads=1`` pins BLAS thread pools; ``threads='auto'`` leaves
    them alone.  Configurations whose size is not divisible by the patch are
    skipped with a warning.  Records come back sorted by
    (mixer, image size, patch size).
    """
    width = check_positive_int(width, "width")
    if repeats < MIN_REPEATS:
        raise ValueError(f"repeats must be >= {MIN_REPEATS}, got {repeats}")
    if threads not in (1, "auto"):
        raise ValueError(f"threads must be 1 or 'auto', got {threads!r}")
    dtype = np.float32 if use_float32 else np.float64

    records: list[BenchRecord] = []
    limiter = threadpool_limits(limits=1) if threads == 1 else nullcontext()
    with limiter:
        for size in sizes:
            for patch in patches:
                if size % patch:
                    warnings.warn(
                        f"skipping image {size} / patch {patch}: not divisible",
                        stacklevel=2,
                    )
                    continue
                hp = size // patch
                x = np.random.default_rng([seed, size, patch, 0]).standard_normal(
                    (1, width, hp, hp)
                ).astype(dtype)
                mixers = (
                    AttentionMixer(width, np.random.default_rng([seed, size, patch, 1]), dtype),
                    SpectralMixer(width, hp, hp, np.random.default_rng([seed, size, patch, 2]), dtype),
                )
                for mixer in mixers:
                    times = _time_forward(mixer, x, repeats)
                    records.append(
                        BenchRecord(
                            mixer=mixer.name,
                            image_size=int(size),
                            patch_size=int(patch),
                            tokens=hp * hp,
                            width=width,
                            repeats=repeats,
                            median_seconds=float(np.median(times)),
                            p10_seconds=float(np.percentile(times, 10)),
                            p90_seconds=float(np.percentile(times, 90)),
                        )
                    )
    records.sort(key=lambda r: (r.mixer, r.image_size, r.patch_size))
    return records


def fit_scaling_exponent(records, mixer: str) -> float:
    """Least-squares slope of log median time versus log token count."""
    points = [(r.tokens, r.median_seconds) for r in records if r.mixer == mixer]
    if len({t for t, _ in points}) < 3:
        raise ValueError(
            f"need records at >= 3 distinct token counts for mixer {mixer!r}"
        )
    tokens = np.log([float(t) for t, _ in points])
    times = np.log([s for _, s in points])
    slope, _ = np.polyfit(tokens, times, 1)
    return float(slope)

"""Spatial state-space operator: a learnable convection-diffusion-reaction
evolution applied as a global convolution through its Fourier-domain symbol.

Pipeline (one forward pass):

1. pointwise channel projection ``u' = R u`` (a 1x1 convolution),
2. 2D DFT,
3. per-frequency embedding ``v(k) = (G0 + i*kx*Gx + i*ky*Gy) u'(k)``,
4. per-frequency evolution ``h(k) = exp(tau * L(k)) v(k)`` with
   ``L(k) = -M(k) M(k)^T + R_m + i*(kx*Bx + ky*By)`` and
   ``M(k) = kx*Fx + ky*Fy``,
5. inverse DFT and real projection.

The diffusion quadratic form ``k^T K k = M(k) M(k)^T`` is symmetric positive
semidefinite for every frequency by construction (the factored family
``K_ij = F_i F_j^T``).  Boundary conditions are periodic (the DFT imposes
them); convection wraps around.

Stability modes
---------------
``raw``
    Coefficient matrices enter the evolution matrix verbatim.
``stable`` (default)
    The reaction matrix is replaced by ``skew(R_m) - psd(sym(R_m))`` (the
    antisymmetric part plus a negated positive-semidefinite surrogate of the
    symmetric part), and the convection matrices are symmetrized so that
    ``i*(kx*Bx + ky*By)`` is anti-Hermitian.  Both together force the
    Hermitian part of ``L(k)`` to be negative semidefinite at every
    frequency, hence ``||exp(tau*L(k))||_2 <= 1`` for every ``tau > 0``:
    the evolution cannot amplify any frequency.  Reaction flipping alone
    does not bound the spectrum once ``Bx, By`` have antisymmetric parts
    (``i*k*skew(B)`` is Hermitian and indefinite), which is why the
    convection symmetrization is part of the mode.

Self-paired Nyquist bins
------------------------
On even extents the bins with a +pi frequency component have no distinct
negated partner on the grid, so symbols with odd-in-k terms cannot satisfy
``S(-k) = conj(S(k))`` there and a real input would come back slightly
complex.  All grid sweeps therefore pair-symmetrize the materialized symbols,
``S_eff[m, n] = (S[m, n] + conj(S[-m, -n])) / 2`` (indices mod extent), which
is a no-op away from self-paired bins, keeps integer-cell translations exact,
never increases the symbol norm, and makes real inputs map to real outputs up
to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .exceptions import NumericError
from .grid import FrequencyGrid, make_frequency_grid
from .linalg import mat_exp, mat_exp_batch
from .spectral import dft2, idft2, project_real
from .validation import check_feature_map, check_matrix, check_positive_int

# Relative imaginary residue above which the real projection aborts; residues
# this large indicate a broken symbol symmetry, not rounding.
RESIDUE_ABORT = 1e-6

# Named term-flag combinations (diffusion_on, convection_on, reaction_on).
ABLATION_PRESETS = {
    "baseline": (True, True, True),
    "diffusion+reaction": (True, False, True),
    "diffusion+convection": (True, True, False),
    "convection": (False, True, False),
    "diffusion": (True, False, False),
    "reaction": (False, False, True),
}


@dataclass(frozen=True)
class EmbedParams:
    """Input embedding: channel mixing plus a first-order differential symbol.

    ``r`` is the ``(C_hid, C_in)`` pointwise channel-mixing map; ``g0, gx,
    gy`` are ``(C_hid, C_hid)`` coefficients of the symbol
    ``G0 + i*kx*Gx + i*ky*Gy``.
    """

    r: np.ndarray
    g0: np.ndarray
    gx: np.ndarray
    gy: np.ndarray

    def __post_init__(self):
        r = check_matrix(self.r, name="r")
        c_hid = r.shape[0]
        object.__setattr__(self, "r", r)
        for name in ("g0", "gx", "gy"):
            object.__setattr__(
                self, name, check_matrix(getattr(self, name), (c_hid, c_hid), name)
            )

    @property
    def c_hid(self) -> int:
        return self.r.shape[0]

    @property
    def c_in(self) -> int:
        return self.r.shape[1]


@dataclass(frozen=True)
class PdeParams:
    """Evolution coefficients: diffusion factors, convection, reaction, time.

    All matrices are ``(C_hid, C_hid)``.  ``fx, fy`` are the diffusion
    factors (the tensor entries are ``K_ij = F_i F_j^T``), ``bx, by`` the
    per-axis convection matrices, ``rm`` the reaction matrix.  ``tau > 0`` is
    the integration time.  Term flags zero the corresponding contribution to
    the evolution matrix; ``mode`` selects the raw or the stable
    parameterization (see module docstring).
    """

    fx: np.ndarray
    fy: np.ndarray
    bx: np.ndarray
    by: np.ndarray
    rm: np.ndarray
    tau: float
    diffusion_on: bool = True
    convection_on: bool = True
    reaction_on: bool = True
    mode: str = "stable"

    def __post_init__(self):
        fx = check_matrix(self.fx, name="fx")
        c = fx.shape[0]
        object.__setattr__(self, "fx", fx)
        for name in ("fy", "bx", "by", "rm"):
            object.__setattr__(
                self, name, check_matrix(getattr(self, name), (c, c), name)
            )
        tau = float(self.tau)
        if not np.isfinite(tau) or tau <= 0.0:
            raise ValueError(f"tau must be a positive real, got {self.tau!r}")
        object.__setattr__(self, "tau", tau)
        if self.mode not in ("stable", "raw"):
            raise ValueError(f"mode must be 'stable' or 'raw', got {self.mode!r}")

    @property
    def c_hid(self) -> int:
        return self.fx.shape[0]

    def with_flags(self, diffusion_on: bool, convection_on: bool, reaction_on: bool) -> "PdeParams":
        return replace(
            self,
            diffusion_on=diffusion_on,
            convection_on=convection_on,
            reaction_on=reaction_on,
        )


@dataclass(frozen=True)
class Ssm1dParams:
    """One-dimensional state-space system ``dh/dt = A h + B u``."""

    a: np.ndarray
    b: np.ndarray
    tau: float = 1.0
    steps: int = 1

    def __post_init__(self):
        a = np.ascontiguousarray(np.asarray(self.a), dtype=np.float64)
        b = np.ascontiguousarray(np.asarray(self.b), dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"A must be square, got shape {a.shape}")
        if b.ndim != 2 or b.shape[0] != a.shape[0]:
            raise ValueError(f"B must be (n, m) with n={a.shape[0]}, got {b.shape}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("A and B must be finite")
        if float(self.tau) <= 0.0:
            raise ValueError("tau must be positive")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "steps", check_positive_int(self.steps, "steps"))


# ---------------------------------------------------------------------------
# effective coefficients and per-frequency symbols


def _skew(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m - m.T)


def _sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def _psd_surrogate(sym_part: np.ndarray) -> np.ndarray:
    """Positive semidefinite surrogate ``V |D| V^T`` of a symmetric matrix."""
    vals, vecs = np.linalg.eigh(sym_part)
    return (vecs * np.abs(vals)) @ vecs.T


def effective_reaction(z: PdeParams) -> np.ndarray:
    """Reaction matrix as it enters the evolution matrix (flag applied)."""
    if not z.reaction_on:
        return np.zeros_like(z.rm)
    if z.mode == "raw":
        return z.rm
    return _skew(z.rm) - _psd_surrogate(_sym(z.rm))


def effective_convection(z: PdeParams) -> tuple[np.ndarray, np.ndarray]:
    """Per-axis convection matrices as they enter the evolution matrix."""
    if not z.convection_on:
        zero = np.zeros_like(z.bx)
        return zero, zero
    if z.mode == "raw":
        return z.bx, z.by
    return _sym(z.bx), _sym(z.by)


def effective_diffusion(z: PdeParams) -> tuple[np.ndarray, np.ndarray]:
    """Diffusion factor matrices (zeroed when the term is disabled)."""
    if not z.diffusion_on:
        zero = np.zeros_like(z.fx)
        return zero, zero
    return z.fx, z.fy


def embed_symbol(g: EmbedParams, kx: float, ky: float) -> np.ndarray:
    """Embedding symbol ``G0 + i*kx*Gx + i*ky*Gy`` at one frequency."""
    return g.g0 + 1j * kx * g.gx + 1j * ky * g.gy


def evolution_symbol(z: PdeParams, kx: float, ky: float) -> np.ndarray:
    """Evolution matrix ``L(k)`` at one frequency, honoring term flags."""
    c = z.c_hid
    lam = np.zeros((c, c), dtype=np.complex128)
    if z.diffusion_on:
        m = kx * z.fx + ky * z.fy
        lam -= m @ m.T
    if z.convection_on:
        bx, by = effective_convection(z)
        lam += 1j * (kx * bx + ky * by)
    if z.reaction_on:
        lam = lam + effective_reaction(z)
    return lam


def green_symbol(z: PdeParams, kx: float, ky: float) -> np.ndarray:
    """Evolution operator symbol ``exp(tau * L(k))`` at one frequency.

    In the scalar case this is exactly
    ``exp(tau * (-k^T K k + r + i*(b . k)))``.  Raw mode with a large positive
    reaction can overflow, which surfaces as :class:`NumericError`.
    """
    return mat_exp(z.tau * evolution_symbol(z, kx, ky))


# ---------------------------------------------------------------------------
# grid sweeps


def pair_symmetrize(values: np.ndarray) -> np.ndarray:
    """Average grid-sampled symbol values with their negated-frequency conjugate.

    ``values`` has leading axes ``(H, W)`` and arbitrary trailing axes.  The
    result satisfies ``out[m, n] == conj(out[(-m) % H, (-n) % W])`` exactly
    and equals the input wherever that identity already held.
    """
    flipped = values[::-1, ::-1]
    mirrored = np.roll(flipped, shift=(1, 1), axis=(0, 1))
    return 0.5 * (values + np.conj(mirrored))


def evolution_matrices(z: PdeParams, grid: FrequencyGrid) -> np.ndarray:
    """Raw (un-symmetrized) evolution matrices on the grid: ``(H, W, C, C)``."""
    kx, ky = grid.mesh()
    h, w = grid.shape
    c = z.c_hid
    lam = np.zeros((h, w, c, c), dtype=np.complex128)
    if z.diffusion_on:
        m = kx[..., None, None] * z.fx + ky[..., None, None] * z.fy
        lam -= np.einsum("hwij,hwkj->hwik", m, m)
    if z.convection_on:
        bx, by = effective_convection(z)
        lam += 1j * (kx[..., None, None] * bx + ky[..., None, None] * by)
    if z.reaction_on:
        lam += effective_reaction(z)
    return lam


def green_symbols(z: PdeParams, grid: FrequencyGrid, *, pair: bool = True) -> np.ndarray:
    """Evolution symbols ``exp(tau*L(k))`` on the grid: ``(H, W, C, C)``.

    ``pair=True`` (the default, used by every spatial-domain consumer)
    applies the self-paired-bin symmetrization described in the module
    docstring.
    """
    h, w = grid.shape
    c = z.c_hid
    lam = evolution_matrices(z, grid).reshape(h * w, c, c)
    sym = mat_exp_batch(z.tau * lam).reshape(h, w, c, c)
    return pair_symmetrize(sym) if pair else sym


def embed_symbols(g: EmbedParams, grid: FrequencyGrid) -> np.ndarray:
    """Embedding symbols on the grid, ``(H, W, C, C)``, pair-symmetrized.

    The embedding symbol is affine in ``(i*kx, i*ky)`` with real
    coefficients, so pair symmetrization reduces exactly to evaluating the
    first-order terms on the Nyquist-zeroed frequencies.
    """
    kx, ky = grid.odd_mesh()
    return (
        g.g0
        + 1j * kx[..., None, None] * g.gx
        + 1j * ky[..., None, None] * g.gy
    )


def _diagonal_only(*mats: np.ndarray) -> bool:
    return all(np.count_nonzero(m - np.diag(np.diagonal(m))) == 0 for m in mats)


def _green_diagonal(z: PdeParams, grid: FrequencyGrid) -> np.ndarray | None:
    """``(H, W, C)`` diagonal symbol values when every coefficient is diagonal.

    Returns None when the coefficients couple channels; callers then fall back
    to the dense ``(H, W, C, C)`` sweep.  Keeping decoupled channels on this
    path makes wide decoupled configurations (and the scalar case) cheap.
    """
    fx, fy = effective_diffusion(z)
    bx, by = effective_convection(z)
    rm = effective_reaction(z)
    if not _diagonal_only(fx, fy, bx, by, rm):
        return None
    kx, ky = grid.mesh()
    dfx, dfy = np.diagonal(fx), np.diagonal(fy)
    dbx, dby = np.diagonal(bx), np.diagonal(by)
    drm = np.diagonal(rm)
    mdiag = kx[..., None] * dfx + ky[..., None] * dfy
    lam = -(mdiag**2) + drm + 1j * (kx[..., None] * dbx + ky[..., None] * dby)
    return pair_symmetrize(np.exp(z.tau * lam))


# ---------------------------------------------------------------------------
# forward pass


def _apply_embedding(g: EmbedParams, uh: np.ndarray, grid: FrequencyGrid) -> np.ndarray:
    """Apply the embedding symbol to a spectrum without materializing it."""
    kx, ky = grid.odd_mesh()
    out = np.einsum("oc,bchw->bohw", g.g0, uh)
    out += (1j * kx) * np.einsum("oc,bchw->bohw", g.gx, uh)
    out += (1j * ky) * np.einsum("oc,bchw->bohw", g.gy, uh)
    return out


def pde_ssm_forward(u, g: EmbedParams, z: PdeParams, *, return_residue: bool = False):
    """Full forward pass; returns a ``(B, C_hid, H, W)`` real feature map.

    The operator is linear in ``u``.  Raises ``ValueError`` on a channel
    mismatch between ``u`` and ``g.r`` and :class:`NumericError` when the
    imaginary residue of the pre-projection output exceeds ``RESIDUE_ABORT``
    times its norm (a symbol-symmetry bug) or the symbol computation
    overflows.

    With ``return_residue=True`` the relative imaginary residue diagnostic is
    returned alongside the output.
    """
    u = check_feature_map(u, "u")
    if g.c_in != u.shape[1]:
        raise ValueError(
            f"input has {u.shape[1]} channels but the embedding expects {g.c_in}"
        )
    if g.c_hid != z.c_hid:
        raise ValueError(
            f"embedding width {g.c_hid} does not match evolution width {z.c_hid}"
        )
    h, w = u.shape[2], u.shape[3]
    grid = make_frequency_grid(h, w)

    projected = np.einsum("oc,bchw->bohw", g.r, u)
    uh = dft2(projected)
    vh = _apply_embedding(g, uh, grid)

    diag = _green_diagonal(z, grid)
    if diag is not None:
        hh = vh * diag.transpose(2, 0, 1)[None]
    else:
        sym = green_symbols(z, grid)
        hh = np.einsum("hwoc,bchw->bohw", sym, vh)

    spatial = idft2(hh)
    out, residue = project_real(spatial)
    if residue > RESIDUE_ABORT:
        raise NumericError(
            "imaginary residue indicates a symbol symmetry bug", residue=residue
        )
    if return_residue:
        return out, residue
    return out


def composed_symbols(z: PdeParams, g: EmbedParams | None, grid: FrequencyGrid) -> np.ndarray:
    """Per-frequency matrices of the full operator, ``(H, W, C, C)``.

    Green symbol alone, or composed with the embedding symbol when ``g`` is
    given (channel mixing ``r`` acts pointwise in space and is not part of
    the per-frequency matrix).
    """
    sym = green_symbols(z, grid)
    if g is None:
        return sym
    return np.einsum("hwij,hwjk->hwik", sym, embed_symbols(g, grid))


def kernel_image(
    z: PdeParams,
    g: EmbedParams | None,
    h: int,
    w: int,
    out_ch: int,
    in_ch: int,
) -> np.ndarray:
    """Spatial impulse response of one channel pair, centered for display.

    Inverse transform of the ``(out_ch, in_ch)`` entry of the per-frequency
    operator matrices, circularly shifted by half the grid so the zero-lag
    tap sits at ``(H//2, W//2)``.
    """
    h = check_positive_int(h, "H")
    w = check_positive_int(w, "W")
    c = z.c_hid
    if not (0 <= out_ch < c and 0 <= in_ch < c):
        raise ValueError(
            f"channel pair ({out_ch}, {in_ch}) out of range for width {c}"
        )
    grid = make_frequency_grid(h, w)
    entry = composed_symbols(z, g, grid)[:, :, out_ch, in_ch]
    spatial = idft2(entry[None, None])[0, 0]
    kernel, _ = project_real(spatial)
    return np.fft.fftshift(kernel)


# ---------------------------------------------------------------------------
# 1D reference system


def ssm1d_green(p: Ssm1dParams, t: float) -> np.ndarray:
    """Causal impulse response ``exp(t*A)`` for ``t >= 0``, zero for ``t < 0``."""
    if t < 0:
        return np.zeros_like(p.a)
    return mat_exp(t * p.a).real


def ssm1d_apply(p: Ssm1dParams, u, dt: float) -> np.ndarray:
    """Discrete causal convolution of the input with the impulse response.

    ``h[n] = sum_{m <= n} exp((n-m)*dt*A) B u[m] dt`` (left-endpoint rule),
    evaluated through the equivalent one-step recurrence
    ``h[n] = exp(dt*A) h[n-1] + B u[n] dt``.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    seq = np.atleast_2d(np.asarray(u, dtype=np.float64))
    if seq.shape[1] != p.b.shape[1]:
        raise ValueError(
            f"input vectors have dimension {seq.shape[1]}, expected {p.b.shape[1]}"
        )
    step = mat_exp(dt * p.a).real
    out = np.zeros((seq.shape[0], p.a.shape[0]))
    state = np.zeros(p.a.shape[0])
    for n in range(seq.shape[0]):
        state = step @ state + dt * (p.b @ seq[n])
        out[n] = state
    return out


# ---------------------------------------------------------------------------
# parameter construction


def init_fit_params(
    c_in: int,
    c_hid: int,
    rng: np.random.Generator,
    *,
    tau: float = 1.0,
    coeff_scale: float = 0.02,
    noise_scale: float = 0.01,
    mode: str = "raw",
) -> tuple[EmbedParams, PdeParams]:
    """Near-identity starting point for operator fitting.

    Evolution coefficients are uniform on ``(-coeff_scale/C, coeff_scale/C)``
    so the operator starts in the small-``tau*L`` regime where gradients are
    well conditioned; the embedding starts at (a padded) identity plus small
    noise.
    """
    c_in = check_positive_int(c_in, "c_in")
    c_hid = check_positive_int(c_hid, "c_hid")
    lim = coeff_scale / c_hid

    def coeff():
        return rng.uniform(-lim, lim, size=(c_hid, c_hid))

    def noise(shape):
        return noise_scale * rng.uniform(-1.0, 1.0, size=shape)

    r = np.eye(c_hid, c_in) + noise((c_hid, c_in))
    g = EmbedParams(
        r=r,
        g0=np.eye(c_hid) + noise((c_hid, c_hid)),
        gx=noise((c_hid, c_hid)),
        gy=noise((c_hid, c_hid)),
    )
    z = PdeParams(
        fx=coeff(), fy=coeff(), bx=coeff(), by=coeff(), rm=coeff(),
        tau=tau, mode=mode,
    )
    return g, z


def random_params(
    c_in: int,
    c_hid: int,
    rng: np.random.Generator,
    *,
    tau: float = 1.0,
    scale: float = 0.5,
    mode: str = "stable",
) -> tuple[EmbedParams, PdeParams]:
    """Generic random operator draw used by tests and verification suites."""
    c_in = check_positive_int(c_in, "c_in")
    c_hid = check_positive_int(c_hid, "c_hid")

    def draw(rows, cols):
        return scale * rng.standard_normal((rows, cols)) / np.sqrt(cols)

    g = EmbedParams(
        r=draw(c_hid, c_in),
        g0=np.eye(c_hid) + draw(c_hid, c_hid),
        gx=draw(c_hid, c_hid),
        gy=draw(c_hid, c_hid),
    )
    z = PdeParams(
        fx=draw(c_hid, c_hid), fy=draw(c_hid, c_hid),
        bx=draw(c_hid, c_hid), by=draw(c_hid, c_hid),
        rm=draw(c_hid, c_hid), tau=tau, mode=mode,
    )
    return g, z

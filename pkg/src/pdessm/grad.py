"""Analytic gradients of the spectral operator and a fitting demonstrator.

The forward pass is a fixed, shallow composition (pointwise projection, DFT,
two per-frequency multipliers, inverse DFT, real projection), so gradients
are assembled by hand instead of through an autodiff tape:

* the input gradient applies the conjugate-transposed symbols in the
  frequency domain (the forward map is linear in the input, so this is the
  exact adjoint operator);
* gradients of the evolution coefficients route through the Fréchet
  derivative of the matrix exponential.  The adjoint identity
  ``<W, L(M, E)> = <L(M^H, W), E>`` (trace inner product) turns what would
  be one derivative probe per parameter entry into a single Fréchet solve
  per frequency bin, O(bins * C^3) per parameter block in total.

Gradients are defined for raw-mode parameters; the stable-mode projections
are treated as non-differentiable reparameterizations and rejected.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .exceptions import NumericError
from .grid import make_frequency_grid
from .linalg import frechet_batch
from .operator import (
    EmbedParams,
    PdeParams,
    _apply_embedding,
    evolution_matrices,
    green_symbols,
    pair_symmetrize,
    pde_ssm_forward,
)
from .spectral import dft2, idft2
from .validation import check_feature_map


@dataclass(frozen=True)
class ParamGrads:
    """Gradients shaped like the parameter fields they correspond to."""

    r: np.ndarray
    g0: np.ndarray
    gx: np.ndarray
    gy: np.ndarray
    fx: np.ndarray
    fy: np.ndarray
    bx: np.ndarray
    by: np.ndarray
    rm: np.ndarray
    d_tau: float

    def scaled(self, factor: float) -> "ParamGrads":
        return ParamGrads(
            r=factor * self.r, g0=factor * self.g0, gx=factor * self.gx,
            gy=factor * self.gy, fx=factor * self.fx, fy=factor * self.fy,
            bx=factor * self.bx, by=factor * self.by, rm=factor * self.rm,
            d_tau=factor * self.d_tau,
        )

    def dot(self, other: "ParamGrads") -> float:
        """Euclidean inner product over all parameter entries."""
        total = self.d_tau * other.d_tau
        for name in ("r", "g0", "gx", "gy", "fx", "fy", "bx", "by", "rm"):
            total += float(np.sum(getattr(self, name) * getattr(other, name)))
        return total

    def norm(self) -> float:
        return float(np.sqrt(self.dot(self)))


def pde_ssm_backward(u, g: EmbedParams, z: PdeParams, upstream):
    """Exact gradients of ``<upstream, forward(u)>``.

    Returns ``(input_grad, ParamGrads)``.  ``upstream`` must match the
    forward output shape ``(B, C_hid, H, W)``; ``z.mode`` must be ``'raw'``.
    """
    if z.mode != "raw":
        raise ValueError(
            "parameter gradients are defined for raw mode; stable-mode "
            "projections are non-differentiable reparameterizations"
        )
    u = check_feature_map(u, "u")
    upstream = check_feature_map(upstream, "upstream")
    if g.c_in != u.shape[1]:
        raise ValueError(
            f"input has {u.shape[1]} channels but the embedding expects {g.c_in}"
        )
    expected = (u.shape[0], g.c_hid, u.shape[2], u.shape[3])
    if upstream.shape != expected:
        raise ValueError(
            f"upstream shape {upstream.shape} does not match forward output {expected}"
        )
    h, w = u.shape[2], u.shape[3]
    c = z.c_hid
    grid = make_frequency_grid(h, w)
    kx, ky = grid.mesh()
    kxo, kyo = grid.odd_mesh()

    # Recomputed forward intermediates.
    projected = np.einsum("oc,bchw->bohw", g.r, u)
    uh = dft2(projected)
    vh = _apply_embedding(g, uh, grid)
    lam = evolution_matrices(z, grid)
    green_eff = green_symbols(z, grid)

    # Spectral seed of <upstream, Re(idft2(.))>.
    w_hat = dft2(upstream) / (h * w)

    # --- evolution-stage parameter gradients ------------------------------
    # Seed per bin: S = sum_b w_hat v_hat^H, then the pairing adjoint.
    seed = np.einsum("bohw,bchw->hwoc", w_hat, np.conj(vh))
    seed = pair_symmetrize(seed)
    scale = float(np.max(np.abs(seed)))
    if scale > 0.0:
        mh = np.conj(np.swapaxes(z.tau * lam, -1, -2)).reshape(h * w, c, c)
        probe = frechet_batch(mh, (seed / scale).reshape(h * w, c, c))
        probe = (scale * probe).reshape(h, w, c, c)
    else:
        probe = np.zeros_like(lam)

    re_p = probe.real
    im_p = probe.imag
    d_rm = z.tau * re_p.sum(axis=(0, 1)) if z.reaction_on else np.zeros((c, c))
    if z.convection_on:
        d_bx = z.tau * np.einsum("hw,hwij->ij", np.broadcast_to(kx, (h, w)), im_p)
        d_by = z.tau * np.einsum("hw,hwij->ij", np.broadcast_to(ky, (h, w)), im_p)
    else:
        d_bx = np.zeros((c, c))
        d_by = np.zeros((c, c))
    if z.diffusion_on:
        m = kx[..., None, None] * z.fx + ky[..., None, None] * z.fy
        g_m = -z.tau * np.einsum("hwij,hwjk->hwik", re_p + np.swapaxes(re_p, -1, -2), m)
        d_fx = np.einsum("hw,hwij->ij", np.broadcast_to(kx, (h, w)), g_m)
        d_fy = np.einsum("hw,hwij->ij", np.broadcast_to(ky, (h, w)), g_m)
    else:
        d_fx = np.zeros((c, c))
        d_fy = np.zeros((c, c))
    d_tau = float(np.sum(np.real(np.conj(probe) * lam)))

    # --- embedding-stage gradients ----------------------------------------
    wv = np.einsum("hwco,bchw->bohw", np.conj(green_eff), w_hat)
    seed_b = np.einsum("bohw,bchw->hwoc", wv, np.conj(uh))
    d_g0 = seed_b.real.sum(axis=(0, 1))
    d_gx = np.einsum("hw,hwij->ij", np.broadcast_to(kxo, (h, w)), seed_b.imag)
    d_gy = np.einsum("hw,hwij->ij", np.broadcast_to(kyo, (h, w)), seed_b.imag)

    # --- projection gradients and input gradient --------------------------
    uh_bar = np.einsum("co,bchw->bohw", g.g0, wv)
    uh_bar -= (1j * kxo) * np.einsum("co,bchw->bohw", g.gx, wv)
    uh_bar -= (1j * kyo) * np.einsum("co,bchw->bohw", g.gy, wv)
    proj_grad = (h * w) * idft2(uh_bar).real
    d_r = np.einsum("bohw,bchw->oc", proj_grad, u)
    input_grad = np.einsum("oc,bohw->bchw", g.r, proj_grad)

    grads = ParamGrads(
        r=d_r, g0=d_g0, gx=d_gx, gy=d_gy,
        fx=d_fx, fy=d_fy, bx=d_bx, by=d_by, rm=d_rm, d_tau=d_tau,
    )
    return input_grad, grads


# ---------------------------------------------------------------------------
# least-squares operator fitting


def mse_loss(g: EmbedParams, z: PdeParams, xs: np.ndarray, ys: np.ndarray, n_pairs: int) -> float:
    pred = pde_ssm_forward(xs, g, z)
    return float(np.sum((pred - ys) ** 2)) / n_pairs


def _loss_grads(g, z, xs, ys, n_pairs):
    pred = pde_ssm_forward(xs, g, z)
    residual = pred - ys
    loss = float(np.sum(residual**2)) / n_pairs
    _, grads = pde_ssm_backward(xs, g, z, (2.0 / n_pairs) * residual)
    return loss, grads


def _step_params(g: EmbedParams, z: PdeParams, grads: ParamGrads, lr: float):
    new_tau = z.tau - lr * grads.d_tau
    if new_tau <= 1e-12:
        return None
    new_g = EmbedParams(
        r=g.r - lr * grads.r,
        g0=g.g0 - lr * grads.g0,
        gx=g.gx - lr * grads.gx,
        gy=g.gy - lr * grads.gy,
    )
    new_z = replace(
        z,
        fx=z.fx - lr * grads.fx,
        fy=z.fy - lr * grads.fy,
        bx=z.bx - lr * grads.bx,
        by=z.by - lr * grads.by,
        rm=z.rm - lr * grads.rm,
        tau=new_tau,
    )
    return new_g, new_z


MAX_HALVINGS = 20


def fit_operator(target_pairs, g0: EmbedParams, z0: PdeParams, lr: float, steps: int):
    """Plain gradient descent on the mean squared operator-regression error.

    ``target_pairs`` is a list of ``(input, target)`` feature-map pairs; the
    loss is ``sum_i ||forward(x_i) - y_i||^2 / len(pairs)``.  The step size
    backtracks (halving, at most ``MAX_HALVINGS`` times per step) until the
    loss does not increase, so the returned trace is non-increasing; an
    accepted first-try step doubles the carried step size.  Runs in raw mode.

    Returns ``(fitted_embed, fitted_pde, loss_trace)``.
    """
    if lr <= 0:
        raise ValueError(f"lr must be positive, got {lr}")
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if not target_pairs:
        raise ValueError("target_pairs must be non-empty")
    xs = np.concatenate([check_feature_map(x, "input") for x, _ in target_pairs], axis=0)
    ys = np.concatenate([check_feature_map(y, "target") for _, y in target_pairs], axis=0)
    if xs.shape[0] != ys.shape[0] or xs.shape[2:] != ys.shape[2:]:
        raise ValueError("inputs and targets must agree in batch and spatial shape")
    n_pairs = len(target_pairs)

    g, z = g0, z0
    loss, grads = _loss_grads(g, z, xs, ys, n_pairs)
    if not np.isfinite(loss):
        raise NumericError("initial fitting loss is non-finite")
    trace = [loss]
    lr_cur = lr
    for _ in range(steps):
        accepted = False
        lr_try = lr_cur
        for halving in range(MAX_HALVINGS + 1):
            candidate = _step_params(g, z, grads, lr_try)
            if candidate is not None:
                try:
                    cand_loss = mse_loss(candidate[0], candidate[1], xs, ys, n_pairs)
                except NumericError:
                    cand_loss = np.inf
                if np.isfinite(cand_loss) and cand_loss <= loss:
                    g, z = candidate
                    loss = cand_loss
                    accepted = True
                    if halving == 0:
                        lr_cur = lr_try * 2.0
                    else:
                        lr_cur = lr_try
                    break
            lr_try *= 0.5
        trace.append(loss)
        if not accepted:
            lr_cur = lr_try
            continue
        if loss == 0.0:
            trace.extend([0.0] * (steps - len(trace) + 1))
            break
        loss, grads = _loss_grads(g, z, xs, ys, n_pairs)
    return g, z, np.asarray(trace)

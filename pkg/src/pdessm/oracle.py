"""Independent brute-force references used by tests and the verify command.

Everything here trades speed for independence: transforms are direct
summations against explicitly constructed DFT matrices (never the FFT),
evolution is step-by-step numerical integration (never a matrix exponential),
and gradients are central finite differences.  None of these functions call
into the code paths they exist to validate; the evolution-matrix assembly is
deliberately re-derived here rather than imported.  Extents are expected to
stay small (tests cap them at 16x16).
"""

from __future__ import annotations

import numpy as np

from .operator import PdeParams, Ssm1dParams
from .validation import check_feature_map, check_positive_int, check_spectrum_map


def _dft_matrix(n: int, sign: float) -> np.ndarray:
    idx = np.arange(n)
    return np.exp(sign * 2j * np.pi * np.outer(idx, idx) / n)


def dft2_direct(u) -> np.ndarray:
    """Unnormalized forward 2D DFT by explicit summation matrices."""
    arr = check_feature_map(u)
    h, w = arr.shape[2], arr.shape[3]
    fh = _dft_matrix(h, -1.0)
    fw = _dft_matrix(w, -1.0)
    return np.einsum("mx,bcxy,ny->bcmn", fh, arr, fw)


def idft2_direct(s) -> np.ndarray:
    """Inverse 2D DFT (with 1/(H*W)) by explicit summation matrices."""
    arr = check_spectrum_map(s)
    h, w = arr.shape[2], arr.shape[3]
    fh = _dft_matrix(h, 1.0)
    fw = _dft_matrix(w, 1.0)
    return np.einsum("xm,bcmn,yn->bcxy", fh, arr, fw) / (h * w)


def spatial_circular_conv(u, kernels) -> np.ndarray:
    """Direct periodic convolution: ``out[co] = sum_ci kernels[co,ci] (*) u[ci]``.

    ``kernels`` has shape ``(C_out, C_in, H, W)`` with spatial extents equal
    to the input's.  The loop over displacements makes this O((H*W)^2) per
    channel pair and keeps it bit-independent of any transform code.
    """
    arr = check_feature_map(u)
    ker = np.asarray(kernels, dtype=np.float64)
    if ker.ndim != 4:
        raise ValueError(f"kernels must be (C_out, C_in, H, W), got shape {ker.shape}")
    if ker.shape[1] != arr.shape[1] or ker.shape[2:] != arr.shape[2:]:
        raise ValueError(
            f"kernel shape {ker.shape} incompatible with input shape {arr.shape}"
        )
    h, w = arr.shape[2], arr.shape[3]
    out = np.zeros((arr.shape[0], ker.shape[0], h, w))
    for dx in range(h):
        for dy in range(w):
            tap = ker[:, :, dx, dy]
            if not np.any(tap):
                continue
            shifted = np.roll(arr, shift=(dx, dy), axis=(2, 3))
            out += np.einsum("oc,bchw->bohw", tap, shifted)
    return out


def _frequencies(n: int) -> np.ndarray:
    m = np.arange(n)
    return np.where(m <= n // 2, 2.0 * np.pi * m / n, 2.0 * np.pi * (m - n) / n)


def _evolution_matrices_independent(z: PdeParams, h: int, w: int) -> np.ndarray:
    # Re-derived here on purpose: the oracle must not share symbol-assembly
    # code with the operator module it validates.
    kx = _frequencies(h)[:, None, None, None]
    ky = _frequencies(w)[None, :, None, None]
    c = z.c_hid
    lam = np.zeros((h, w, c, c), dtype=np.complex128)
    if z.diffusion_on:
        m = kx * z.fx + ky * z.fy
        lam -= m @ np.swapaxes(m, -1, -2)
    if z.convection_on:
        bx, by = z.bx, z.by
        if z.mode == "stable":
            bx = 0.5 * (bx + bx.T)
            by = 0.5 * (by + by.T)
        lam += 1j * (kx * bx + ky * by)
    if z.reaction_on:
        if z.mode == "stable":
            sym = 0.5 * (z.rm + z.rm.T)
            vals, vecs = np.linalg.eigh(sym)
            lam += 0.5 * (z.rm - z.rm.T) - (vecs * np.abs(vals)) @ vecs.T
        else:
            lam += z.rm
    return lam


def rk4_evolve_spectrum(v, z: PdeParams, steps: int) -> np.ndarray:
    """Classical RK4 integration of ``d h(k)/dt = L(k) h(k)`` from 0 to tau.

    Integrates every frequency bin of the ``(B, C, H, W)`` spectrum
    simultaneously; global error is O(steps^-4).
    """
    steps = check_positive_int(steps, "steps")
    spec = check_spectrum_map(v)
    if spec.shape[1] != z.c_hid:
        raise ValueError(
            f"spectrum has {spec.shape[1]} channels, parameters expect {z.c_hid}"
        )
    lam = _evolution_matrices_independent(z, spec.shape[2], spec.shape[3])
    dt = z.tau / steps

    def rhs(state):
        return np.einsum("hwoc,bchw->bohw", lam, state)

    state = spec
    for _ in range(steps):
        k1 = rhs(state)
        k2 = rhs(state + 0.5 * dt * k1)
        k3 = rhs(state + 0.5 * dt * k2)
        k4 = rhs(state + dt * k3)
        state = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return state


def rk4_ssm1d(p: Ssm1dParams, u, dt: float) -> np.ndarray:
    """RK4 integration of ``dh/dt = A h + B u`` with zero-order-hold input.

    ``out[n]`` is the state after step ``n`` (time ``(n+1)*dt``), matching
    the indexing of ``ssm1d_apply``.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    seq = np.atleast_2d(np.asarray(u, dtype=np.float64))
    a, b = p.a, p.b
    state = np.zeros(a.shape[0])
    out = np.zeros((seq.shape[0], a.shape[0]))
    for n in range(seq.shape[0]):
        forcing = b @ seq[n]
        k1 = a @ state + forcing
        k2 = a @ (state + 0.5 * dt * k1) + forcing
        k3 = a @ (state + 0.5 * dt * k2) + forcing
        k4 = a @ (state + dt * k3) + forcing
        state = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[n] = state
    return out


def finite_diff_grad(loss, params: dict, eps: float) -> dict:
    """Central-difference gradient of ``loss`` over a dict of parameters.

    ``params`` maps names to float arrays or scalars; ``loss`` takes such a
    dict and returns a float.  Returns a dict of matching shapes.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")

    def evaluate(name, perturbed_flat, template):
        if np.ndim(template) == 0:
            candidate = float(perturbed_flat[0])
        else:
            candidate = perturbed_flat.reshape(np.shape(template))
        return float(loss({**params, name: candidate}))

    grads = {}
    for name, value in params.items():
        flat = np.atleast_1d(np.asarray(value, dtype=np.float64)).ravel().copy()
        grad = np.zeros_like(flat)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + eps
            hi = evaluate(name, flat, value)
            flat[i] = saved - eps
            lo = evaluate(name, flat, value)
            flat[i] = saved
            grad[i] = (hi - lo) / (2.0 * eps)
        if np.ndim(value) == 0:
            grads[name] = float(grad[0])
        else:
            grads[name] = grad.reshape(np.shape(value))
    return grads

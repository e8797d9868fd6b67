"""2D discrete Fourier transform pair used by the operator pipeline.

Convention: unnormalized forward transform, ``1/(H*W)`` on the inverse, so
``idft2(dft2(u)) == u``.  Transforms act on the trailing two axes of
``(B, C, H, W)`` arrays and support arbitrary (not only power-of-two)
extents.  Everything runs in double precision; the benchmark module owns the
only single-precision code path in the package.
"""

from __future__ import annotations

import numpy as np

from .validation import check_feature_map, check_spectrum_map


def dft2(u) -> np.ndarray:
    """Forward transform of a real ``(B, C, H, W)`` feature map.

    Returns the full complex spectrum (no half-spectrum packing):
    ``out[b,c,m,n] = sum_{x,y} u[b,c,x,y] * exp(-i*(2*pi*m*x/H + 2*pi*n*y/W))``.
    """
    arr = check_feature_map(u)
    return np.fft.fft2(arr, axes=(-2, -1))


def idft2(s) -> np.ndarray:
    """Inverse transform with ``1/(H*W)`` normalization; returns a complex map."""
    arr = check_spectrum_map(s)
    return np.fft.ifft2(arr, axes=(-2, -1))


def project_real(x) -> tuple[np.ndarray, float]:
    """Real part of a nominally real complex map plus its imaginary residue.

    The residue is ``max|Im x|`` divided by the L2 norm of ``Re x`` (it is
    returned absolute when the real part is identically zero).  Callers decide
    what residue magnitude constitutes an error.
    """
    arr = np.asarray(x, dtype=np.complex128)
    real = np.ascontiguousarray(arr.real)
    imag_max = float(np.max(np.abs(arr.imag))) if arr.size else 0.0
    norm = float(np.linalg.norm(real.ravel()))
    if norm > 0.0:
        return real, imag_max / norm
    return real, imag_max

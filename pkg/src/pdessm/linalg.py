"""Dense complex matrix kernels: matrix exponential and its Fréchet derivative.

The exponential uses scaling-and-squaring with a diagonal Pade approximant,
selecting the approximant degree from the 1-norm of the (scaled) input.  The
per-frequency evolution matrices this package exponentiates are generically
non-normal, so an eigendecomposition route would be ill-conditioned; the Pade
route is backward stable for the norm range exercised here (up to ~1e2 after
scaling).

All entry points accept a single ``(C, C)`` matrix; the ``*_batch`` variants
accept a stacked ``(..., C, C)`` array and share the scaling exponent across
the stack, which keeps the squaring phase a single stacked matmul chain.
"""

from __future__ import annotations

import numpy as np

from .exceptions import NumericError
from .validation import check_square_matrix

# Degree thresholds and Pade numerator coefficients for the double precision
# scaling-and-squaring ladder (degree: max 1-norm it is accurate for).
_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}

_PADE_B = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (
        17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0,
    ),
    13: (
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
        1187353796428800.0, 129060195264000.0, 10559470521600.0,
        670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
        960960.0, 16380.0, 182.0, 1.0,
    ),
}


def _one_norms(a: np.ndarray) -> np.ndarray:
    """Stacked matrix 1-norms over the trailing two axes."""
    return np.abs(a).sum(axis=-2).max(axis=-1)


def _pade_uv(a: np.ndarray, degree: int) -> tuple[np.ndarray, np.ndarray]:
    b = _PADE_B[degree]
    c = a.shape[-1]
    eye = np.broadcast_to(np.eye(c, dtype=a.dtype), a.shape)
    a2 = a @ a
    if degree == 3:
        u = a @ (b[3] * a2 + b[1] * eye)
        v = b[2] * a2 + b[0] * eye
        return u, v
    a4 = a2 @ a2
    if degree == 5:
        u = a @ (b[5] * a4 + b[3] * a2 + b[1] * eye)
        v = b[4] * a4 + b[2] * a2 + b[0] * eye
        return u, v
    a6 = a4 @ a2
    if degree == 7:
        u = a @ (b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * eye)
        v = b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * eye
        return u, v
    if degree == 9:
        a8 = a6 @ a2
        u = a @ (b[9] * a8 + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * eye)
        v = b[8] * a8 + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * eye
        return u, v
    # degree 13
    w = a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
    u = a @ (w + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * eye)
    v = a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2) \
        + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * eye
    return u, v


def _expm_stack(a: np.ndarray) -> np.ndarray:
    """Scaling-and-squaring exponential of a stacked ``(..., C, C)`` array.

    The scaling exponent is shared across the stack (taken from the largest
    1-norm), so small-norm members incur a few extra exact squarings at worst.
    """
    eta = float(np.max(_one_norms(a))) if a.size else 0.0
    if not np.isfinite(eta):
        raise NumericError("matrix exponential input has non-finite norm", norm=eta)
    squarings = 0
    degree = 13
    for deg in (3, 5, 7, 9, 13):
        if eta <= _THETA[deg]:
            degree = deg
            break
    else:
        degree = 13
    if eta > _THETA[13]:
        squarings = int(np.ceil(np.log2(eta / _THETA[13])))
        a = a * (2.0 ** -squarings)
    u, v = _pade_uv(a, degree)
    result = np.linalg.solve(v - u, v + u)
    # overflow here surfaces as NumericError from the finiteness check
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(squarings):
            result = result @ result
    return result


def mat_exp(m) -> np.ndarray:
    """Matrix exponential ``exp(M)`` of a finite square complex matrix.

    Relative accuracy is ~1e-15 for 1-norms up to ~20.  Raises
    :class:`NumericError` (carrying the input norm) when the result overflows
    to non-finite values, e.g. for a large positive real spectrum.
    """
    a = check_square_matrix(m, "M")
    if a.shape == (1, 1):
        with np.errstate(over="ignore"):
            out = np.exp(a)
    else:
        out = _expm_stack(a.astype(np.complex128, copy=False))
    if not np.all(np.isfinite(out)):
        raise NumericError(
            "matrix exponential overflowed to non-finite values",
            norm=float(_one_norms(a)),
        )
    return out


def mat_exp_batch(a) -> np.ndarray:
    """Exponentials of a stacked ``(..., C, C)`` array in one squaring chain."""
    arr = np.ascontiguousarray(np.asarray(a), dtype=np.complex128)
    if arr.ndim < 2 or arr.shape[-1] != arr.shape[-2]:
        raise ValueError(f"expected stacked square matrices, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericError("matrix exponential input is non-finite")
    if arr.shape[-1] == 1:
        return np.exp(arr)
    out = _expm_stack(arr)
    if not np.all(np.isfinite(out)):
        raise NumericError(
            "matrix exponential overflowed to non-finite values",
            norm=float(np.max(_one_norms(arr))),
        )
    return out


def mat_exp_frechet(m, e) -> tuple[np.ndarray, np.ndarray]:
    """``(exp(M), L(M, E))`` where ``L`` is the Fréchet derivative of exp.

    Computed through the block identity
    ``exp([[M, E], [0, M]]) = [[exp(M), L(M, E)], [0, exp(M)]]``; the first
    component is the plain :func:`mat_exp` value, so both outputs are mutually
    consistent with the forward exponential.
    """
    a = check_square_matrix(m, "M").astype(np.complex128, copy=False)
    d = check_square_matrix(e, "E").astype(np.complex128, copy=False)
    if a.shape != d.shape:
        raise ValueError(f"M and E must share a shape, got {a.shape} and {d.shape}")
    value = mat_exp(a)
    scale = float(np.max(np.abs(d))) if d.size else 0.0
    if scale == 0.0:
        return value, np.zeros_like(a)
    frech = frechet_batch(a[None], d[None] / scale)[0] * scale
    return value, frech


def frechet_batch(ms: np.ndarray, es: np.ndarray) -> np.ndarray:
    """Fréchet derivatives ``L(M_i, E_i)`` for stacked matrix pairs.

    Directions are used as given; callers worried about badly scaled ``E``
    should normalize (``L`` is linear in ``E``).
    """
    ms = np.asarray(ms, dtype=np.complex128)
    es = np.asarray(es, dtype=np.complex128)
    if ms.shape != es.shape:
        raise ValueError("matrix and direction stacks must share a shape")
    c = ms.shape[-1]
    block = np.zeros(ms.shape[:-2] + (2 * c, 2 * c), dtype=np.complex128)
    block[..., :c, :c] = ms
    block[..., :c, c:] = es
    block[..., c:, c:] = ms
    big = _expm_stack(block)
    if not np.all(np.isfinite(big)):
        raise NumericError("Fréchet block exponential overflowed")
    return np.ascontiguousarray(big[..., :c, c:])


def spectral_abscissa(m) -> float:
    """Maximum real part of the eigenvalues of ``M``."""
    a = check_square_matrix(m, "M")
    if a.shape == (1, 1):
        return float(np.real(a[0, 0]))
    return float(np.max(np.linalg.eigvals(a).real))

"""Discrete frequency grid and Hermitian-symmetry utilities.

Feature maps live on a periodic ``H x W`` pixel grid.  Every Fourier-domain
multiplier in this package is evaluated on the angular frequencies

    kx[m] = 2*pi*m/H        for m <= H/2,
    kx[m] = 2*pi*(m - H)/H  for m >  H/2,

(DC first, standard DFT bin ordering), and likewise for ``ky`` with ``W``.
For even extents the shared Nyquist bin carries the positive frequency +pi.
With this convention a pure phase factor ``exp(-i * kx[m] * s)`` with integer
``s`` is an exact ``s``-cell circular shift.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import check_positive_int, check_spectrum_map


@dataclass(frozen=True)
class FrequencyGrid:
    """Angular frequencies for an ``H x W`` periodic grid.

    ``kx`` has length H (row axis), ``ky`` length W (column axis).  Treat the
    arrays as immutable.
    """

    kx: np.ndarray
    ky: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.kx), len(self.ky)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Broadcastable ``(H, 1)`` and ``(1, W)`` views of the frequencies."""
        return self.kx[:, None], self.ky[None, :]

    def odd_mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Like :meth:`mesh` but with the even-extent Nyquist bin zeroed.

        First-order (odd in k) symbol terms must vanish at a self-paired
        Nyquist bin for the operator to map real inputs to real outputs; see
        :func:`pdessm.operator.pair_symmetrize`.
        """
        kx = self.kx.copy()
        ky = self.ky.copy()
        h, w = self.shape
        if h % 2 == 0 and h > 1:
            kx[h // 2] = 0.0
        if w % 2 == 0 and w > 1:
            ky[w // 2] = 0.0
        return kx[:, None], ky[None, :]


def _axis_frequencies(n: int) -> np.ndarray:
    m = np.arange(n)
    return np.where(m <= n // 2, 2.0 * np.pi * m / n, 2.0 * np.pi * (m - n) / n)


def make_frequency_grid(h: int, w: int) -> FrequencyGrid:
    """Build the angular frequency grid for an ``h x w`` periodic domain.

    Raises ``ValueError`` for non-positive extents.
    """
    h = check_positive_int(h, "H")
    w = check_positive_int(w, "W")
    grid = FrequencyGrid(kx=_axis_frequencies(h), ky=_axis_frequencies(w))
    grid.kx.flags.writeable = False
    grid.ky.flags.writeable = False
    return grid


def hermitian_symmetry_check(s, tol: float) -> bool:
    """True iff ``s[b,c,m,n] == conj(s[b,c,(H-m)%H,(W-n)%W])`` within ``tol``.

    ``tol`` is relative to the largest magnitude in ``s`` (absolute when the
    spectrum is identically zero).
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    arr = check_spectrum_map(s)
    flipped = arr[:, :, ::-1, ::-1]
    mirrored = np.roll(flipped, shift=(1, 1), axis=(2, 3))
    scale = np.max(np.abs(arr))
    err = np.max(np.abs(arr - np.conj(mirrored)))
    if scale == 0.0:
        return bool(err <= tol)
    return bool(err <= tol * scale)

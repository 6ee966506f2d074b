"""Fourier-side helpers for banded trigonometric data on T^2 x S^1.

Coefficient tensors are indexed as ``c[i1, i2, j, ...]`` with x-modes
``k1 = i1 - X``, ``k2 = i2 - X`` for an x-band ``X`` and angular mode
``n = j - T`` for a theta-band ``T``.  The represented function is

    f(x, theta) = sum_{k, n} c[k, n] exp(i k.x) exp(i n theta),

sampled on uniform grids x_a = 2 pi a / N.  All conversions below are exact
for band-limited data as long as the grid resolves the band.
"""

from __future__ import annotations

import numpy as np
from scipy.fft import fftn, ifftn, next_fast_len

from .errors import BandOverflowError


def mode_range(band: int) -> np.ndarray:
    return np.arange(-band, band + 1)


def grid_size(band: int, oversample: float = 2.0, floor: int = 8) -> int:
    """FFT-friendly grid size that resolves `band` with room to certify tails."""
    n = max(int(np.ceil(oversample * (2 * band + 1))), 2 * band + 1, floor)
    return next_fast_len(n)


def embed_modes(coeffs: np.ndarray, nx: int, ntheta: int) -> np.ndarray:
    """Place banded coefficients into a full FFT array (modes taken mod N)."""
    x_band = (coeffs.shape[0] - 1) // 2
    t_band = (coeffs.shape[2] - 1) // 2
    if nx < 2 * x_band + 1 or ntheta < 2 * t_band + 1:
        raise ValueError(
            f"grid ({nx},{ntheta}) cannot hold bands ({x_band},{t_band}) without aliasing"
        )
    out = np.zeros((nx, nx, ntheta) + coeffs.shape[3:], dtype=np.complex128)
    ix = mode_range(x_band) % nx
    it = mode_range(t_band) % ntheta
    out[np.ix_(ix, ix, it)] = coeffs
    return out


_FFT_WORKERS = 2


def grid_from_coeffs(coeffs: np.ndarray, nx: int, ntheta: int) -> np.ndarray:
    """Sample the banded function on the uniform (nx, nx, ntheta) grid."""
    emb = embed_modes(coeffs, nx, ntheta)
    vals = ifftn(emb, axes=(0, 1, 2), workers=_FFT_WORKERS)
    vals *= nx * nx * ntheta
    return vals


def coeffs_from_grid(
    values: np.ndarray,
    x_band: int,
    theta_band: int,
    band_tol: float | None = None,
    what: str = "field",
) -> np.ndarray:
    """Extract banded coefficients from grid samples.

    When `band_tol` is given, the relative magnitude of the largest discarded
    coefficient is certified against it; exceeding the tolerance raises
    BandOverflowError (the hard band-policy error).
    """
    nx, ny, ntheta = values.shape[:3]
    if nx != ny:
        raise ValueError("x-grid must be square")
    if nx < 2 * x_band + 1 or ntheta < 2 * theta_band + 1:
        raise ValueError("grid too small for the requested bands")
    c = fftn(values, axes=(0, 1, 2), workers=_FFT_WORKERS)
    c /= nx * nx * ntheta
    ix = mode_range(x_band) % nx
    it = mode_range(theta_band) % ntheta
    kept = c[np.ix_(ix, ix, it)].copy()
    if band_tol is not None:
        # absolute certificate with a floor: all-roundoff data must pass
        scale = max(float(np.max(np.abs(c))), 1.0)
        c[np.ix_(ix, ix, it)] = 0.0
        dropped = float(np.max(np.abs(c)))
        if dropped > band_tol * scale:
            raise BandOverflowError(
                f"{what}: discarded coefficient mass {dropped:.3e} "
                f"(scale {scale:.3e}) exceeds band_tol={band_tol:.1e} "
                f"at bands ({x_band},{theta_band})"
            )
    return kept


def eval_at_points(
    coeffs: np.ndarray,
    x1: np.ndarray,
    x2: np.ndarray,
    theta: np.ndarray,
) -> np.ndarray:
    """Evaluate the banded function at arbitrary points (vectorized over points)."""
    x_band = (coeffs.shape[0] - 1) // 2
    t_band = (coeffs.shape[2] - 1) // 2
    kx = mode_range(x_band)
    nn = mode_range(t_band)
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    e1 = np.exp(1j * np.outer(x1, kx))
    e2 = np.exp(1j * np.outer(x2, kx))
    e3 = np.exp(1j * np.outer(theta, nn))
    return np.einsum("abc...,pa,pb,pc->p...", coeffs, e1, e2, e3, optimize=True)

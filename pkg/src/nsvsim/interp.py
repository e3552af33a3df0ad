"""Cubic B-spline interpolation support for phase-space transport.

Spatial axes are periodic; velocity axes use zero extension (the distribution
is compactly supported inside the velocity box, so samples are zero-padded
before prefiltering and lookups outside the box return zero).  The prefilters
turn samples into B-spline coefficients; evaluation sums the 4-point tensor
stencil per axis.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import spline_filter1d

V_PAD = 4  # zero cells added per side of each velocity axis before filtering


def prefilter_periodic(values: np.ndarray) -> np.ndarray:
    """B-spline coefficients for the trailing two axes, periodic wrap."""
    out = spline_filter1d(values, order=3, axis=-2, mode="grid-wrap", output=np.float64)
    return spline_filter1d(out, order=3, axis=-1, mode="grid-wrap", output=np.float64)


def pad_phase(values: np.ndarray) -> np.ndarray:
    """Zero-pad the two velocity axes of an (nx, nx, nv, nv) array by V_PAD."""
    nx1, nx2, nv1, nv2 = values.shape
    out = np.zeros((nx1, nx2, nv1 + 2 * V_PAD, nv2 + 2 * V_PAD), dtype=np.float64)
    out[:, :, V_PAD:V_PAD + nv1, V_PAD:V_PAD + nv2] = values
    return out


def prefilter_phase(values: np.ndarray) -> np.ndarray:
    """Coefficients for a phase-space array: periodic in x, zero-extended in v.

    Returns a padded array of shape (nx, nx, nv + 2*V_PAD, nv + 2*V_PAD).
    """
    out = pad_phase(values)
    out = spline_filter1d(out, order=3, axis=0, mode="grid-wrap", output=np.float64)
    out = spline_filter1d(out, order=3, axis=1, mode="grid-wrap", output=np.float64)
    out = spline_filter1d(out, order=3, axis=2, mode="grid-constant", output=np.float64)
    out = spline_filter1d(out, order=3, axis=3, mode="grid-constant", output=np.float64)
    return out


def bspline_weights(frac: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Cubic B-spline weights for stencil offsets (-1, 0, 1, 2) at fraction frac."""
    f = np.asarray(frac)
    f2 = f * f
    f3 = f2 * f
    w0 = (1.0 - 3.0 * f + 3.0 * f2 - f3) / 6.0
    w1 = (4.0 - 6.0 * f2 + 3.0 * f3) / 6.0
    w2 = (1.0 + 3.0 * f + 3.0 * f2 - 3.0 * f3) / 6.0
    w3 = f3 / 6.0
    return w0, w1, w2, w3


def eval_periodic_plane(coeffs: np.ndarray, x1: np.ndarray, x2: np.ndarray, dx: float) -> np.ndarray:
    """Evaluate one prefiltered periodic plane (n, n) at scattered points."""
    n = coeffs.shape[-1]
    g1 = np.asarray(x1) / dx
    g2 = np.asarray(x2) / dx
    i1 = np.floor(g1).astype(np.int64)
    i2 = np.floor(g2).astype(np.int64)
    w1 = bspline_weights(g1 - i1)
    w2 = bspline_weights(g2 - i2)
    out = np.zeros(np.broadcast(g1, g2).shape, dtype=np.float64)
    for a in range(4):
        ia = (i1 + (a - 1)) % n
        row = np.zeros_like(out)
        for b in range(4):
            ib = (i2 + (b - 1)) % n
            row += w2[b] * coeffs[ia, ib]
        out += w1[a] * row
    return out


def eval_velocity_plane(coeffs: np.ndarray, x1: np.ndarray, x2: np.ndarray, dx: float) -> np.ndarray:
    """Evaluate both components of a prefiltered (2, n, n) field at points."""
    return np.stack((
        eval_periodic_plane(coeffs[0], x1, x2, dx),
        eval_periodic_plane(coeffs[1], x1, x2, dx),
    ))

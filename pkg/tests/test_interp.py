"""Cubic B-spline interpolation: node exactness, accuracy, boundary behavior."""

import numpy as np

from nsvsim.interp import (
    V_PAD,
    bspline_weights,
    eval_periodic_plane,
    eval_velocity_plane,
    pad_phase,
    prefilter_periodic,
    prefilter_phase,
)

RNG = np.random.default_rng(7)


def test_weights_partition_of_unity():
    frac = RNG.uniform(0.0, 1.0, size=257)
    w = bspline_weights(frac)
    total = w[0] + w[1] + w[2] + w[3]
    assert np.abs(total - 1.0).max() < 1e-14


def test_weights_linear_precision():
    # sum_i w_i * i reproduces the evaluation point 1 + frac within the stencil.
    frac = RNG.uniform(0.0, 1.0, size=129)
    w = bspline_weights(frac)
    first_moment = sum(w[i] * i for i in range(4))
    assert np.abs(first_moment - (1.0 + frac)).max() < 1e-13


def test_periodic_interpolation_exact_at_nodes():
    n = 16
    dx = 2.0 * np.pi / n
    values = RNG.standard_normal((n, n))
    coeffs = prefilter_periodic(values)
    x = np.arange(n) * dx
    x1, x2 = np.meshgrid(x, x, indexing="ij")
    out = eval_periodic_plane(coeffs, x1.ravel(), x2.ravel(), dx)
    assert np.abs(out.reshape(n, n) - values).max() < 1e-12


def test_periodic_interpolation_fourth_order():
    dx_errors = []
    for n in (16, 32):
        dx = 2.0 * np.pi / n
        x = np.arange(n) * dx
        values = np.sin(2 * x)[:, None] * np.cos(x)[None, :]
        coeffs = prefilter_periodic(values)
        probe = RNG.uniform(0.0, 2.0 * np.pi, size=(2, 4096))
        out = eval_periodic_plane(coeffs, probe[0], probe[1], dx)
        exact = np.sin(2 * probe[0]) * np.cos(probe[1])
        dx_errors.append(np.abs(out - exact).max())
    order = np.log2(dx_errors[0] / dx_errors[1])
    assert order > 3.5


def test_periodic_wraps_across_the_seam():
    n = 16
    dx = 2.0 * np.pi / n
    x = np.arange(n) * dx
    values = np.cos(x)[:, None] * np.ones(n)[None, :]
    coeffs = prefilter_periodic(values)
    # points slightly left of 0 / right of 2 pi probe the wrap
    probes = np.array([-0.3 * dx, 2.0 * np.pi - 0.3 * dx, 0.3 * dx])
    out = eval_periodic_plane(coeffs, probes, np.zeros_like(probes), dx)
    exact = np.cos(probes)
    assert np.abs(out - exact).max() < 1e-3


def test_velocity_padding_layout():
    nv = 9
    values = RNG.standard_normal((4, 4, nv, nv))
    padded = pad_phase(values)
    assert padded.shape == (4, 4, nv + 2 * V_PAD, nv + 2 * V_PAD)
    assert np.abs(padded[:, :, V_PAD : V_PAD + nv, V_PAD : V_PAD + nv] - values).max() == 0.0
    assert np.abs(padded[:, :, :V_PAD, :]).max() == 0.0
    assert np.abs(padded[:, :, :, -V_PAD:]).max() == 0.0


def _eval_phase_stencil(coeffs_padded, j1, j2):
    """Spline value at the (j1, j2) velocity node of a padded coefficient plane."""
    w = bspline_weights(np.zeros(1))
    total = 0.0
    for a in range(4):
        for b in range(4):
            total += (
                w[a][0]
                * w[b][0]
                * coeffs_padded[j1 + V_PAD + a - 1, j2 + V_PAD + b - 1]
            )
    return total


def test_phase_prefilter_exact_at_interior_nodes():
    # Zero-extension prefiltering reproduces the samples wherever the data is
    # genuinely compactly supported (boundary ring zeroed).
    nv = 11
    values = RNG.standard_normal((nv, nv))
    values[0, :] = values[-1, :] = values[:, 0] = values[:, -1] = 0.0
    coeffs = prefilter_phase(values[None, None])[0, 0]
    worst = 0.0
    for j1 in range(nv):
        for j2 in range(nv):
            worst = max(worst, abs(_eval_phase_stencil(coeffs, j1, j2) - values[j1, j2]))
    assert worst < 1e-10


def test_phase_coefficients_decay_into_the_pad():
    # Prefilter coefficients fall off geometrically away from the data at the
    # cubic-spline pole rate 2 - sqrt(3) ~ 0.27 per cell, so the zero pad
    # suppresses out-of-box contributions without a hard jump.
    nv = 9
    values = np.zeros((nv, nv))
    values[4, 4] = 1.0
    coeffs = prefilter_phase(values[None, None])[0, 0]
    # interior ratios sit at the pole; the outermost row, shaped by the
    # grid-constant end condition of the filter, still halves
    row_peaks = np.abs(coeffs).max(axis=1)
    center = row_peaks.argmax()
    for k in range(1, V_PAD + 1):
        ratio = row_peaks[center - 4 - k] / row_peaks[center - 4 - k + 1]
        assert ratio < 0.55


def test_velocity_field_plane_matches_componentwise_eval():
    n = 16
    dx = 2.0 * np.pi / n
    planes = RNG.standard_normal((2, n, n))
    coeffs = np.stack([prefilter_periodic(planes[0]), prefilter_periodic(planes[1])])
    probe = RNG.uniform(0.0, 2.0 * np.pi, size=(2, 64))
    both = eval_velocity_plane(coeffs, probe[0], probe[1], dx)
    one = eval_periodic_plane(coeffs[0], probe[0], probe[1], dx)
    two = eval_periodic_plane(coeffs[1], probe[0], probe[1], dx)
    assert np.abs(both[0] - one).max() == 0.0
    assert np.abs(both[1] - two).max() == 0.0


def test_prefilter_phase_is_linear():
    shape = (3, 3, 9, 9)
    a = RNG.standard_normal(shape)
    b = RNG.standard_normal(shape)
    lhs = prefilter_phase(a + 2.0 * b)
    rhs = prefilter_phase(a) + 2.0 * prefilter_phase(b)
    assert np.abs(lhs - rhs).max() < 1e-12 * max(1.0, np.abs(rhs).max())

"""Initial-data constructors used by the CLI config layer and the test suite."""

import numpy as np

from .spectral import PHYSICAL, SPECTRAL, Field, transform


def gaussian_field(grid, width=1.0, amplitude=1.0, center=None, phase_k=None):
    """amplitude * exp(-|x - center|^2 / (2 width^2)), optionally times exp(i k.x)."""
    if width <= 0:
        raise ValueError(f"width must be positive, got {width}")
    if center is None:
        center = (0.0,) * grid.dim
    if len(center) != grid.dim:
        raise ValueError(f"center must have {grid.dim} components, got {len(center)}")
    rsq = np.zeros(grid.shape)
    for ax in range(grid.dim):
        x = grid.broadcast_axis(grid.x_axes[ax] - center[ax], ax)
        rsq = rsq + x**2
    data = amplitude * np.exp(-rsq / (2.0 * width**2))
    data = data.astype(np.complex128)
    if phase_k is not None:
        phase = np.zeros(grid.shape)
        for ax in range(grid.dim):
            phase = phase + phase_k[ax] * grid.broadcast_axis(grid.x_axes[ax], ax)
        data = data * np.exp(1j * phase)
    return Field(grid, data, PHYSICAL)


def bump_field(grid, radius=2.0, amplitude=1.0, center=None, smoothness=8):
    """Compactly supported bump amplitude * (1 - (r/radius)^2)^smoothness inside r < radius.

    The polynomial profile keeps sharp compact support (exact zeros outside the
    ball) while its Fourier tail decays like |k|^(-smoothness - (n+1)/2), fast
    enough for the causality experiments that need the spectral truncation far
    below the light-cone leakage being measured.
    """
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    if smoothness < 1:
        raise ValueError(f"smoothness must be >= 1, got {smoothness}")
    if center is None:
        center = (0.0,) * grid.dim
    rsq = np.zeros(grid.shape)
    for ax in range(grid.dim):
        x = grid.broadcast_axis(grid.x_axes[ax] - center[ax], ax)
        rsq = rsq + x**2
    profile = 1.0 - rsq / radius**2
    np.clip(profile, 0.0, None, out=profile)
    return Field(grid, (amplitude * profile**smoothness).astype(np.complex128), PHYSICAL)


def plane_wave_field(grid, k_index, amplitude=1.0):
    """amplitude * exp(i k.x) for a lattice mode, k = 2 pi k_index / L per axis."""
    if len(k_index) != grid.dim:
        raise ValueError(f"k_index must have {grid.dim} components")
    phase = np.zeros(grid.shape)
    for ax in range(grid.dim):
        k = 2.0 * np.pi * k_index[ax] / grid.extent
        phase = phase + k * grid.broadcast_axis(grid.x_axes[ax], ax)
    return Field(grid, amplitude * np.exp(1j * phase), PHYSICAL)


def spectral_ring_field(grid, k_center, k_width, amplitude=1.0, seed=None):
    """Field concentrated on the shell |k| ~ k_center in frequency.

    A Gaussian radial envelope exp(-(|k| - k_center)^2 / (2 k_width^2)) with
    either deterministic constant phases (seed None) or reproducible random
    phases.  Used as high-frequency datum in dispersive benchmarks; the result
    is normalized to unit L^2 before scaling by amplitude.
    """
    if k_center <= 0 or k_width <= 0:
        raise ValueError("k_center and k_width must be positive")
    envelope = np.exp(-((grid.kmag - k_center) ** 2) / (2.0 * k_width**2))
    if seed is None:
        coeff = envelope.astype(np.complex128)
    else:
        rng = np.random.default_rng(seed)
        coeff = envelope * np.exp(2j * np.pi * rng.random(grid.shape))
    f = Field(grid, coeff, SPECTRAL)
    norm = np.linalg.norm(f.data.ravel())
    if norm == 0:
        raise ValueError("spectral ring is empty on this grid (k_center beyond kmax?)")
    f.data *= amplitude / norm
    return transform(f, PHYSICAL)


def zero_field(grid):
    return Field(grid, np.zeros(grid.shape, dtype=np.complex128), PHYSICAL)

import numpy as np
import pytest

from ebpe import make_grid


@pytest.fixture
def grid8():
    return make_grid(8, 8, 8)


@pytest.fixture
def grid_small():
    return make_grid(8, 8, 4)


@pytest.fixture
def rng():
    return np.random.default_rng(20240819)


def smooth_field_2d(grid, rng, decay=2.0):
    """Random real field with decaying spectrum, dealias-confined."""
    c = rng.standard_normal((grid.nx, grid.ny)) + 1j * rng.standard_normal((grid.nx, grid.ny))
    k2 = (grid.kx.astype(float) ** 2)[:, None] + (grid.ky.astype(float) ** 2)[None, :]
    c *= (1.0 + k2) ** (-decay / 2.0)
    c = np.where(grid.dealias_mask, c, 0.0)
    return np.fft.ifft2(c).real * (grid.nx * grid.ny)


def smooth_field_3d(grid, rng, decay=2.0, n_profiles=3):
    """Random 3D field: horizontal smooth fields times cos(m pi z) profiles."""
    f = grid.zeros3d()
    for m in range(n_profiles):
        f += smooth_field_2d(grid, rng, decay)[:, :, None] * np.cos(m * np.pi * grid.z)
    return f

"""Discrete periodic cylinder (0,1)^2 x (0,1).

Horizontal directions are Fourier collocation on an Nx x Ny periodic grid;
the vertical is a uniform grid of Nz intervals (Nz+1 levels, z_0 = 0 at the
bottom, z_Nz = 1 at the surface).  Fields are real arrays of shape
(Nx, Ny) or (Nx, Ny, Nz+1); their spectral form carries complex per-mode
coefficients over the same leading axes.

DFT normalization: the forward transform divides by Nx*Ny, so the k = (0,0)
coefficient of a field is its horizontal mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class GridSizeError(ValueError):
    """Raised for horizontal sizes that are odd or below the minimum."""


class SymmetryError(ValueError):
    """Raised when coefficients handed to to_physical are not conjugate symmetric."""


@dataclass(frozen=True)
class Grid:
    """Transform plans and wavenumber tables for the periodic cylinder.

    Attributes filled at construction:

    kx, ky : integer mode numbers along each horizontal axis (FFT order).
    xi_x, xi_y : angular wavenumbers 2*pi*k, broadcastable to (Nx, Ny);
        the Nyquist entry is zeroed so first derivatives of real fields
        stay real.
    xi2 : |xi|^2 table of shape (Nx, Ny), Nyquist included (safe for
        Laplacian-type symbols).
    dealias_mask : boolean (Nx, Ny) table implementing the 2/3 rule,
        True on retained modes.
    x, y : collocation coordinates, shape (Nx, Ny).
    z : vertical levels, shape (Nz+1,). dz = 1/Nz.
    """

    nx: int
    ny: int
    nz: int

    def __post_init__(self) -> None:
        for name, n in (("Nx", self.nx), ("Ny", self.ny)):
            if n < 4 or n % 2 != 0:
                raise GridSizeError(f"{name} must be even and >= 4, got {n}")
        if self.nz < 4:
            raise GridSizeError(f"Nz must be >= 4, got {self.nz}")

        kx = np.fft.fftfreq(self.nx, 1.0 / self.nx).astype(np.int64)
        ky = np.fft.fftfreq(self.ny, 1.0 / self.ny).astype(np.int64)
        object.__setattr__(self, "kx", kx)
        object.__setattr__(self, "ky", ky)

        two_pi = 2.0 * np.pi
        xi_x = two_pi * kx.astype(np.float64)
        xi_y = two_pi * ky.astype(np.float64)
        # Nyquist has no conjugate partner; its odd-order derivative of a real
        # field would be imaginary, so the derivative tables zero it.
        dx = xi_x.copy()
        dy = xi_y.copy()
        dx[self.nx // 2] = 0.0
        dy[self.ny // 2] = 0.0
        object.__setattr__(self, "xi_x", dx[:, None])
        object.__setattr__(self, "xi_y", dy[None, :])
        object.__setattr__(self, "xi2", (xi_x**2)[:, None] + (xi_y**2)[None, :])
        # symbol of the discrete div(grad .) pair; differs from xi2 only on
        # Nyquist lines, where first derivatives are defined as zero
        object.__setattr__(self, "xi2_deriv", (dx**2)[:, None] + (dy**2)[None, :])

        keep_x = np.abs(kx) <= self.nx // 3
        keep_y = np.abs(ky) <= self.ny // 3
        object.__setattr__(self, "dealias_mask", keep_x[:, None] & keep_y[None, :])

        xs = np.arange(self.nx) / self.nx
        ys = np.arange(self.ny) / self.ny
        x, y = np.meshgrid(xs, ys, indexing="ij")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", np.arange(self.nz + 1) / self.nz)
        object.__setattr__(self, "dz", 1.0 / self.nz)

    @property
    def nlev(self) -> int:
        """Number of vertical levels (Nz + 1)."""
        return self.nz + 1

    def zeros2d(self) -> np.ndarray:
        return np.zeros((self.nx, self.ny))

    def zeros3d(self) -> np.ndarray:
        return np.zeros((self.nx, self.ny, self.nlev))

    def zeros_velocity(self) -> np.ndarray:
        return np.zeros((2, self.nx, self.ny, self.nlev))


def make_grid(nx: int, ny: int, nz: int) -> Grid:
    """Build a grid; rejects odd or too-small sizes with GridSizeError."""
    return Grid(nx, ny, nz)


def _check_shape(grid: Grid, f: np.ndarray) -> None:
    if f.shape[:2] != (grid.nx, grid.ny):
        raise ValueError(
            f"field shape {f.shape} does not match grid ({grid.nx}, {grid.ny})"
        )
    if f.ndim == 3 and f.shape[2] != grid.nlev:
        raise ValueError(
            f"3D field has {f.shape[2]} levels, grid has {grid.nlev}"
        )
    if f.ndim not in (2, 3):
        raise ValueError(f"expected a 2D or 3D field, got ndim={f.ndim}")


def to_spectral(grid: Grid, field: np.ndarray) -> np.ndarray:
    """Horizontal DFT of a real field; vertical axis (if any) untouched."""
    _check_shape(grid, field)
    return np.fft.fft2(field, axes=(0, 1), norm="forward")


def to_physical(grid: Grid, coeffs: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Inverse horizontal DFT; requires conjugate-symmetric coefficients."""
    _check_shape(grid, coeffs)
    f = np.fft.ifft2(coeffs, axes=(0, 1), norm="forward")
    scale = np.max(np.abs(f.real))
    imag = np.max(np.abs(f.imag))
    if imag > tol * (1.0 + scale):
        raise SymmetryError(
            f"coefficients are not conjugate symmetric (imag residual {imag:.3e})"
        )
    return np.ascontiguousarray(f.real)


def dealias(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    """Zero all modes outside the 2/3 rule; retained modes are untouched."""
    mask = grid.dealias_mask
    if coeffs.ndim == 3:
        mask = mask[:, :, None]
    return np.where(mask, coeffs, 0.0)


def deriv_x(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    """d/dx in spectral space (Nyquist zeroed)."""
    xi = grid.xi_x if coeffs.ndim == 2 else grid.xi_x[:, :, None]
    return 1j * xi * coeffs


def deriv_y(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    """d/dy in spectral space (Nyquist zeroed)."""
    xi = grid.xi_y if coeffs.ndim == 2 else grid.xi_y[:, :, None]
    return 1j * xi * coeffs


def grad_h(grid: Grid, field: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Horizontal gradient of a physical field, computed spectrally."""
    c = to_spectral(grid, field)
    return to_physical(grid, deriv_x(grid, c)), to_physical(grid, deriv_y(grid, c))


def div_h(grid: Grid, v: np.ndarray) -> np.ndarray:
    """Horizontal divergence of a velocity array shaped (2, Nx, Ny[, Nz+1])."""
    cx = to_spectral(grid, v[0])
    cy = to_spectral(grid, v[1])
    return to_physical(grid, deriv_x(grid, cx) + deriv_y(grid, cy))


def deriv_z(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Vertical derivative of a 3D field: centered interior, one-sided ends."""
    h = grid.dz
    out = np.empty_like(f)
    out[..., 1:-1] = (f[..., 2:] - f[..., :-2]) / (2.0 * h)
    out[..., 0] = (-3.0 * f[..., 0] + 4.0 * f[..., 1] - f[..., 2]) / (2.0 * h)
    out[..., -1] = (3.0 * f[..., -1] - 4.0 * f[..., -2] + f[..., -3]) / (2.0 * h)
    return out

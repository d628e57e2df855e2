"""Hydrostatic reconstructions and the solenoidal constraint.

Vertical quadrature is the trapezoid rule throughout, matching the
second-order vertical finite differences; exact on z-affine integrands.
The surface pressure is never prognostic: each step removes the gradient
part of the vertically averaged velocity (pressure projection) and the
removed gradient identifies the surface-pressure contribution.
"""

from __future__ import annotations

import numpy as np

from .grid import Grid, deriv_x, deriv_y, to_physical, to_spectral


def trapz_weights(grid: Grid) -> np.ndarray:
    """Quadrature weights over z in [0,1]; shape (Nz+1,)."""
    w = np.full(grid.nlev, grid.dz)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def vertical_average(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Trapezoidal average of a 3D field over the unit vertical extent."""
    return f @ trapz_weights(grid)


def cumulative_integral(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Running trapezoid integral from z=0; output level j holds int_0^{z_j} f."""
    out = np.zeros_like(f)
    increments = 0.5 * grid.dz * (f[..., 1:] + f[..., :-1])
    np.cumsum(increments, axis=-1, out=out[..., 1:])
    return out


def diagnose_w(grid: Grid, v: np.ndarray) -> np.ndarray:
    """Vertical velocity from incompressibility: w = -int_0^z div_H v."""
    cx = to_spectral(grid, v[0])
    cy = to_spectral(grid, v[1])
    div = to_physical(grid, deriv_x(grid, cx) + deriv_y(grid, cy))
    return -cumulative_integral(grid, div)


def pressure_field(grid: Grid, T: np.ndarray, p_s: np.ndarray) -> np.ndarray:
    """Hydrostatic pressure p(z) = p_s - int_0^z T; p(0) = p_s exactly."""
    return p_s[..., None] - cumulative_integral(grid, T)


def baroclinic_grad(grid: Grid, T: np.ndarray) -> np.ndarray:
    """grad_H of the running temperature integral; zero at z=0 by construction."""
    c = to_spectral(grid, cumulative_integral(grid, T))
    out = np.empty((2, grid.nx, grid.ny, grid.nlev))
    out[0] = to_physical(grid, deriv_x(grid, c))
    out[1] = to_physical(grid, deriv_y(grid, c))
    return out


def project_barotropic(grid: Grid, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Remove the gradient part of the vertical average of v.

    Solves lap_H phi = div_H vbar per mode and subtracts grad_H phi from
    every level, so div_H of the average of the result vanishes (to
    roundoff).  Returns (projected v, removed gradient) where the removed
    gradient is a (2, Nx, Ny) pair identified with the surface-pressure
    gradient contribution accumulated over one step.
    """
    vbar_x = to_spectral(grid, vertical_average(grid, v[0]))
    vbar_y = to_spectral(grid, vertical_average(grid, v[1]))
    div_hat = deriv_x(grid, vbar_x) + deriv_y(grid, vbar_y)
    # invert the same discrete div(grad .) symbol that the residual sees,
    # so the projected average is solenoidal to roundoff on every mode
    with np.errstate(divide="ignore", invalid="ignore"):
        phi_hat = np.where(grid.xi2_deriv > 0.0, div_hat / (-grid.xi2_deriv), 0.0)
    gx_hat = deriv_x(grid, phi_hat)
    gy_hat = deriv_y(grid, phi_hat)
    grad = np.empty((2, grid.nx, grid.ny))
    grad[0] = to_physical(grid, gx_hat)
    grad[1] = to_physical(grid, gy_hat)
    return v - grad[:, :, :, None], grad


def potential_from_gradient(grid: Grid, grad: np.ndarray) -> np.ndarray:
    """Mean-zero potential phi with grad_H phi equal to the given pair."""
    gx_hat = to_spectral(grid, grad[0])
    gy_hat = to_spectral(grid, grad[1])
    num = -1j * (grid.xi_x * gx_hat + grid.xi_y * gy_hat)
    with np.errstate(divide="ignore", invalid="ignore"):
        phi_hat = np.where(grid.xi2_deriv > 0.0, num / grid.xi2_deriv, 0.0)
    return to_physical(grid, phi_hat)

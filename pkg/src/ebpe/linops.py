"""Per-mode vertical operators for the coupled temperature system.

For each horizontal mode xi the temperature and its surface trace form one
stacked unknown (T(z_0), ..., T(z_{Nz-1}), rho) with the identification
T(z_Nz) = rho, so the trace condition is exact by construction.  Rows:

* bottom: vertical Laplacian with the no-flux condition folded in by
  ghost elimination (second order),
* interior: centered second differences minus |xi|^2,
* top: the surface equation -|xi|^2 rho - dT/dz|_top, the flux taken with
  a one-sided stencil.

The boundary-flux stencil uses five points (fourth order).  The nominally
sufficient three-point stencil carries an O(h^2) constant ~ 0.35 |xi|^3
that dominates the discrete Dirichlet-to-Neumann symbol; the wider stencil
leaves the symbol error at the level of the interior dispersion,
|xi|^3 h^2 / 24, while the scheme stays globally second order.

A companion Neumann-Neumann operator serves the velocity solves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .grid import Grid, to_physical, to_spectral

# one-sided d/dz at the top boundary, taken downward; divide by dz at use
TOP_FLUX_STENCIL = np.array([25.0, -48.0, 36.0, -16.0, 3.0]) / 12.0


class SolveError(RuntimeError):
    """Raised when an implicit vertical solve is singular."""


@dataclass(frozen=True)
class ModeOperator:
    """Dense generator matrix for a single horizontal mode."""

    xi: tuple[float, float]
    matrix: np.ndarray


@dataclass(frozen=True)
class SectorReport:
    """Eigenvalues of (omega*I - generator) per retained mode.

    phi_hat is the largest |arg| over all reported eigenvalues; the
    discretization is considered sectorial when phi_hat < pi/2 and no
    eigenvalue has a real part below -tol.
    """

    omega: float
    modes: list[tuple[int, int]]
    eigenvalues: list[np.ndarray]
    phi_hat: float

    def min_real_part(self) -> float:
        return min(ev.real.min() for ev in self.eigenvalues)

    def rows(self):
        """Flat (k1, k2, Re, Im) tuples for CSV emission."""
        for (k1, k2), ev in zip(self.modes, self.eigenvalues):
            for lam in ev:
                yield k1, k2, lam.real, lam.imag


def coupled_vertical_matrix(grid: Grid) -> np.ndarray:
    """xi-independent part of the coupled generator, shape (Nz+1, Nz+1)."""
    nz, h = grid.nz, grid.dz
    n = nz + 1
    L = np.zeros((n, n))
    L[0, 0] = -2.0 / h**2
    L[0, 1] = 2.0 / h**2
    for j in range(1, nz):
        L[j, j - 1] = 1.0 / h**2
        L[j, j] = -2.0 / h**2
        L[j, j + 1] = 1.0 / h**2
    for i, c in enumerate(TOP_FLUX_STENCIL):
        L[nz, nz - i] -= c / h
    return L


def neumann_vertical_matrix(grid: Grid) -> np.ndarray:
    """Vertical Laplacian with no-flux rows at both ends (velocity solves)."""
    nz, h = grid.nz, grid.dz
    n = nz + 1
    L = np.zeros((n, n))
    L[0, 0] = -2.0 / h**2
    L[0, 1] = 2.0 / h**2
    for j in range(1, nz):
        L[j, j - 1] = 1.0 / h**2
        L[j, j] = -2.0 / h**2
        L[j, j + 1] = 1.0 / h**2
    L[nz, nz] = -2.0 / h**2
    L[nz, nz - 1] = 2.0 / h**2
    return L


def assemble_mode_operator(xi: tuple[float, float], grid: Grid) -> ModeOperator:
    """Coupled generator at one mode: vertical part minus |xi|^2 * I."""
    xi2 = xi[0] ** 2 + xi[1] ** 2
    M = coupled_vertical_matrix(grid) - xi2 * np.eye(grid.nlev)
    return ModeOperator(xi=(float(xi[0]), float(xi[1])), matrix=M)


def _batched_generators(grid: Grid, base: np.ndarray) -> np.ndarray:
    """Generator matrices for every grid mode, shape (Nx, Ny, n, n)."""
    n = base.shape[0]
    eye = np.eye(n)
    return base[None, None] - grid.xi2[:, :, None, None] * eye[None, None]


def _batched_inverse(mats: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.inv(mats)
    except np.linalg.LinAlgError as exc:  # not expected for dt > 0
        raise SolveError(f"implicit vertical solve is singular: {exc}") from exc


class CoupledImplicitSolver:
    """Cached per-mode factorization of (I - dt * generator)."""

    def __init__(self, grid: Grid, dt: float):
        if dt <= 0.0:
            raise ValueError(f"dt must be positive, got {dt}")
        self.grid = grid
        self.dt = dt
        self.generators = _batched_generators(grid, coupled_vertical_matrix(grid))
        eye = np.eye(grid.nlev)
        self.inverse = _batched_inverse(eye[None, None] - dt * self.generators)

    def solve_hat(self, stack_hat: np.ndarray) -> np.ndarray:
        """Apply the inverse to a spectral stack shaped (Nx, Ny, Nz+1)."""
        return np.einsum("xyij,xyj->xyi", self.inverse, stack_hat)

    def apply_generator_hat(self, stack_hat: np.ndarray) -> np.ndarray:
        return np.einsum("xyij,xyj->xyi", self.generators, stack_hat)


class VelocityImplicitSolver:
    """Cached per-mode factorization of (I - dt * (d^2_z - |xi|^2)), Neumann ends."""

    def __init__(self, grid: Grid, dt: float):
        if dt <= 0.0:
            raise ValueError(f"dt must be positive, got {dt}")
        self.grid = grid
        self.dt = dt
        self.generators = _batched_generators(grid, neumann_vertical_matrix(grid))
        eye = np.eye(grid.nlev)
        self.inverse = _batched_inverse(eye[None, None] - dt * self.generators)

    def solve_hat(self, v_hat: np.ndarray) -> np.ndarray:
        """Apply to one velocity component in spectral form, (Nx, Ny, Nz+1)."""
        return np.einsum("xyij,xyj->xyi", self.inverse, v_hat)

    def apply_generator_hat(self, v_hat: np.ndarray) -> np.ndarray:
        return np.einsum("xyij,xyj->xyi", self.generators, v_hat)


def stack_fields_hat(grid: Grid, T_hat: np.ndarray, rho_hat: np.ndarray) -> np.ndarray:
    """Stack spectral (T, rho) into the shared-unknown layout.

    The top temperature level of T_hat is dropped: the surface unknown is
    rho_hat, which doubles as T at z = 1.
    """
    stack = np.empty((grid.nx, grid.ny, grid.nlev), dtype=complex)
    stack[..., : grid.nz] = T_hat[..., : grid.nz]
    stack[..., grid.nz] = rho_hat
    return stack


def unstack_fields_hat(grid: Grid, stack: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of stack_fields_hat; the returned T carries rho at its top level."""
    T_hat = np.empty((grid.nx, grid.ny, grid.nlev), dtype=complex)
    T_hat[..., : grid.nz] = stack[..., : grid.nz]
    T_hat[..., grid.nz] = stack[..., grid.nz]
    return T_hat, stack[..., grid.nz].copy()


def solve_coupled_implicit(
    grid: Grid,
    rhs_T: np.ndarray,
    rhs_rho: np.ndarray,
    dt: float,
    solver: CoupledImplicitSolver | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Solve (I - dt*A)(T, rho) = (rhs_T, rhs_rho) in physical space.

    The top level of rhs_T is ignored (the surface row is driven by
    rhs_rho); the output satisfies T(., 1) = rho identically and the
    discrete bottom no-flux condition.
    """
    if solver is None:
        solver = CoupledImplicitSolver(grid, dt)
    stack = stack_fields_hat(grid, to_spectral(grid, rhs_T), to_spectral(grid, rhs_rho))
    T_hat, rho_hat = unstack_fields_hat(grid, solver.solve_hat(stack))
    T = to_physical(grid, T_hat)
    rho = T[..., -1].copy()
    return T, rho


def solve_velocity_implicit(
    grid: Grid,
    rhs_v: np.ndarray,
    dt: float,
    solver: VelocityImplicitSolver | None = None,
) -> np.ndarray:
    """Per-component solve of (I - dt*(d^2_z - |xi|^2)) v = rhs with no-flux ends."""
    if solver is None:
        solver = VelocityImplicitSolver(grid, dt)
    out = np.empty_like(rhs_v)
    for comp in range(rhs_v.shape[0]):
        v_hat = solver.solve_hat(to_spectral(grid, rhs_v[comp]))
        out[comp] = to_physical(grid, v_hat)
    return out


def _dirichlet_inverse_column(grid: Grid) -> np.ndarray:
    """Per-mode solution column of the harmonic-extension problem.

    Solves (interior rows of the mode operator, top row = Dirichlet data 1)
    for all modes at once; returns theta over levels, shape (Nx, Ny, Nz+1),
    real.  The extension for mode xi of unit boundary data approximates
    cosh(|xi| z) / cosh(|xi|).
    """
    n = grid.nlev
    base = coupled_vertical_matrix(grid)
    mats = _batched_generators(grid, base)
    # replace the surface row by the identity on the boundary unknown
    mats[:, :, n - 1, :] = 0.0
    mats[:, :, n - 1, n - 1] = 1.0
    rhs = np.zeros(n)
    rhs[n - 1] = 1.0
    return np.linalg.solve(mats, rhs)


def dirichlet_map(grid: Grid, phi: np.ndarray) -> np.ndarray:
    """Extension of surface data phi: vertical diffusion balance with no
    flux through the bottom and phi on the surface."""
    theta = _dirichlet_inverse_column(grid)
    phi_hat = to_spectral(grid, phi)
    return to_physical(grid, theta * phi_hat[:, :, None])


def dtn_symbols(grid: Grid) -> np.ndarray:
    """Discrete Dirichlet-to-Neumann multiplier per mode, shape (Nx, Ny).

    Continuum symbol: |xi| tanh(|xi|); zero at the mean mode.
    """
    theta = _dirichlet_inverse_column(grid)
    nz, h = grid.nz, grid.dz
    sym = np.zeros((grid.nx, grid.ny))
    for i, c in enumerate(TOP_FLUX_STENCIL):
        sym += c * theta[:, :, nz - i]
    return sym / h


def dtn_apply(grid: Grid, phi: np.ndarray) -> np.ndarray:
    """Normal derivative at the surface of the Dirichlet extension of phi."""
    phi_hat = to_spectral(grid, phi)
    return to_physical(grid, dtn_symbols(grid) * phi_hat)


def similarity_split(
    grid: Grid, T: np.ndarray, rho: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Subtract the Dirichlet extension of rho from T.

    When T carries rho as its surface trace, the first output has zero
    trace, which diagonalizes the coupled domain.
    """
    return T - dirichlet_map(grid, rho), rho


def similarity_unsplit(
    grid: Grid, T_shifted: np.ndarray, rho: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of similarity_split."""
    return T_shifted + dirichlet_map(grid, rho), rho


def retained_modes(grid: Grid) -> list[tuple[int, int]]:
    """Dealias-retained (k1, k2) pairs ordered by |xi|^2 then index."""
    pairs = []
    for i in range(grid.nx):
        for j in range(grid.ny):
            if grid.dealias_mask[i, j]:
                k1, k2 = int(grid.kx[i]), int(grid.ky[j])
                pairs.append((k1 * k1 + k2 * k2, k1, k2))
    pairs.sort()
    return [(k1, k2) for _, k1, k2 in pairs]


def spectrum_report(
    grid: Grid, omega: float = 1.0, max_modes: int | None = None
) -> SectorReport:
    """Eigenvalues of omega*I - A per retained mode, with the empirical angle.

    omega > 0 shifts the kernel (constants at xi = 0) away from the origin
    so the angle is well defined.
    """
    if omega <= 0.0:
        raise ValueError(f"omega must be positive, got {omega}")
    modes = retained_modes(grid)
    if max_modes is not None:
        modes = modes[:max_modes]
    eye = np.eye(grid.nlev)
    eigenvalues = []
    phi_hat = 0.0
    for k1, k2 in modes:
        xi = (2.0 * np.pi * k1, 2.0 * np.pi * k2)
        op = assemble_mode_operator(xi, grid)
        try:
            ev = scipy.linalg.eigvals(omega * eye - op.matrix)
        except Exception as exc:
            raise SolveError(f"eigensolver failed at mode {(k1, k2)}: {exc}") from exc
        eigenvalues.append(ev)
        phi_hat = max(phi_hat, float(np.max(np.abs(np.angle(ev)))))
    return SectorReport(omega=omega, modes=modes, eigenvalues=eigenvalues, phi_hat=phi_hat)

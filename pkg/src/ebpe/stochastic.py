"""Boundary noise: spectral Wiener increments, the exponential propagator
for the linearized coupled system, the split driver (exact linear noise
convolution plus a deterministic remainder), and a direct semi-implicit
Euler-Maruyama driver used as the brute-force cross-check.

The cylindrical noise basis is the Fourier basis of the horizontal grid;
per-mode amplitudes q_k = sigma * (1 + |xi_k|^2)^(-decay/2) act on the
surface-temperature row only.  The decay exponent must be at least 2 so
the noise carries one horizontal derivative uniformly in resolution.

Every run is a pure function of (config, seed): increments for all steps
are drawn up front in one reproducible bundle, and the same bundle can be
coarsened (summing consecutive increments) so runs at different step
sizes share one Brownian path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import hydrostatic, linops, monitors
from .config import RunConfig
from .ebm import PhysParams, VERTICAL_AVERAGE
from .grid import Grid, to_physical, to_spectral
from .timestep import (
    State,
    Stepper,
    _check_finite,
    grid_from_config,
    initial_state_from_config,
    params_from_config,
)


@dataclass(frozen=True)
class NoiseSpec:
    """Amplitude, spectral decay and seed of the boundary noise."""

    sigma: float = 0.1
    decay: float = 2.0
    seed: int = 0
    # optional hook: per-step amplitude tables, callable step_index -> (Nx, Ny)
    q_of_step: object = None

    def __post_init__(self) -> None:
        if self.sigma < 0.0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.decay < 2.0:
            raise ValueError(
                f"decay exponent must be >= 2 for boundary-noise regularity, "
                f"got {self.decay}"
            )

    def q_table(self, grid: Grid, step: int = 0) -> np.ndarray:
        if self.q_of_step is not None:
            return np.asarray(self.q_of_step(step), dtype=float)
        return self.sigma * (1.0 + grid.xi2) ** (-self.decay / 2.0)


def noise_spec_from_config(cfg: RunConfig) -> NoiseSpec:
    return NoiseSpec(sigma=cfg.noise_sigma, decay=cfg.noise_decay, seed=cfg.noise_seed)


@dataclass(frozen=True)
class PathBundle:
    """Per-step complex spectral Wiener increments with conjugate symmetry.

    Paired modes carry independent real and imaginary parts of variance
    dt/2 each; self-conjugate modes (mean and Nyquist lines) are real with
    variance dt.  The bundle is a pure function of the seed.
    """

    increments: np.ndarray  # (n_steps, Nx, Ny) complex
    dt: float
    seed: int

    @property
    def n_steps(self) -> int:
        return self.increments.shape[0]

    def coarsen(self, factor: int) -> "PathBundle":
        """Sum consecutive increments: the same path at step size dt*factor."""
        if self.n_steps % factor != 0:
            raise ValueError(
                f"cannot coarsen {self.n_steps} steps by a factor of {factor}"
            )
        n = self.n_steps // factor
        grouped = self.increments.reshape(n, factor, *self.increments.shape[1:])
        return PathBundle(
            increments=grouped.sum(axis=1), dt=self.dt * factor, seed=self.seed
        )


def wiener_increments(grid: Grid, spec: NoiseSpec, dt: float, n_steps: int) -> PathBundle:
    """Reproducible increment bundle for n_steps of size dt.

    Drawn as the DFT of white noise on the collocation grid, scaled so the
    per-mode variances match the cylindrical-process convention; this is
    conjugate symmetric by construction and the per-step physical field
    of one increment slice is real.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    rng = np.random.default_rng(spec.seed)
    white = rng.standard_normal((n_steps, grid.nx, grid.ny)) * np.sqrt(dt)
    hat = np.fft.fft2(white, axes=(1, 2), norm="forward")
    hat *= np.sqrt(grid.nx * grid.ny)
    return PathBundle(increments=hat, dt=dt, seed=spec.seed)


class ConvolutionPropagator:
    """Exact per-mode step map of the linearized boundary-noise system.

    Caches E = exp(dt*M) and the first phi-function column
    phi1(dt*M) e_rho per mode (computed through the augmented-matrix
    exponential, which is well defined also on the kernel mode), so one
    step of the noise convolution is

        Z <- E Z + phi1(dt*M) e_rho * (q_k dW_k).
    """

    def __init__(self, grid: Grid, dt: float):
        if dt <= 0.0:
            raise ValueError(f"dt must be positive, got {dt}")
        self.grid = grid
        self.dt = dt
        n = grid.nlev
        base = linops.coupled_vertical_matrix(grid)
        eye = np.eye(n)
        self.E = np.empty((grid.nx, grid.ny, n, n))
        self.phi1_col = np.empty((grid.nx, grid.ny, n))
        cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}
        for i in range(grid.nx):
            for j in range(grid.ny):
                xi2 = float(grid.xi2[i, j])
                hit = cache.get(xi2)
                if hit is None:
                    aug = np.zeros((n + 1, n + 1))
                    aug[:n, :n] = dt * (base - xi2 * eye)
                    aug[n - 1, n] = 1.0  # inject on the rho row
                    ex = scipy.linalg.expm(aug)
                    hit = (ex[:n, :n], ex[:n, n])
                    cache[xi2] = hit
                self.E[i, j] = hit[0]
                self.phi1_col[i, j] = hit[1]

    def step_hat(self, Z_hat: np.ndarray, dW: np.ndarray, q: np.ndarray) -> np.ndarray:
        propagated = np.einsum("xyij,xyj->xyi", self.E, Z_hat)
        return propagated + self.phi1_col * (q * dW)[:, :, None]


def stoch_convolution_step(
    grid: Grid,
    Z_hat: np.ndarray,
    dt: float,
    dW: np.ndarray,
    spec: NoiseSpec,
    propagator: ConvolutionPropagator | None = None,
    step: int = 0,
) -> np.ndarray:
    """One exponential-Euler update of the stacked noise convolution."""
    if propagator is None:
        propagator = ConvolutionPropagator(grid, dt)
    return propagator.step_hat(Z_hat, dW, spec.q_table(grid, step))


@dataclass
class StochasticRunResult:
    final_state: State            # reassembled fields
    remainder_final: State | None  # split driver only
    z_rho_final: np.ndarray | None
    ledger: monitors.Ledger
    csv_records: list[tuple[int, monitors.LedgerRecord, int]]
    bundle: PathBundle


def _require_average_transport(params: PhysParams) -> None:
    if params.transport_variant != VERTICAL_AVERAGE:
        raise ValueError(
            "stochastic drivers require transport_variant=vertical_average"
        )


def run_split_stochastic(
    cfg: RunConfig,
    spec: NoiseSpec | None = None,
    bundle: PathBundle | None = None,
    initial: State | None = None,
) -> StochasticRunResult:
    """Split driver: exact noise convolution plus a deterministic remainder.

    The convolution stack evolves by its exact per-mode exponential map;
    the remainder advances by the deterministic IMEX step with every
    nonlinearity evaluated at the reassembled fields (temperature
    including the interior part of the convolution, surface temperature
    including its boundary part), so the scheme and the direct
    Euler-Maruyama driver discretize the same system.  With sigma = 0 the
    convolution vanishes and the run reproduces the deterministic driver.
    """
    grid = grid_from_config(cfg)
    params = params_from_config(grid, cfg)
    _require_average_transport(params)
    if spec is None:
        spec = noise_spec_from_config(cfg)
    n_steps = cfg.n_steps()
    if bundle is None:
        bundle = wiener_increments(grid, spec, cfg.dt, n_steps)
    if bundle.n_steps < n_steps or abs(bundle.dt - cfg.dt) > 1e-15 * max(1.0, cfg.dt):
        raise ValueError("path bundle does not match the run (steps or dt)")

    stepper = Stepper(grid, params, cfg.dt, scheme="imex_euler",
                      freeze_velocity=cfg.freeze_velocity)
    remainder = initial_state_from_config(grid, cfg) if initial is None else initial.copy()
    propagator = ConvolutionPropagator(grid, cfg.dt)
    q = spec.q_table(grid)
    Z_hat = np.zeros((grid.nx, grid.ny, grid.nlev), dtype=complex)

    ledger = monitors.Ledger()
    csv_records: list[tuple[int, monitors.LedgerRecord, int]] = []

    def reassemble(rem: State, Z_hat: np.ndarray) -> State:
        Z_T = to_physical(grid, Z_hat)
        T_full = rem.T + Z_T
        return State(v=rem.v, T=T_full, rho=T_full[..., -1].copy(),
                     t=rem.t, step=rem.step, p_s=rem.p_s)

    full = reassemble(remainder, Z_hat)
    record = monitors.measure(grid, full)
    ledger.append(record)
    csv_records.append((0, record, 0))

    for n in range(n_steps):
        full = reassemble(remainder, Z_hat)
        F_v, F_T, F_rho = stepper.tendencies(full)

        if cfg.freeze_velocity:
            v_new, p_s = remainder.v, remainder.p_s
        else:
            rhs_v = remainder.v + cfg.dt * F_v
            v_star = linops.solve_velocity_implicit(grid, rhs_v, cfg.dt, stepper.velocity)
            v_new, grad = hydrostatic.project_barotropic(grid, v_star)
            p_s = hydrostatic.potential_from_gradient(grid, grad) / cfg.dt

        T_new, rho_new = linops.solve_coupled_implicit(
            grid,
            remainder.T + cfg.dt * F_T,
            remainder.rho + cfg.dt * F_rho,
            cfg.dt,
            stepper.coupled,
        )
        previous = remainder
        remainder = State(v=v_new, T=T_new, rho=rho_new,
                          t=previous.t + cfg.dt, step=previous.step + 1, p_s=p_s)
        if spec.q_of_step is not None:
            q = spec.q_table(grid, n)
        Z_hat = propagator.step_hat(Z_hat, bundle.increments[n], q)

        _check_finite(remainder, previous)
        full = reassemble(remainder, Z_hat)
        _check_finite(full, previous)
        record = monitors.measure(grid, full)
        ledger.append(record)
        if remainder.step % cfg.cadence == 0:
            csv_records.append((remainder.step, record, 0))

    full = reassemble(remainder, Z_hat)
    z_rho = to_physical(grid, Z_hat[..., -1])
    return StochasticRunResult(
        final_state=full, remainder_final=remainder, z_rho_final=z_rho,
        ledger=ledger, csv_records=csv_records, bundle=bundle,
    )


def run_direct_em(
    cfg: RunConfig,
    spec: NoiseSpec | None = None,
    bundle: PathBundle | None = None,
    initial: State | None = None,
) -> StochasticRunResult:
    """Semi-implicit Euler-Maruyama on the unsplit system.

    Explicit nonlinearities, implicit coupled solve, the noise increment
    added to the surface row after the solve.  Serves as the brute-force
    oracle for the split driver on a shared path.
    """
    grid = grid_from_config(cfg)
    params = params_from_config(grid, cfg)
    _require_average_transport(params)
    if spec is None:
        spec = noise_spec_from_config(cfg)
    n_steps = cfg.n_steps()
    if bundle is None:
        bundle = wiener_increments(grid, spec, cfg.dt, n_steps)
    if bundle.n_steps < n_steps or abs(bundle.dt - cfg.dt) > 1e-15 * max(1.0, cfg.dt):
        raise ValueError("path bundle does not match the run (steps or dt)")

    stepper = Stepper(grid, params, cfg.dt, scheme="imex_euler",
                      freeze_velocity=cfg.freeze_velocity)
    state = initial_state_from_config(grid, cfg) if initial is None else initial.copy()
    q = spec.q_table(grid)

    ledger = monitors.Ledger()
    csv_records: list[tuple[int, monitors.LedgerRecord, int]] = []
    record = monitors.measure(grid, state)
    ledger.append(record)
    csv_records.append((0, record, 0))

    for n in range(n_steps):
        F_v, F_T, F_rho = stepper.tendencies(state)

        if cfg.freeze_velocity:
            v_new, p_s = state.v, state.p_s
        else:
            rhs_v = state.v + cfg.dt * F_v
            v_star = linops.solve_velocity_implicit(grid, rhs_v, cfg.dt, stepper.velocity)
            v_new, grad = hydrostatic.project_barotropic(grid, v_star)
            p_s = hydrostatic.potential_from_gradient(grid, grad) / cfg.dt

        stack = linops.stack_fields_hat(
            grid,
            to_spectral(grid, state.T + cfg.dt * F_T),
            to_spectral(grid, state.rho + cfg.dt * F_rho),
        )
        x_hat = stepper.coupled.solve_hat(stack)
        if spec.q_of_step is not None:
            q = spec.q_table(grid, n)
        x_hat[..., -1] += q * bundle.increments[n]
        T_hat, _ = linops.unstack_fields_hat(grid, x_hat)
        T_new = to_physical(grid, T_hat)
        rho_new = T_new[..., -1].copy()

        previous = state
        state = State(v=v_new, T=T_new, rho=rho_new,
                      t=previous.t + cfg.dt, step=previous.step + 1, p_s=p_s)
        _check_finite(state, previous)
        record = monitors.measure(grid, state)
        ledger.append(record)
        if state.step % cfg.cadence == 0:
            csv_records.append((state.step, record, 0))

    return StochasticRunResult(
        final_state=state, remainder_final=None, z_rho_final=None,
        ledger=ledger, csv_records=csv_records, bundle=bundle,
    )

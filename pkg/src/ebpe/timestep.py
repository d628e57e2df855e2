"""Deterministic time integration of the coupled system.

One step of the contract scheme (first-order IMEX Euler):

1. explicit tendencies (advection, baroclinic forcing, radiation) at t_n,
   every quadratic product dealiased;
2. implicit vertical/horizontal diffusion solves: per-mode Neumann solve
   for the velocity, per-mode coupled solve for (T, rho) so the trace
   condition holds exactly;
3. pressure projection restoring div_H vbar = 0, which also recovers the
   surface pressure.

A Crank-Nicolson / Adams-Bashforth-2 variant sits behind scheme="cnab2";
its first step (and any restart step) falls back to IMEX Euler.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import grid as grid_mod
from . import hydrostatic, linops, monitors
from .config import RunConfig
from .ebm import PhysParams, VERTICAL_AVERAGE, default_insolation, radiation
from .grid import Grid, dealias, deriv_x, deriv_y, deriv_z, to_physical, to_spectral

BLOWUP_SUP = 1e8


class BlowUpError(RuntimeError):
    """Non-finite or runaway state; carries the last valid state."""

    def __init__(self, message: str, last_state: "State"):
        super().__init__(message)
        self.last_state = last_state


@dataclass
class State:
    """Prognostic fields at one time level.

    v has shape (2, Nx, Ny, Nz+1); T has shape (Nx, Ny, Nz+1) and carries
    rho as its surface level; rho has shape (Nx, Ny).  p_s is the
    diagnosed mean-zero surface pressure of the preceding step.
    """

    v: np.ndarray
    T: np.ndarray
    rho: np.ndarray
    t: float = 0.0
    step: int = 0
    p_s: np.ndarray | None = None

    def copy(self) -> "State":
        return State(
            v=self.v.copy(), T=self.T.copy(), rho=self.rho.copy(),
            t=self.t, step=self.step,
            p_s=None if self.p_s is None else self.p_s.copy(),
        )


def grid_from_config(cfg: RunConfig) -> Grid:
    return grid_mod.make_grid(cfg.nx, cfg.ny, cfg.nz)


def params_from_config(grid: Grid, cfg: RunConfig) -> PhysParams:
    return PhysParams(
        beta1=cfg.beta1,
        beta2=cfg.beta2,
        rho_ref=cfg.rho_ref,
        Q=default_insolation(grid, cfg.q0, cfg.q1),
        transport_variant=cfg.transport,
        radiation_on=cfg.radiation_on,
    )


def _smooth_random_2d(grid: Grid, rng: np.random.Generator, decay: float) -> np.ndarray:
    """Real random field with power-law spectral decay, dealias-confined."""
    c = rng.standard_normal((grid.nx, grid.ny)) + 1j * rng.standard_normal((grid.nx, grid.ny))
    k2 = (grid.kx.astype(float) ** 2)[:, None] + (grid.ky.astype(float) ** 2)[None, :]
    c *= (1.0 + k2) ** (-decay / 2.0)
    c = np.where(grid.dealias_mask, c, 0.0)
    return np.fft.ifft2(c).real * (grid.nx * grid.ny)


def initial_state(
    grid: Grid,
    kind: str = "zero",
    amplitude: float = 0.5,
    seed: int = 0,
    decay: float = 3.0,
    value: float = 0.0,
) -> State:
    """Built-in initial conditions.

    random_smooth draws low-mode fields with (1+|k|^2)^(-decay/2) spectra
    and vertical profiles cos(m pi z), m <= 2, so the no-flux and trace
    compatibility conditions hold by construction; the velocity is
    projected.  Fields are rescaled so the sup norms equal `amplitude`.
    """
    v = grid.zeros_velocity()
    T = grid.zeros3d()
    if kind == "zero":
        pass
    elif kind == "uniform":
        T += value
    elif kind == "single_mode":
        T = amplitude * np.cos(2 * np.pi * grid.x)[:, :, None] * np.cos(np.pi * grid.z)
    elif kind == "random_smooth":
        rng = np.random.default_rng(seed)
        profiles = [np.cos(m * np.pi * grid.z) for m in range(3)]
        for p in profiles:
            T += _smooth_random_2d(grid, rng, decay)[:, :, None] * p
        for comp in range(2):
            for p in profiles:
                v[comp] += _smooth_random_2d(grid, rng, decay)[:, :, None] * p
        v, _ = hydrostatic.project_barotropic(grid, v)
        sup_T = np.max(np.abs(T))
        if sup_T > 0 and amplitude > 0:
            T *= amplitude / sup_T
        else:
            T[:] = 0.0
        sup_v = np.max(np.abs(v))
        if sup_v > 0 and amplitude > 0:
            v *= amplitude / sup_v
        else:
            v[:] = 0.0
    else:
        raise ValueError(f"unknown initial-condition kind {kind!r}")
    rho = T[..., -1].copy()
    return State(v=v, T=T, rho=rho, p_s=grid.zeros2d())


def initial_state_from_config(grid: Grid, cfg: RunConfig) -> State:
    return initial_state(
        grid, kind=cfg.ic_kind, amplitude=cfg.ic_amplitude,
        seed=cfg.ic_seed, decay=cfg.ic_decay, value=cfg.ic_value,
    )


def _dealias_product(grid: Grid, f: np.ndarray) -> np.ndarray:
    return to_physical(grid, dealias(grid, to_spectral(grid, f)))


def nonlinear_tendencies(
    grid: Grid, state: State, params: PhysParams
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Explicit tendencies (F_v, F_T, F_rho).

    F_v: advection plus the baroclinic gradient of the running temperature
    integral.  F_T: advection by u = (v, w).  F_rho: boundary transport by
    the surface trace of v (or its vertical average) plus the radiation
    budget.  Advective products are dealiased; the quartic emission term
    is evaluated pointwise without padding.
    """
    v, T, rho = state.v, state.T, state.rho
    w = hydrostatic.diagnose_w(grid, v)

    v_hat0 = to_spectral(grid, v[0])
    v_hat1 = to_spectral(grid, v[1])
    dxv = (to_physical(grid, deriv_x(grid, v_hat0)), to_physical(grid, deriv_x(grid, v_hat1)))
    dyv = (to_physical(grid, deriv_y(grid, v_hat0)), to_physical(grid, deriv_y(grid, v_hat1)))
    dzv = (deriv_z(grid, v[0]), deriv_z(grid, v[1]))

    F_v = hydrostatic.baroclinic_grad(grid, T)
    for comp in range(2):
        adv = v[0] * dxv[comp] + v[1] * dyv[comp] + w * dzv[comp]
        F_v[comp] -= _dealias_product(grid, adv)

    T_hat = to_spectral(grid, T)
    adv_T = (
        v[0] * to_physical(grid, deriv_x(grid, T_hat))
        + v[1] * to_physical(grid, deriv_y(grid, T_hat))
        + w * deriv_z(grid, T)
    )
    F_T = -_dealias_product(grid, adv_T)

    if params.transport_variant == VERTICAL_AVERAGE:
        vs = hydrostatic.vertical_average(grid, v)
    else:
        vs = v[:, :, :, -1]
    rho_hat = to_spectral(grid, rho)
    adv_rho = (
        vs[0] * to_physical(grid, deriv_x(grid, rho_hat))
        + vs[1] * to_physical(grid, deriv_y(grid, rho_hat))
    )
    F_rho = -_dealias_product(grid, adv_rho)
    if params.radiation_on:
        F_rho = F_rho + radiation(rho, params)
    return F_v, F_T, F_rho


def _check_finite(state: State, previous: State) -> None:
    for name, f in (("v", state.v), ("T", state.T), ("rho", state.rho)):
        if not np.all(np.isfinite(f)):
            raise BlowUpError(
                f"non-finite values in {name} at t={state.t:.6g} (step {state.step})",
                last_state=previous,
            )
        sup = np.max(np.abs(f))
        if sup > BLOWUP_SUP:
            raise BlowUpError(
                f"sup|{name}| = {sup:.3e} exceeds the blow-up threshold "
                f"at t={state.t:.6g} (step {state.step})",
                last_state=previous,
            )


class Stepper:
    """Time integrator holding the cached per-mode implicit solvers.

    forcing, when given, is a callable (grid, t) -> (f_v, f_T, f_rho)
    added to the explicit tendencies (manufactured-solution runs).
    freeze_velocity pins v to its initial value (pure-diffusion studies).

    The radiation term is explicit; its emission part is dissipative but
    limits the stable step to roughly dt <= 0.5 / max(1, sup|rho|^3).
    Diffusion is unconditionally stable (implicit).
    """

    def __init__(
        self,
        grid: Grid,
        params: PhysParams,
        dt: float,
        scheme: str = "imex_euler",
        forcing=None,
        freeze_velocity: bool = False,
    ):
        if scheme not in ("imex_euler", "cnab2"):
            raise ValueError(f"unknown scheme {scheme!r}")
        self.grid = grid
        self.params = params
        self.dt = dt
        self.scheme = scheme
        self.forcing = forcing
        self.freeze_velocity = freeze_velocity
        self.coupled = linops.CoupledImplicitSolver(grid, dt)
        self.velocity = linops.VelocityImplicitSolver(grid, dt)
        if scheme == "cnab2":
            self.coupled_half = linops.CoupledImplicitSolver(grid, 0.5 * dt)
            self.velocity_half = linops.VelocityImplicitSolver(grid, 0.5 * dt)
        self._history: tuple[int, tuple] | None = None

    def tendencies(self, state: State):
        F_v, F_T, F_rho = nonlinear_tendencies(self.grid, state, self.params)
        if self.forcing is not None:
            f_v, f_T, f_rho = self.forcing(self.grid, state.t)
            F_v = F_v + f_v
            F_T = F_T + f_T
            F_rho = F_rho + f_rho
        return F_v, F_T, F_rho

    def step(self, state: State) -> State:
        if self.scheme == "cnab2":
            new = self._step_cnab2(state)
        else:
            new = self._step_imex_euler(state)
        _check_finite(new, state)
        return new

    # -- IMEX Euler ----------------------------------------------------

    def _step_imex_euler(self, state: State) -> State:
        grid, dt = self.grid, self.dt
        F_v, F_T, F_rho = self.tendencies(state)

        if self.freeze_velocity:
            v_new, p_s = state.v, state.p_s
        else:
            rhs_v = state.v + dt * F_v
            v_star = linops.solve_velocity_implicit(grid, rhs_v, dt, self.velocity)
            v_new, grad = hydrostatic.project_barotropic(grid, v_star)
            p_s = hydrostatic.potential_from_gradient(grid, grad) / dt

        T_new, rho_new = linops.solve_coupled_implicit(
            grid, state.T + dt * F_T, state.rho + dt * F_rho, dt, self.coupled
        )
        return State(v=v_new, T=T_new, rho=rho_new,
                     t=state.t + dt, step=state.step + 1, p_s=p_s)

    # -- CNAB2 ----------------------------------------------------------

    def _step_cnab2(self, state: State) -> State:
        grid, dt = self.grid, self.dt
        F = self.tendencies(state)
        if self._history is None or self._history[0] != state.step:
            # no usable history (first step or restart): one Euler step
            self._history = (state.step + 1, F)
            return self._step_imex_euler(state)
        F_old = self._history[1]
        self._history = (state.step + 1, F)

        def ab2(cur, old):
            return 1.5 * cur - 0.5 * old

        if self.freeze_velocity:
            v_new, p_s = state.v, state.p_s
        else:
            rhs_v = np.empty_like(state.v)
            for comp in range(2):
                x_hat = to_spectral(grid, state.v[comp])
                half = 0.5 * dt * self.velocity.apply_generator_hat(x_hat)
                rhs_v[comp] = to_physical(grid, x_hat + half)
            rhs_v += dt * ab2(F[0], F_old[0])
            v_star = np.empty_like(rhs_v)
            for comp in range(2):
                v_star[comp] = to_physical(
                    grid, self.velocity_half.solve_hat(to_spectral(grid, rhs_v[comp]))
                )
            v_new, grad = hydrostatic.project_barotropic(grid, v_star)
            p_s = hydrostatic.potential_from_gradient(grid, grad) / dt

        stack = linops.stack_fields_hat(
            grid, to_spectral(grid, state.T), to_spectral(grid, state.rho)
        )
        rhs_stack = stack + 0.5 * dt * self.coupled.apply_generator_hat(stack)
        rhs_stack += dt * linops.stack_fields_hat(
            grid,
            to_spectral(grid, ab2(F[1], F_old[1])),
            to_spectral(grid, ab2(F[2], F_old[2])),
        )
        T_hat, _ = linops.unstack_fields_hat(grid, self.coupled_half.solve_hat(rhs_stack))
        T_new = to_physical(grid, T_hat)
        rho_new = T_new[..., -1].copy()
        return State(v=v_new, T=T_new, rho=rho_new,
                     t=state.t + dt, step=state.step + 1, p_s=p_s)


def imex_step(grid: Grid, state: State, dt: float, params: PhysParams, **kwargs) -> State:
    """One-shot step (builds a fresh Stepper; prefer Stepper for loops)."""
    return Stepper(grid, params, dt, **kwargs).step(state)


@dataclass
class RunResult:
    final_state: State
    ledger: monitors.Ledger
    csv_records: list[tuple[int, monitors.LedgerRecord, int]]
    monitor_failure: str | None = None
    warnings: list[str] = field(default_factory=list)


def run_deterministic(
    cfg: RunConfig,
    initial: State | None = None,
    forcing=None,
) -> RunResult:
    """Integrate to t_end, measuring the ledger every step.

    Diagnostics rows are emitted at the configured cadence (plus one row
    for the initial state of a fresh run).  When monitors are enabled the
    run halts on the first hard monitor failure; the maximum-principle
    monitor is warn-only under vertical-average transport, where its
    constant is not established.
    """
    grid = grid_from_config(cfg)
    params = params_from_config(grid, cfg)
    stepper = Stepper(
        grid, params, cfg.dt, scheme=cfg.scheme,
        forcing=forcing, freeze_velocity=cfg.freeze_velocity,
    )
    state = initial_state_from_config(grid, cfg) if initial is None else initial

    ledger = monitors.Ledger()
    csv_records: list[tuple[int, monitors.LedgerRecord, int]] = []
    warnings: list[str] = []
    record = monitors.measure(grid, state)
    ledger.append(record)
    if state.step == 0:
        csv_records.append((0, record, 0))

    T0_bounds = (record.sup_T, record.sup_rho)
    mp_warn_only = params.transport_variant == VERTICAL_AVERAGE
    prev_energy = record.energy
    monitor_failure = None

    n_steps = max(0, cfg.n_steps() - state.step)
    for _ in range(n_steps):
        state = stepper.step(state)
        record = monitors.measure(grid, state)
        ledger.append(record)
        flags = 0
        if cfg.monitors_on:
            mp = monitors.max_principle_check(state, params, T0_bounds, cfg.dt)
            if not mp.ok:
                flags |= monitors.FLAG_MAX_PRINCIPLE
                msg = (f"maximum principle violated at step {state.step}: "
                       f"sup={mp.value:.6e} > {mp.bound:.6e}+{mp.tolerance:.2e}")
                if mp_warn_only:
                    warnings.append(msg)
                else:
                    monitor_failure = msg
            allowed = prev_energy + cfg.dt * cfg.c_led * (1.0 + prev_energy) + 1e-10
            if record.energy > allowed:
                flags |= monitors.FLAG_ENERGY
                monitor_failure = (
                    f"energy ledger violated at step {state.step}: "
                    f"E={record.energy:.6e} > allowed {allowed:.6e}"
                )
            h1_scale = cfg.h1_margin * max(ledger[0].h1_seminorm_sq, 1e-8)
            h1 = record.h1_seminorm_sq
            if not np.isfinite(h1) or (
                h1 > 0.0 and np.log(h1) > np.log(h1_scale) + cfg.h1_growth_rate * state.t
            ):
                flags |= monitors.FLAG_H1
                monitor_failure = (
                    f"H1 envelope breached at step {state.step}: "
                    f"{record.h1_seminorm_sq:.6e}"
                )
        prev_energy = record.energy
        if state.step % cfg.cadence == 0:
            csv_records.append((state.step, record, flags))
        elif flags:
            csv_records.append((state.step, record, flags))
        if monitor_failure is not None:
            break

    return RunResult(
        final_state=state, ledger=ledger, csv_records=csv_records,
        monitor_failure=monitor_failure, warnings=warnings,
    )

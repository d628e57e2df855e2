"""Runtime verification: norms, constraint residuals, confinement and
energy checks, and manufactured-solution convergence studies.

Monitors never mutate state; every function here reads a post-step
snapshot or an accumulated ledger.  The envelope constants (c_led, the
growth rate of the gradient-norm sentinel) are calibration knobs of the
monitor configuration, not physical constants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import hydrostatic
from .ebm import PhysParams
from .grid import Grid, deriv_x, deriv_y, deriv_z, div_h, to_physical, to_spectral

# monitor flag bits, also used in diagnostics rows
FLAG_MAX_PRINCIPLE = 1
FLAG_ENERGY = 2
FLAG_H1 = 4


def l2sq_volume(grid: Grid, f: np.ndarray) -> float:
    """Squared L2 norm over the unit-volume cylinder (trapezoid in z)."""
    w = hydrostatic.trapz_weights(grid)
    return float(np.sum(f * f @ w) / (grid.nx * grid.ny))


def l2sq_surface(grid: Grid, f: np.ndarray) -> float:
    """Squared L2 norm over the unit-area horizontal section."""
    return float(np.sum(f * f) / (grid.nx * grid.ny))


def _grad_sq_volume(grid: Grid, f: np.ndarray) -> float:
    c = to_spectral(grid, f)
    gx = to_physical(grid, deriv_x(grid, c))
    gy = to_physical(grid, deriv_y(grid, c))
    gz = deriv_z(grid, f)
    return l2sq_volume(grid, gx) + l2sq_volume(grid, gy) + l2sq_volume(grid, gz)


def _grad_h_sq_surface(grid: Grid, f: np.ndarray) -> float:
    c = to_spectral(grid, f)
    gx = to_physical(grid, deriv_x(grid, c))
    gy = to_physical(grid, deriv_y(grid, c))
    return l2sq_surface(grid, gx) + l2sq_surface(grid, gy)


@dataclass(frozen=True)
class ConstraintResiduals:
    """Max-norm residuals of the structural constraints of a state."""

    trace: float           # |T(.,1) - rho|
    bottom_neumann: float  # one-sided dT/dz at z=0 (consistency-level, O(h^2))
    solenoidal: float      # |div_H vbar|
    w_top: float           # |w(.,1)|

    def as_dict(self) -> dict[str, float]:
        return {
            "trace": self.trace,
            "bottom_neumann": self.bottom_neumann,
            "solenoidal": self.solenoidal,
            "w_top": self.w_top,
        }


def constraint_check(grid: Grid, state) -> ConstraintResiduals:
    """Residuals of the trace, bottom no-flux, solenoidal and w-top conditions."""
    h = grid.dz
    trace = float(np.max(np.abs(state.T[..., -1] - state.rho)))
    bottom = float(np.max(np.abs(
        (-3.0 * state.T[..., 0] + 4.0 * state.T[..., 1] - state.T[..., 2]) / (2.0 * h)
    )))
    div_bar = div_h(grid, hydrostatic.vertical_average(grid, state.v))
    solenoidal = float(np.max(np.abs(div_bar)))
    w = hydrostatic.diagnose_w(grid, state.v)
    w_top = float(np.max(np.abs(w[..., -1])))
    return ConstraintResiduals(trace, bottom, solenoidal, w_top)


@dataclass(frozen=True)
class LedgerRecord:
    """One measured step of the energy and constraint bookkeeping."""

    t: float
    energy: float        # E0 = (|v|^2 + |T|^2 + |rho|^2) / 2
    dissipation: float   # |grad v|^2 + |grad T|^2 + |grad_H rho|^2
    rho_l5: float        # integral of |rho|^5 over the surface
    sup_T: float
    sup_rho: float
    grad_v_sq: float
    grad_T_sq: float
    grad_rho_sq: float
    trace_res: float
    div_res: float
    w_top_res: float

    @property
    def h1_seminorm_sq(self) -> float:
        return self.grad_v_sq + self.grad_T_sq + self.grad_rho_sq


def measure(grid: Grid, state) -> LedgerRecord:
    """Compute the full ledger record for one state."""
    gv = _grad_sq_volume(grid, state.v[0]) + _grad_sq_volume(grid, state.v[1])
    gT = _grad_sq_volume(grid, state.T)
    gr = _grad_h_sq_surface(grid, state.rho)
    res = constraint_check(grid, state)
    energy = 0.5 * (
        l2sq_volume(grid, state.v[0]) + l2sq_volume(grid, state.v[1])
        + l2sq_volume(grid, state.T) + l2sq_surface(grid, state.rho)
    )
    return LedgerRecord(
        t=state.t,
        energy=energy,
        dissipation=gv + gT + gr,
        rho_l5=float(np.sum(np.abs(state.rho) ** 5) / (grid.nx * grid.ny)),
        sup_T=float(np.max(np.abs(state.T))),
        sup_rho=float(np.max(np.abs(state.rho))),
        grad_v_sq=gv,
        grad_T_sq=gT,
        grad_rho_sq=gr,
        trace_res=res.trace,
        div_res=res.solenoidal,
        w_top_res=res.w_top,
    )


class Ledger:
    """Append-only time series of LedgerRecord entries."""

    def __init__(self):
        self.records: list[LedgerRecord] = []

    def append(self, record: LedgerRecord) -> None:
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, i) -> LedgerRecord:
        return self.records[i]

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


def max_principle_bound(params: PhysParams, sup_T0: float, sup_rho0: float) -> float:
    """Confinement constant max(sup|T0|, sup|rho0|, beta2^(1/4)).

    Valid for the deterministic surface-trace model with normalized peak
    insolation at most one; the radiative balance then confines the
    temperature below beta2^(1/4).
    """
    return max(sup_T0, sup_rho0, params.beta2 ** 0.25)


@dataclass(frozen=True)
class MaxPrincipleResult:
    ok: bool
    bound: float
    tolerance: float
    value: float
    margin: float
    location: tuple | None = None
    t: float | None = None


def max_principle_check(
    state, params: PhysParams, T0_bounds: tuple[float, float], dt: float
) -> MaxPrincipleResult:
    """Sup-norm confinement of T and rho by the initial-data constant.

    The tolerance carries a dt-proportional slack for the explicit
    treatment of the radiation term.
    """
    C = max_principle_bound(params, *T0_bounds)
    tol = 1e-6 + 10.0 * dt * (1.0 + C**3)
    sup_T = float(np.max(np.abs(state.T)))
    sup_rho = float(np.max(np.abs(state.rho)))
    value = max(sup_T, sup_rho)
    ok = value <= C + tol
    location = None
    if not ok:
        if sup_rho >= sup_T:
            location = np.unravel_index(np.argmax(np.abs(state.rho)), state.rho.shape)
        else:
            location = np.unravel_index(np.argmax(np.abs(state.T)), state.T.shape)
    return MaxPrincipleResult(
        ok=ok, bound=C, tolerance=tol, value=value,
        margin=C + tol - value, location=location, t=state.t,
    )


@dataclass(frozen=True)
class LedgerCheckResult:
    ok: bool
    first_bad_step: int | None = None
    message: str = ""


def energy_ledger_check(
    ledger: Ledger,
    c_led: float = 50.0,
    tol_e: float = 1e-10,
    strict: bool = False,
) -> LedgerCheckResult:
    """Per-step energy inequality E_{n+1} - E_n <= dt * c_led * (1 + E_n) + tol.

    With strict=True (pure diffusion: velocity frozen, no insolation, no
    radiation) the energy must not increase at all beyond roundoff.
    """
    E = ledger.series("energy")
    t = ledger.series("t")
    for n in range(1, len(E)):
        dt = t[n] - t[n - 1]
        if strict:
            allowed = E[n - 1] * (1.0 + 1e-14)
        else:
            allowed = E[n - 1] + dt * c_led * (1.0 + E[n - 1]) + tol_e
        if E[n] > allowed:
            return LedgerCheckResult(
                ok=False, first_bad_step=n,
                message=f"energy ledger violated at step {n}: "
                        f"E={E[n]:.6e} > allowed {allowed:.6e}",
            )
    return LedgerCheckResult(ok=True)


def h1_ledger_check(
    ledger: Ledger,
    growth_rate: float = 50.0,
    margin: float = 100.0,
    floor: float = 1e-8,
) -> LedgerCheckResult:
    """No-blow-up sentinel: gradient norms inside an exponential envelope."""
    H = ledger.series("h1_seminorm_sq")
    t = ledger.series("t")
    log_scale = np.log(margin * max(H[0], floor))
    for n in range(len(H)):
        breached = not np.isfinite(H[n]) or (
            H[n] > 0.0 and np.log(H[n]) > log_scale + growth_rate * (t[n] - t[0])
        )
        if breached:
            return LedgerCheckResult(
                ok=False, first_bad_step=n,
                message=f"H1 envelope breached at step {n}: {H[n]:.6e}",
            )
    return LedgerCheckResult(ok=True)


def fit_order(scales: np.ndarray, errors: np.ndarray) -> float:
    """Least-squares slope of log(error) against log(scale)."""
    return float(np.polyfit(np.log(np.asarray(scales, dtype=float)),
                            np.log(np.asarray(errors, dtype=float)), 1)[0])


@dataclass(frozen=True)
class ConvergenceStudy:
    scales: list[float]      # h or dt per run
    errors: list[float]      # combined L2 error per run
    order: float


def _state_error(grid: Grid, state, exact) -> float:
    """Combined L2 distance between a state and the exact fields at state.t."""
    v_ex = exact.velocity(grid, state.t)
    T_ex = exact.temperature(grid, state.t)
    rho_ex = exact.surface_temperature(grid, state.t)
    err2 = (
        l2sq_volume(grid, state.v[0] - v_ex[0])
        + l2sq_volume(grid, state.v[1] - v_ex[1])
        + l2sq_volume(grid, state.T - T_ex)
        + l2sq_surface(grid, state.rho - rho_ex)
    )
    return float(np.sqrt(err2))


def mms_spatial_study(
    scheme: str = "imex_euler",
    nz_ladder=(8, 16, 32),
    nx: int = 8,
    ny: int = 8,
    dt: float = 1e-5,
    t_end: float = 0.01,
) -> ConvergenceStudy:
    """Vertical-resolution ladder against the exact manufactured fields.

    The horizontal directions are spectrally exact for the manufactured
    modes, so the measured rate isolates the second-order vertical scheme.
    """
    from . import manufactured, timestep
    from .grid import make_grid

    exact = manufactured.ManufacturedSolution()
    errors = []
    for nz in nz_ladder:
        grid = make_grid(nx, ny, nz)
        params = exact.params(grid)
        stepper = timestep.Stepper(
            grid, params, dt, scheme=scheme, forcing=exact.forcing
        )
        state = exact.initial_state(grid)
        for _ in range(int(round(t_end / dt))):
            state = stepper.step(state)
        errors.append(_state_error(grid, state, exact))
    hs = [1.0 / nz for nz in nz_ladder]
    return ConvergenceStudy(scales=hs, errors=errors, order=fit_order(hs, errors))


def mms_temporal_study(
    scheme: str = "imex_euler",
    dt_ladder=(1.0 / 40, 1.0 / 80, 1.0 / 160),
    nx: int = 16,
    ny: int = 16,
    nz: int = 16,
    t_end: float = 0.5,
    ref_refine: int = 8,
) -> ConvergenceStudy:
    """Time-step ladder, self-converged against a fine-dt reference run.

    Same grid for all runs, so the spatial error cancels and the measured
    rate is the time-integration order.
    """
    from . import manufactured, timestep
    from .grid import make_grid

    exact = manufactured.ManufacturedSolution()
    grid = make_grid(nx, ny, nz)
    params = exact.params(grid)

    def run(dt: float):
        stepper = timestep.Stepper(grid, params, dt, scheme=scheme, forcing=exact.forcing)
        state = exact.initial_state(grid)
        for _ in range(int(round(t_end / dt))):
            state = stepper.step(state)
        return state

    ref = run(min(dt_ladder) / ref_refine)
    errors = []
    for dt in dt_ladder:
        s = run(dt)
        err2 = (
            l2sq_volume(grid, s.v[0] - ref.v[0])
            + l2sq_volume(grid, s.v[1] - ref.v[1])
            + l2sq_volume(grid, s.T - ref.T)
            + l2sq_surface(grid, s.rho - ref.rho)
        )
        errors.append(float(np.sqrt(err2)))
    return ConvergenceStudy(
        scales=list(dt_ladder), errors=errors,
        order=fit_order(np.array(dt_ladder), np.array(errors)),
    )


@dataclass(frozen=True)
class MmsStudy:
    spatial: ConvergenceStudy
    temporal: ConvergenceStudy


def mms_convergence_study(scheme: str = "imex_euler", **kwargs) -> MmsStudy:
    """Run both ladders; kwargs split by prefix spatial_/temporal_."""
    sp = {k[8:]: v for k, v in kwargs.items() if k.startswith("spatial_")}
    tm = {k[9:]: v for k, v in kwargs.items() if k.startswith("temporal_")}
    return MmsStudy(
        spatial=mms_spatial_study(scheme, **sp),
        temporal=mms_temporal_study(scheme, **tm),
    )

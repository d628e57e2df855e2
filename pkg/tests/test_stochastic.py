"""Boundary noise: increments, exponential convolution, drivers."""

import numpy as np
import pytest
import scipy.linalg

from ebpe import make_grid
from ebpe.config import RunConfig
from ebpe.linops import assemble_mode_operator
from ebpe.stochastic import (
    ConvolutionPropagator,
    NoiseSpec,
    run_direct_em,
    run_split_stochastic,
    stoch_convolution_step,
    wiener_increments,
)
from ebpe.timestep import run_deterministic

BASE = dict(nx=8, ny=8, nz=8, transport="vertical_average",
            ic_kind="random_smooth", ic_amplitude=0.5, ic_seed=5)


class TestNoiseSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            NoiseSpec(sigma=-0.1)
        with pytest.raises(ValueError):
            NoiseSpec(sigma=0.1, decay=1.5)

    def test_amplitude_table(self, grid8):
        spec = NoiseSpec(sigma=0.2, decay=2.0)
        q = spec.q_table(grid8)
        assert q[0, 0] == pytest.approx(0.2)
        assert q[1, 0] == pytest.approx(0.2 / (1 + (2 * np.pi) ** 2))
        assert np.all(q > 0)

    def test_per_step_hook(self, grid8):
        spec = NoiseSpec(sigma=0.2, q_of_step=lambda n: np.full((8, 8), float(n)))
        assert np.all(spec.q_table(grid8, 3) == 3.0)


class TestWienerIncrements:
    def test_same_seed_identical(self, grid8):
        spec = NoiseSpec(sigma=1.0, seed=99)
        a = wiener_increments(grid8, spec, 0.01, 50)
        b = wiener_increments(grid8, spec, 0.01, 50)
        assert np.array_equal(a.increments, b.increments)

    def test_variances_within_three_sigma(self, grid8):
        n, dt = 100_000, 0.02
        bundle = wiener_increments(grid8, NoiseSpec(sigma=1.0, seed=12), dt, n)
        w = bundle.increments
        se_half = (dt / 2) * np.sqrt(2.0 / n)  # standard error of a variance estimate
        se_full = dt * np.sqrt(2.0 / n)
        # paired mode: real and imaginary parts each carry dt/2
        assert abs(w[:, 1, 0].real.var() - dt / 2) < 3 * se_half
        assert abs(w[:, 1, 0].imag.var() - dt / 2) < 3 * se_half
        assert abs(np.var(np.abs(w[:, 2, 1])) + np.mean(np.abs(w[:, 2, 1])) ** 2 - dt) < 3 * se_full
        # mean mode is real with the full variance
        assert abs(w[:, 0, 0].real.var() - dt) < 3 * se_full
        assert np.max(np.abs(w[:, 0, 0].imag)) < 1e-13
        # conjugate pairing is exact
        assert np.array_equal(w[:, 1, 0], np.conj(w[:, -1, 0]))

    def test_conjugate_symmetry_gives_real_fields(self, grid8):
        bundle = wiener_increments(grid8, NoiseSpec(sigma=1.0, seed=3), 0.01, 4)
        slice0 = np.fft.ifft2(bundle.increments[0])
        assert np.max(np.abs(slice0.imag)) <= 1e-13 * (1 + np.max(np.abs(slice0.real)))

    def test_coarsen_sums_increments(self, grid8):
        bundle = wiener_increments(grid8, NoiseSpec(sigma=1.0, seed=4), 0.01, 8)
        c = bundle.coarsen(4)
        assert c.n_steps == 2
        assert c.dt == pytest.approx(0.04)
        manual = bundle.increments[:4].sum(axis=0)
        assert np.array_equal(c.increments[0], manual)
        with pytest.raises(ValueError):
            bundle.coarsen(3)


class TestConvolutionPropagator:
    def test_kernel_mode_invariant_without_noise(self, grid8):
        prop = ConvolutionPropagator(grid8, dt=0.05)
        Z = np.zeros((8, 8, grid8.nlev), dtype=complex)
        Z[0, 0, :] = 2.0  # constant stack on the mean mode: kernel of the operator
        out = prop.step_hat(Z, np.zeros((8, 8), complex), np.zeros((8, 8)))
        assert np.max(np.abs(out - Z)) < 1e-13

    def test_deterministic_decay_without_noise(self, grid8):
        prop = ConvolutionPropagator(grid8, dt=0.05)
        Z = np.zeros((8, 8, grid8.nlev), dtype=complex)
        Z[1, 0, :] = 1.0
        out = prop.step_hat(Z, np.zeros((8, 8), complex), np.zeros((8, 8)))
        assert np.max(np.abs(out[1, 0])) < np.max(np.abs(Z[1, 0]))

    def test_wrapper_matches_propagator(self, grid8, rng):
        spec = NoiseSpec(sigma=0.3, decay=2.0, seed=8)
        prop = ConvolutionPropagator(grid8, dt=0.01)
        Z = rng.standard_normal((8, 8, grid8.nlev)) + 0j
        dW = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        a = stoch_convolution_step(grid8, Z, 0.01, dW, spec, propagator=prop)
        b = prop.step_hat(Z, dW, spec.q_table(grid8))
        assert np.array_equal(a, b)

    def test_scalar_surrogate_stationary_variance(self):
        # generator -lam: update z <- e^(-lam dt) z + phi1(-lam dt) q dW
        lam, q, dt, n = 2.0, 0.8, 0.05, 100_000
        a = np.exp(-lam * dt)
        c = (1.0 - a) / (lam * dt)
        rng = np.random.default_rng(42)
        noise = rng.standard_normal(n) * np.sqrt(dt)
        z = np.empty(n)
        cur = 0.0
        for i in range(n):
            cur = a * cur + c * q * noise[i]
            z[i] = cur
        sample = z[2000:]
        target = q * q / (2.0 * lam)
        # variance-of-variance for an AR(1) chain
        se = target * np.sqrt(2.0 * (1 + a * a) / (len(sample) * (1 - a * a)))
        assert abs(sample.var() - target) < 3 * se

    def test_covariance_matches_quadrature_oracle(self, grid8):
        # distributional check at fixed t for one mode: the discrete update
        # covariance against fine Gauss-Legendre quadrature of the continuum
        # integral of exp(s M) v v^T exp(s M^T)
        M = assemble_mode_operator((2 * np.pi, 0.0), grid8).matrix
        n = grid8.nlev
        dt, steps, qk = 1e-4, 100, 0.5
        aug = np.zeros((n + 1, n + 1))
        aug[:n, :n] = dt * M
        aug[n - 1, n] = 1.0
        ex = scipy.linalg.expm(aug)
        E, w = ex[:n, :n], ex[:n, n]
        C = np.zeros((n, n))
        for _ in range(steps):
            C = E @ C @ E.T + np.outer(w, w) * qk * qk * dt
        t_end = dt * steps
        nodes, wts = np.polynomial.legendre.leggauss(120)
        v = np.zeros(n)
        v[-1] = qk
        Cq = np.zeros((n, n))
        for s, wt in zip(0.5 * t_end * (nodes + 1), 0.5 * t_end * wts):
            x = scipy.linalg.expm(s * M) @ v
            Cq += wt * np.outer(x, x)
        assert np.max(np.abs(C - Cq)) < 1e-6


class TestDrivers:
    def test_zero_noise_degeneration_bitwise(self):
        cfg = RunConfig(**BASE, dt=1e-3, t_end=0.02)
        det = run_deterministic(cfg)
        spec = NoiseSpec(sigma=0.0, seed=1)
        split = run_split_stochastic(cfg, spec=spec)
        em = run_direct_em(cfg, spec=spec)
        for driver in (split, em):
            assert np.array_equal(driver.final_state.T, det.final_state.T)
            assert np.array_equal(driver.final_state.rho, det.final_state.rho)
            assert np.array_equal(driver.final_state.v, det.final_state.v)

    def test_pathwise_determinism(self):
        cfg = RunConfig(**BASE, dt=1e-3, t_end=0.02, noise_sigma=0.2, noise_seed=9)
        a = run_split_stochastic(cfg)
        b = run_split_stochastic(cfg)
        assert np.array_equal(a.final_state.rho, b.final_state.rho)
        assert np.array_equal(a.z_rho_final, b.z_rho_final)
        c = run_direct_em(cfg)
        d = run_direct_em(cfg)
        assert np.array_equal(c.final_state.rho, d.final_state.rho)

    def test_remainder_trace_invariant(self):
        cfg = RunConfig(**BASE, dt=1e-3, t_end=0.02, noise_sigma=0.3, noise_seed=2)
        res = run_split_stochastic(cfg)
        rem = res.remainder_final
        assert np.max(np.abs(rem.T[..., -1] - rem.rho)) <= 1e-12 * (1 + np.max(np.abs(rem.rho)))
        # reassembled fields also carry the shared trace
        assert np.array_equal(res.final_state.T[..., -1], res.final_state.rho)

    def test_surface_trace_transport_rejected(self):
        cfg = RunConfig(nx=8, ny=8, nz=8, dt=1e-3, t_end=0.01,
                        transport="surface_trace")
        with pytest.raises(ValueError, match="vertical_average"):
            run_split_stochastic(cfg, spec=NoiseSpec(sigma=0.1))
        with pytest.raises(ValueError, match="vertical_average"):
            run_direct_em(cfg, spec=NoiseSpec(sigma=0.1))

    def test_bundle_mismatch_rejected(self, grid8):
        cfg = RunConfig(**BASE, dt=1e-3, t_end=0.01)
        spec = NoiseSpec(sigma=0.1, seed=1)
        short = wiener_increments(grid8, spec, 1e-3, 3)
        with pytest.raises(ValueError, match="bundle"):
            run_split_stochastic(cfg, spec=spec, bundle=short)
        wrong_dt = wiener_increments(grid8, spec, 2e-3, 10)
        with pytest.raises(ValueError, match="bundle"):
            run_direct_em(cfg, spec=spec, bundle=wrong_dt)

    def test_split_convolution_matches_direct_sum_oracle(self):
        # Z after n steps must equal the explicit sum
        # sum_k exp((n-1-k) dt M) phi1(dt M) q dW_k e_rho, with the
        # exponentials and phi1 computed independently per term
        cfg = RunConfig(**BASE, dt=5e-3, t_end=0.05)
        spec = NoiseSpec(sigma=0.4, decay=2.0, seed=31)
        grid = make_grid(8, 8, 8)
        bundle = wiener_increments(grid, spec, cfg.dt, cfg.n_steps())
        res = run_split_stochastic(cfg, spec=spec, bundle=bundle)

        i, j = 1, 2  # a mode with invertible generator
        M = assemble_mode_operator(
            (2 * np.pi * grid.kx[i], 2 * np.pi * grid.ky[j]), grid
        ).matrix
        n = grid.nlev
        phi1 = np.linalg.solve(cfg.dt * M, scipy.linalg.expm(cfg.dt * M) - np.eye(n))
        q = spec.q_table(grid)[i, j]
        e_rho = np.zeros(n)
        e_rho[-1] = 1.0
        steps = cfg.n_steps()
        Z = np.zeros(n, dtype=complex)
        for k in range(steps):
            propagate = scipy.linalg.expm((steps - 1 - k) * cfg.dt * M)
            Z += propagate @ (phi1 @ e_rho) * q * bundle.increments[k, i, j]
        from ebpe.grid import to_spectral
        z_rho_hat = to_spectral(grid, res.z_rho_final)[i, j]
        assert abs(z_rho_hat - Z[-1]) <= 1e-12 * (1 + abs(Z[-1]))

    def test_convolution_mean_unbiased(self):
        # mean of Z_rho over independent seeds stays within sampling error
        grid = make_grid(8, 8, 4)
        prop = ConvolutionPropagator(grid, dt=0.01)
        n_seeds, steps = 200, 20
        finals = np.empty((n_seeds, 8, 8))
        for s in range(n_seeds):
            spec = NoiseSpec(sigma=0.5, decay=2.0, seed=1000 + s)
            bundle = wiener_increments(grid, spec, 0.01, steps)
            q = spec.q_table(grid)
            Z = np.zeros((8, 8, grid.nlev), dtype=complex)
            for k in range(steps):
                Z = prop.step_hat(Z, bundle.increments[k], q)
            finals[s] = np.fft.ifft2(Z[..., -1], norm="forward").real
        mean = finals.mean(axis=0)
        se = finals.std(axis=0, ddof=1) / np.sqrt(n_seeds)
        assert np.all(np.abs(mean) <= 3.0 * se)

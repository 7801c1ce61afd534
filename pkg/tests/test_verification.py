"""Verification oracles: manufactured solutions, mono-fluid reduction,
symmetric collapse, and the exploratory single-mass-coordinate run."""
from dataclasses import replace

import numpy as np
import pytest

from multifluid1d import core, integrals, lagrangian, verification
from multifluid1d.core import FieldState, Grid1D, Parameters
from multifluid1d.errors import AssumptionError
from multifluid1d.verification import (build_manufactured, mms_convergence,
                                       monofluid_rhs,
                                       one_constituent_lagrangian_demo,
                                       pinned_density_decay_rate,
                                       run_monofluid, symmetric_collapse_test)

from conftest import make_grid, mono_state, smooth_mix_state


class TestManufactured:
    def test_fields_shape(self, mms_mix):
        params, sol = mms_mix
        x = np.linspace(0.01, 0.99, 33)
        assert sol.density(x, 0.01).shape == (2, 33)
        assert sol.velocity(x, 0.01).shape == (2, 33)
        assert sol.forcing(x, 0.01).shape == (2, 33)

    def test_density_positive(self, mms_mix):
        params, sol = mms_mix
        x = np.linspace(1e-3, 1 - 1e-3, 201)
        for t in (0.0, 0.01, 0.02):
            assert sol.density(x, t).min() > 0.0

    def test_velocity_vanishes_at_walls(self, mms_mix):
        _, sol = mms_mix
        walls = np.array([0.0, 1.0])
        for t in (0.0, 0.007, 0.02):
            assert np.max(np.abs(sol.velocity(walls, t))) < 1e-14

    def test_shears_sum_to_zero(self, mms_mix):
        # the constituent average must equal the mean flow x(1-x)psi(t)
        _, sol = mms_mix
        x = np.linspace(0.0, 1.0, 101)
        u = sol.velocity(x, 0.013)
        v = u.mean(axis=0)
        assert np.max(np.abs(u.sum(axis=0) / 2 - v)) < 1e-15
        # and the individual constituents genuinely shear
        assert np.max(np.abs(u[0] - u[1])) > 1e-3

    def test_continuity_exact(self, mms_mix):
        # d_t rho_i + d_x (rho_i v) = 0 by construction; verify with
        # high-order finite differences on the closed forms
        _, sol = mms_mix
        x = np.linspace(0.1, 0.9, 65)
        t0, dt, dx = 0.011, 1e-6, 1e-6
        drho_dt = (sol.density(x, t0 + dt) - sol.density(x, t0 - dt)) / (2 * dt)
        v = sol.velocity(x, t0).mean(axis=0)
        vp = sol.velocity(x + dx, t0).mean(axis=0)
        vm = sol.velocity(x - dx, t0).mean(axis=0)
        flux = (sol.density(x + dx, t0) * vp
                - sol.density(x - dx, t0) * vm) / (2 * dx)
        assert np.max(np.abs(drho_dt + flux)) < 1e-5

    def test_excessive_amplitude_rejected(self, mix_params):
        with pytest.raises(ValueError):
            build_manufactured(replace(mix_params, horizon=0.02),
                               density_amplitudes=[1.5, -1.5])

    def test_with_sources(self, mms_mix):
        params, sol = mms_mix
        forced = sol.with_sources(params)
        assert forced.forcing is sol.forcing

    def test_initial_state(self, mms_mix):
        _, sol = mms_mix
        s = sol.initial_state(make_grid(64))
        assert s.densities.shape == (2, 64)
        assert s.time == 0.0


class TestConvergence:
    def test_eulerian_second_order(self, mms_mix):
        params, sol = mms_mix
        rep = mms_convergence(sol, "eulerian", [32, 64, 128], params)
        assert rep.monotone
        assert rep.velocity_orders[-1] > 1.7
        assert rep.density_orders[-1] > 1.7

    def test_needs_three_levels(self, mms_mix):
        params, sol = mms_mix
        with pytest.raises(ValueError):
            mms_convergence(sol, "eulerian", [64, 128], params)

    def test_needs_factor_two(self, mms_mix):
        params, sol = mms_mix
        with pytest.raises(ValueError):
            mms_convergence(sol, "eulerian", [32, 48, 64], params)


class TestMonofluid:
    def test_requires_single_constituent(self, mix_params):
        s = smooth_mix_state(64)
        with pytest.raises(AssumptionError):
            monofluid_rhs(lagrangian.to_lagrangian(s), mix_params)
        with pytest.raises(AssumptionError):
            run_monofluid(s, mix_params)

    def test_requires_mass_coordinates(self, mono_params):
        with pytest.raises(AssumptionError):
            monofluid_rhs(mono_state(64), mono_params)

    def test_matches_lagrangian_specialization(self, mono_params):
        s = lagrangian.to_lagrangian(mono_state(64))
        drho, du = monofluid_rhs(s, mono_params)
        drho2, du2 = lagrangian.lagrangian_rhs(s, mono_params)
        assert np.array_equal(drho, drho2) and np.array_equal(du, du2)

    def test_run_metadata(self, mono_params):
        traj = run_monofluid(mono_state(64),
                             replace(mono_params, horizon=0.01))
        assert traj.metadata["backend"] == "monofluid"

    def test_pinned_decay_rate(self):
        measured, exact = pinned_density_decay_rate(0.7, 1.3, cell_count=128)
        assert exact == pytest.approx(2 * 0.7 * (np.pi / 1.3) ** 2)
        assert measured == pytest.approx(exact, rel=0.01)


class TestCollapse:
    def test_guards(self, mix_params):
        s = smooth_mix_state(64)
        bad = replace(mix_params,
                      viscosity=np.array([[3.0, 1.0], [1.0, 2.0]]))
        with pytest.raises(AssumptionError):
            symmetric_collapse_test(bad, s, horizon=0.01)
        # identical-data guard: smooth-mix has distinct densities
        with pytest.raises(AssumptionError):
            symmetric_collapse_test(mix_params, s, horizon=0.01)

    def test_bit_exact_at_coarse_resolution(self, mix_params):
        g = make_grid(64)
        x = g.points
        rho = np.tile(0.5 + 0.1 * np.sin(2 * np.pi * x), (2, 1))
        u = np.tile(0.05 * np.sin(np.pi * x), (2, 1))
        s = FieldState(time=0.0, grid=g, densities=rho, velocities=u)
        rep = symmetric_collapse_test(mix_params, s, horizon=0.02)
        assert rep.discrepancy <= 1e-12
        assert rep.mono_params.n_constituents == 1


class TestOneConstituentDemo:
    def test_guards(self, mono_params, mix_params):
        with pytest.raises(AssumptionError):
            one_constituent_lagrangian_demo(mono_params, mono_state(32))
        s = lagrangian.to_lagrangian(smooth_mix_state(32))
        with pytest.raises(AssumptionError):
            one_constituent_lagrangian_demo(mix_params, s)

    def test_diagnostics_recorded(self, mix_params):
        rep = one_constituent_lagrangian_demo(mix_params,
                                              smooth_mix_state(64),
                                              horizon=0.01)
        assert rep.steps > 0
        assert rep.cross_advection_max >= rep.cross_advection_final
        assert rep.final_time <= 0.01 + 1e-12
        assert "exploratory" in rep.note

    def test_off_diagonal_coupling_visible(self, mix_params):
        diag = replace(mix_params, viscosity=np.diag([2.0, 2.0]))
        r_diag = one_constituent_lagrangian_demo(diag, smooth_mix_state(64),
                                                 horizon=0.01)
        r_full = one_constituent_lagrangian_demo(mix_params,
                                                 smooth_mix_state(64),
                                                 horizon=0.01)
        assert r_full.cross_advection_final != r_diag.cross_advection_final

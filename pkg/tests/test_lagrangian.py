"""Mass-coordinate backend and the coordinate maps."""
import numpy as np
import pytest

from multifluid1d import core, integrals, lagrangian
from multifluid1d.core import FieldState, Grid1D, Parameters
from multifluid1d.eulerian import EulerianSolverConfig

from conftest import mono_state, smooth_mix_state


class TestCoordinateMaps:
    def test_total_mass_is_domain_width(self):
        s = lagrangian.to_lagrangian(smooth_mix_state(128))
        # smooth-mix total density integrates to one
        assert lagrangian.total_mass(s) == pytest.approx(1.0, abs=1e-10)

    def test_unit_length_identity(self):
        s = lagrangian.to_lagrangian(smooth_mix_state(128))
        assert lagrangian.unit_length(s) == pytest.approx(1.0, abs=1e-12)

    def test_round_trip(self):
        s0 = smooth_mix_state(256)
        back = lagrangian.to_eulerian(lagrangian.to_lagrangian(s0))
        assert np.max(np.abs(back.densities - s0.densities)) < 1e-8
        assert np.max(np.abs(back.velocities - s0.velocities)) < 1e-8

    def test_masses_preserved_by_transform(self):
        s0 = smooth_mix_state(256)
        s1 = lagrangian.to_lagrangian(s0)
        m0 = integrals.masses(s0)
        m1 = integrals.masses(s1)
        assert np.allclose(m0, m1, atol=1e-6)

    def test_uniform_state_maps_to_itself(self):
        g = Grid1D(cell_count=64, length=1.0,
                   coordinate_kind=core.EULERIAN_X)
        s = FieldState(time=0.0, grid=g, densities=np.full((1, 64), 1.0),
                       velocities=np.zeros((1, 64)))
        out = lagrangian.to_lagrangian(s)
        assert out.grid.length == pytest.approx(1.0, abs=1e-13)
        assert np.allclose(out.densities, 1.0, atol=1e-12)

    def test_wrong_direction_rejected(self):
        s = lagrangian.to_lagrangian(smooth_mix_state(64))
        with pytest.raises(ValueError):
            lagrangian.to_lagrangian(s)
        with pytest.raises(ValueError):
            lagrangian.to_eulerian(smooth_mix_state(64))

    def test_eulerian_positions_monotone(self):
        s = lagrangian.to_lagrangian(smooth_mix_state(64))
        x = lagrangian.eulerian_positions(s)
        assert np.all(np.diff(x) > 0)
        assert 0.0 < x[0] and x[-1] < 1.0


class TestRhs:
    def test_rest_equilibrium(self, mix_params):
        g = Grid1D(cell_count=32, length=1.0,
                   coordinate_kind=core.LAGRANGIAN_Y)
        s = FieldState(time=0.0, grid=g, densities=np.full((2, 32), 0.5),
                       velocities=np.zeros((2, 32)))
        drho, du = lagrangian.lagrangian_rhs(s, mix_params)
        assert np.all(drho == 0.0) and np.all(du == 0.0)

    def test_uniform_density_heat_equation(self, mono_params):
        # rho = 1: momentum reduces to du/dt = mu u_yy
        errs = []
        for n in (64, 256):
            g = Grid1D(cell_count=n, length=1.0,
                       coordinate_kind=core.LAGRANGIAN_Y)
            y = g.points
            s = FieldState(time=0.0, grid=g, densities=np.ones((1, n)),
                           velocities=np.sin(np.pi * y)[None, :])
            _, du = lagrangian.lagrangian_rhs(s, mono_params)
            errs.append(np.abs(du[0] + np.pi ** 2 * np.sin(np.pi * y)))
        assert errs[1][2:-2].max() < 2e-3       # interior pointwise
        assert errs[1].max() < errs[0].max() / 2  # wall cells refine too

    def test_concentration_rate_vanishes(self, mix_params):
        # d/dt (rho_i / rho) = 0 pointwise: drho_i is proportional to rho_i
        s = lagrangian.to_lagrangian(smooth_mix_state(64))
        drho, _ = lagrangian.lagrangian_rhs(s, mix_params)
        xi = core.concentrations(s)
        dxi = (drho * core.total_density(s)
               - s.densities * drho.sum(axis=0)) / core.total_density(s) ** 2
        assert np.max(np.abs(dxi)) < 1e-14


class TestRun:
    def test_accepts_eulerian_initial_data(self, mix_params):
        traj = lagrangian.run_lagrangian(
            smooth_mix_state(64), mix_params,
            EulerianSolverConfig(snapshot_interval=0.01), horizon=0.01)
        assert traj.coordinate_kind == core.LAGRANGIAN_Y
        assert traj.metadata["total_mass"] == pytest.approx(1.0, abs=1e-10)

    def test_mass_conserved_to_roundoff(self, mix_params):
        traj = lagrangian.run_lagrangian(
            smooth_mix_state(64), mix_params,
            EulerianSolverConfig(snapshot_interval=0.02), horizon=0.04)
        m = np.stack([integrals.masses(s) for s in traj.states])
        assert np.max(np.abs(m - m[0])) < 1e-12

    def test_unit_length_conserved(self, mix_params):
        traj = lagrangian.run_lagrangian(
            smooth_mix_state(64), mix_params,
            EulerianSolverConfig(snapshot_interval=0.02), horizon=0.04)
        ul = traj.monitors["unit_length"]
        assert np.max(np.abs(ul - 1.0)) < 1e-8

    def test_sandwich_bounds(self, mix_params):
        traj = lagrangian.run_lagrangian(
            smooth_mix_state(64), mix_params,
            EulerianSolverConfig(snapshot_interval=0.02), horizon=0.04)
        d = traj.states[0].grid.length
        for s in traj.states:
            rho = core.total_density(s)
            assert rho.min() <= d <= rho.max()

    def test_forced_kernel_matches_python_path(self, mms_mix):
        # the jitted forced loop against the slow stepping path
        params, sol = mms_mix
        from dataclasses import replace
        forced = sol.with_sources(params)
        s0 = sol.initial_state(Grid1D(cell_count=48, length=1.0,
                                      coordinate_kind=core.EULERIAN_X))
        cfg = EulerianSolverConfig(snapshot_interval=0.002)
        fast = lagrangian.run_lagrangian(s0, forced, cfg, horizon=0.002)
        slow_forcing = lambda x, t: sol.forcing(np.ascontiguousarray(x), t)
        slow = lagrangian.run_lagrangian(
            s0, replace(params, forcing=slow_forcing), cfg, horizon=0.002)
        assert np.max(np.abs(fast.states[-1].velocities
                             - slow.states[-1].velocities)) < 1e-12
        assert np.max(np.abs(fast.states[-1].densities
                             - slow.states[-1].densities)) < 1e-12

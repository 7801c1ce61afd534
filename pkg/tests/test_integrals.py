"""Quadrature conventions and the conserved functionals."""
import numpy as np
import pytest

from multifluid1d import core, integrals
from multifluid1d.core import FieldState, Grid1D, Parameters


def cell_grid(n, length=1.0, kind=core.EULERIAN_X):
    return Grid1D(cell_count=n, length=length, coordinate_kind=kind)


class TestIntegrate:
    def test_midpoint_exact_for_linear(self):
        g = cell_grid(16)
        vals = 3.0 * g.points + 1.0
        assert integrals.integrate(vals, g) == pytest.approx(2.5, abs=1e-14)

    def test_second_order(self):
        errs = []
        for n in (32, 64):
            g = cell_grid(n)
            errs.append(abs(integrals.integrate(np.sin(np.pi * g.points), g)
                            - 2.0 / np.pi))
        assert errs[1] < errs[0] / 3.5

    def test_length_scaling(self):
        g = cell_grid(16, length=2.0)
        assert integrals.integrate(np.ones(16), g) == pytest.approx(2.0)


class TestMassesAndEnergy:
    def setup_method(self):
        self.params = Parameters(
            n_constituents=2, pressure_coeff=1.0, adiabatic_index=1.4,
            viscosity=np.array([[2.0, 1.0], [1.0, 2.0]]), horizon=0.1)
        g = cell_grid(64)
        x = g.points
        self.state = FieldState(
            time=0.0, grid=g,
            densities=np.stack([0.5 + 0.2 * np.sin(2 * np.pi * x),
                                0.5 - 0.1 * np.sin(2 * np.pi * x)]),
            velocities=np.stack([0.1 * np.sin(np.pi * x),
                                 -0.05 * np.sin(np.pi * x)]))

    def test_masses_match_quadrature(self):
        m = integrals.masses(self.state)
        assert m.shape == (2,)
        assert m[0] == pytest.approx(0.5, abs=1e-12)
        assert m[1] == pytest.approx(0.5, abs=1e-12)

    def test_energy_is_kinetic_plus_elastic(self):
        e = integrals.energy(self.state, self.params)
        kin = integrals.integrate(
            (self.state.densities * self.state.velocities ** 2 / 2.0)
            .sum(axis=0), self.state.grid)
        n, k, gam = 2, 1.0, 1.4
        elastic = n * k / (gam - 1.0) * integrals.integrate(
            core.total_density(self.state) ** gam, self.state.grid)
        assert e == pytest.approx(kin + elastic, rel=1e-13)

    def test_dissipation_zero_at_rest(self):
        rest = FieldState(time=0.0, grid=self.state.grid,
                          densities=self.state.densities,
                          velocities=np.zeros_like(self.state.velocities))
        assert integrals.dissipation(rest, self.params) == 0.0

    def test_lagrangian_energy_weights(self):
        # in mass coordinates the kinetic integrand carries xi_i = rho_i/rho
        g = cell_grid(64, length=1.0, kind=core.LAGRANGIAN_Y)
        state = FieldState(time=0.0, grid=g, densities=self.state.densities,
                           velocities=self.state.velocities)
        e = integrals.energy(state, self.params)
        xi = core.concentrations(state)
        kin = integrals.integrate((xi * state.velocities ** 2 / 2.0).sum(axis=0),
                                  g)
        elastic = 2 * 1.0 / 0.4 * integrals.integrate(
            core.total_density(state) ** 0.4, g)
        assert e == pytest.approx(kin + elastic, rel=1e-13)

    def test_monitor_dict_keys(self):
        mon = integrals.basic_monitors(self.state, self.params)
        for key in ("energy", "dissipation", "masses", "rho_min", "rho_max"):
            assert key in mon

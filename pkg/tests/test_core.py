"""Core types, derived fields, and the viscosity-matrix auditor."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from multifluid1d import core
from multifluid1d.core import (DomainError, FieldState, GeneralViscosityPair,
                               Grid1D, Parameters)


def params_with(viscosity, n=None, **kw):
    m = np.asarray(viscosity, dtype=float)
    defaults = dict(n_constituents=n or m.shape[0], pressure_coeff=1.0,
                    adiabatic_index=1.4, viscosity=m, horizon=0.1)
    defaults.update(kw)
    return Parameters(**defaults)


class TestParameters:
    def test_valid(self):
        p = params_with([[2.0, 1.0], [1.0, 2.0]])
        assert p.lambda_max == pytest.approx(3.0)

    @pytest.mark.parametrize("kw", [
        dict(adiabatic_index=1.0),
        dict(adiabatic_index=0.9),
        dict(pressure_coeff=0.0),
        dict(horizon=0.0),
    ])
    def test_scalar_hypotheses(self, kw):
        with pytest.raises(DomainError):
            params_with([[1.0]], **kw)

    def test_asymmetric_matrix_rejected(self):
        with pytest.raises(DomainError):
            params_with([[2.0, 1.0], [0.5, 2.0]])

    def test_indefinite_matrix_rejected(self):
        with pytest.raises(DomainError):
            params_with([[1.0, 2.0], [2.0, 1.0]])

    def test_shape_mismatch(self):
        with pytest.raises(DomainError):
            params_with([[2.0, 1.0], [1.0, 2.0]], n=3)


class TestGrid:
    def test_cell_centers(self):
        g = Grid1D(cell_count=4, length=1.0,
                   coordinate_kind=core.EULERIAN_X)
        assert np.allclose(g.points, [0.125, 0.375, 0.625, 0.875])
        assert g.h == pytest.approx(0.25)

    def test_too_coarse(self):
        with pytest.raises(DomainError):
            Grid1D(cell_count=3, length=1.0,
                   coordinate_kind=core.EULERIAN_X)


class TestDerivedFields:
    def setup_method(self):
        self.grid = Grid1D(cell_count=32, length=1.0,
                           coordinate_kind=core.EULERIAN_X)
        x = self.grid.points
        self.state = FieldState(
            time=0.0, grid=self.grid,
            densities=np.stack([1.0 + 0.2 * np.sin(2 * np.pi * x),
                                0.5 + 0.1 * np.cos(2 * np.pi * x)]),
            velocities=np.stack([np.sin(np.pi * x), -np.sin(np.pi * x)]))

    def test_total_density_and_mean_velocity(self):
        assert np.allclose(core.total_density(self.state),
                           self.state.densities.sum(axis=0))
        assert np.allclose(core.average_velocity(self.state), 0.0)

    def test_concentrations_sum_to_one(self):
        assert np.allclose(core.concentrations(self.state).sum(axis=0), 1.0)

    def test_pressure_monotone(self):
        p = params_with([[1.0]])
        assert core.pressure(1.0, p) < core.pressure(1.5, p)

    def test_pressure_rejects_nonpositive(self):
        with pytest.raises(DomainError):
            core.pressure(np.array([1.0, 0.0]), params_with([[1.0]]))

    def test_gradient_second_order(self):
        errs = []
        for n in (64, 128):
            g = Grid1D(cell_count=n, length=1.0,
                       coordinate_kind=core.EULERIAN_X)
            x = g.points
            num = core.gradient(np.sin(2 * np.pi * x), g.h)
            errs.append(np.max(np.abs(num - 2 * np.pi * np.cos(2 * np.pi * x))))
        assert errs[1] < errs[0] / 3.5

    def test_dissipation_density_nonnegative(self):
        p = params_with([[2.0, 1.0], [1.0, 2.0]])
        q = core.dissipation_density(self.state, p)
        assert q.min() >= -1e-14 * max(1.0, q.max())


class TestFieldState:
    def test_positivity_enforced(self):
        g = Grid1D(cell_count=4, length=1.0, coordinate_kind=core.EULERIAN_X)
        with pytest.raises(DomainError):
            FieldState(time=0.0, grid=g,
                       densities=np.array([[1.0, 1.0, -1.0, 1.0]]),
                       velocities=np.zeros((1, 4)))

    def test_shape_checked(self):
        g = Grid1D(cell_count=4, length=1.0, coordinate_kind=core.EULERIAN_X)
        with pytest.raises(DomainError):
            FieldState(time=0.0, grid=g, densities=np.ones((1, 4)),
                       velocities=np.zeros((2, 4)))


def audit_single(m, lam=None):
    m = np.asarray(m, dtype=float)
    lam = np.zeros_like(m) if lam is None else np.asarray(lam, dtype=float)
    return core.audit_viscosity(GeneralViscosityPair(
        lambda_matrix=lam, mu_matrix=m, flow_dim=1))


class TestAudit:
    def test_reference_matrix_admissible(self):
        rep = audit_single([[2.0, 1.0], [1.0, 2.0]])
        assert rep.all_ok and not rep.diagonal and not rep.triangular

    def test_indefinite_matrix_fails_with_witness(self):
        m = np.array([[1.0, 2.0], [2.0, 1.0]])
        rep = audit_single(m)
        assert not rep.positive_definite
        w = rep.witness
        assert w is not None
        # the witness direction actually exhibits the indefiniteness
        assert w @ m @ w < 0

    def test_semidefinite_boundary(self):
        rep = audit_single([[1.0, 1.0], [1.0, 1.0]])
        assert rep.second_law_ok and not rep.positive_definite

    def test_diagonal_flagged(self):
        rep = audit_single(np.diag([2.0, 3.0]))
        assert rep.diagonal and rep.triangular

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 3), st.integers(0, 10_000))
    def test_agrees_with_brute_force(self, n, seed):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(n, n))
        m = 0.5 * (a + a.T)
        rep = audit_single(m)
        sampled_min = core.brute_force_definiteness(m, seed=seed)
        if rep.positive_definite:
            assert sampled_min > 0
        if sampled_min < -1e-6:
            assert not rep.positive_definite

    @settings(max_examples=25, deadline=None)
    @given(st.integers(2, 3), st.integers(0, 10_000))
    def test_gram_matrices_admissible(self, n, seed):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(n, n + 1))
        m = a @ a.T + 1e-3 * np.eye(n)
        assert audit_single(m).all_ok


class TestSymmetricReduction:
    def test_equal_row_sums_collapse(self):
        p = params_with([[2.0, 1.0], [1.0, 2.0]])
        mono = core.symmetric_reduction_check(p)
        assert mono is not None
        # total-density formulation: viscosity N*s, pressure coefficient N*K
        assert mono.viscosity[0, 0] == pytest.approx(6.0)
        assert mono.pressure_coeff == pytest.approx(2.0)

    def test_unequal_row_sums_refused(self):
        p = params_with([[2.0, 1.0], [1.0, 3.0]])
        assert core.symmetric_reduction_check(p) is None

    def test_identity_for_single_constituent(self):
        p = params_with([[1.5]])
        mono = core.symmetric_reduction_check(p)
        assert mono.viscosity[0, 0] == pytest.approx(1.5)
        assert mono.pressure_coeff == pytest.approx(1.0)

"""Oracles and negative experiments.

Four independent ways to catch a wrong solver:

* a mono-fluid reference path sharing the Lagrangian stencils (N = 1);
* the symmetric-collapse reduction, where identical constituents must
  reproduce a mono-fluid run through different code;
* manufactured solutions with symbolically derived momentum sources, for
  measured convergence orders against closed-form exact fields;
* the documented negative experiment: mass coordinates attached to a single
  constituent, whose cross-advection terms vanish only for diagonal
  viscosity matrices.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Sequence

import numpy as np
import sympy as sp
from numba import njit

from . import core, eulerian, galerkin, integrals, lagrangian
from .core import FieldState, Grid1D, Parameters
from .errors import AssumptionError
from .eulerian import EulerianSolverConfig, Trajectory


# ---------------------------------------------------------------------------
# manufactured solutions


@dataclass(frozen=True)
class ManufacturedSolution:
    """Closed-form exact fields plus the derived momentum sources.

    The density/velocity pair is built so the continuity equations hold
    exactly (densities are transported by the exact flow of the mean
    velocity), so only momentum sources are manufactured.
    """

    n_constituents: int
    density: Callable[[np.ndarray, float], np.ndarray]
    velocity: Callable[[np.ndarray, float], np.ndarray]
    forcing: Callable[[np.ndarray, float], np.ndarray]

    def with_sources(self, params: Parameters) -> Parameters:
        return replace(params, forcing=self.forcing)

    def initial_state(self, grid: Grid1D) -> FieldState:
        x = grid.points
        return FieldState(time=0.0, grid=grid,
                          densities=self.density(x, 0.0),
                          velocities=self.velocity(x, 0.0))


def _stack_lambdified(exprs, x, t, jit: bool):
    """(x_array, t) -> (N, len(x)) evaluator from per-constituent scalars."""
    n = len(exprs)
    fns = [sp.lambdify((x, t), e, modules="numpy", cse=True) for e in exprs]
    if jit:
        fns = [njit(cache=False)(f) for f in fns]
    ns = {"np": np}
    ns.update({f"_f{i}": f for i, f in enumerate(fns)})
    lines = [f"def _stacked(xv, tv):",
             f"    out = np.empty(({n}, xv.shape[0]))"]
    lines += [f"    out[{i}] = _f{i}(xv, tv)" for i in range(n)]
    lines.append("    return out")
    exec("\n".join(lines), ns)
    fn = ns["_stacked"]
    return njit(cache=False)(fn) if jit else fn


def build_manufactured(params: Parameters,
                       flow_amplitude: float = 0.4,
                       flow_frequency: float = 4.0,
                       shear_amplitude: float = 0.05,
                       density_amplitudes: Optional[Sequence[float]] = None
                       ) -> ManufacturedSolution:
    """Smooth manufactured pair on (0, 1) with exactly satisfied continuity.

    The mean velocity is v = x(1-x) psi(t); its flow map is the logistic
    reparametrization x0 -> x, so densities transported from smooth initial
    profiles stay in closed form.  Per-constituent shears sum to zero so the
    mean of the velocities is exactly v.
    """
    n = params.n_constituents
    x, t = sp.symbols("x t", real=True)

    a, omega = flow_amplitude, flow_frequency
    s = sp.Rational(1) * a / omega * sp.sin(omega * t)
    E = sp.exp(s)
    x0 = x / (E * (1 - x) + x)
    jac = sp.diff(x0, x)
    v = x * (1 - x) * sp.diff(s, t)

    if density_amplitudes is None:
        density_amplitudes = [0.2 * (-0.5) ** i for i in range(n)]
    rho_exprs = [(sp.Rational(1, n)) * (1 + eps * sp.sin(2 * sp.pi * x0)) * jac
                 for eps in density_amplitudes]
    rho_tot = sum(rho_exprs)

    betas = [shear_amplitude * _zero_sum_weight(i, n) for i in range(n)]
    u_exprs = [v + b * sp.sin(2 * sp.pi * x) * sp.cos(flow_frequency * t)
               for b in betas]

    K, gamma = params.pressure_coeff, params.adiabatic_index
    press = K * sp.diff(rho_tot ** gamma, x)
    f_exprs = []
    for i in range(n):
        visc = sum(params.viscosity[i, j] * sp.diff(u_exprs[j], x, 2)
                   for j in range(n))
        f_exprs.append(sp.diff(u_exprs[i], t) + v * sp.diff(u_exprs[i], x)
                       + (press - visc) / rho_exprs[i])

    density = _stack_lambdified(rho_exprs, x, t, jit=False)
    velocity = _stack_lambdified(u_exprs, x, t, jit=False)
    forcing = _stack_lambdified(f_exprs, x, t, jit=True)

    xs = np.linspace(1e-4, 1 - 1e-4, 401)
    for tv in np.linspace(0.0, params.horizon, 9):
        if density(xs, float(tv)).min() <= 0:
            raise ValueError("manufactured densities are not positive; "
                             "reduce the amplitudes")
    return ManufacturedSolution(n_constituents=n, density=density,
                                velocity=velocity, forcing=forcing)


def _zero_sum_weight(i: int, n: int) -> float:
    if n == 1:
        return 0.0
    return 1.0 if i == 0 else -1.0 / (n - 1)


@dataclass
class ConvergenceReport:
    resolutions: List[int]
    velocity_errors: List[float]
    density_errors: List[float]
    velocity_orders: List[float]
    density_orders: List[float]
    flag: str  # "ok" | "exact" | "inconclusive"

    @property
    def monotone(self) -> bool:
        e = self.velocity_errors
        return all(e[k + 1] < e[k] for k in range(len(e) - 1))


def _l2_error(num: np.ndarray, exact: np.ndarray, h: float) -> float:
    return float(np.sqrt(h * np.sum((num - exact) ** 2, axis=1)).max())


def mms_convergence(solution: ManufacturedSolution, backend: str,
                    resolutions: Sequence[int], params: Parameters,
                    cfg: Optional[EulerianSolverConfig] = None
                    ) -> ConvergenceReport:
    """Refinement study against the closed-form exact fields.

    ``resolutions`` are cell counts (eulerian/lagrangian; >= 3 levels at
    factor-2 refinement) or mode counts (galerkin).  Errors are L2 norms of
    the worst constituent at the horizon; non-monotone error sequences are
    flagged inconclusive rather than raised.
    """
    if backend not in ("eulerian", "lagrangian", "galerkin"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend != "galerkin":
        if len(resolutions) < 3:
            raise ValueError("need at least 3 grid levels")
        if any(b != 2 * a for a, b in zip(resolutions, resolutions[1:])):
            raise ValueError("grids must refine by factor 2")
    forced = solution.with_sources(params)
    cfg = cfg or EulerianSolverConfig(
        snapshot_interval=params.horizon, density_flux_order=2)

    u_errs, r_errs = [], []
    for res in resolutions:
        if backend == "galerkin":
            cells = 512
            gcfg = galerkin.GalerkinConfig(
                mode_count=res, snapshot_interval=params.horizon)
            grid = Grid1D(cell_count=cells, length=1.0,
                          coordinate_kind=core.EULERIAN_X)
            traj = galerkin.run_galerkin(solution.initial_state(grid),
                                         forced, gcfg)
            final = traj.states[-1]
            xg, T = final.grid.points, final.time
            u_err = _l2_error(final.velocities, solution.velocity(xg, T),
                              final.grid.h)
            r_err = _l2_error(final.densities, solution.density(xg, T),
                              final.grid.h)
        else:
            grid = Grid1D(cell_count=res, length=1.0,
                          coordinate_kind=core.EULERIAN_X)
            initial = solution.initial_state(grid)
            if backend == "eulerian":
                traj = eulerian.run(initial, forced, cfg)
                final = traj.states[-1]
                xf = final.grid.points
            else:
                traj = lagrangian.run_lagrangian(initial, forced, cfg)
                final = traj.states[-1]
                xf = lagrangian.eulerian_positions(final)
            T = final.time
            u_err = _l2_error(final.velocities, solution.velocity(xf, T),
                              final.grid.h)
            r_err = _l2_error(final.densities, solution.density(xf, T),
                              final.grid.h)
        u_errs.append(u_err)
        r_errs.append(r_err)

    def orders(errs):
        out = []
        for e0, e1 in zip(errs, errs[1:]):
            out.append(float(np.log2(e0 / e1)) if e0 > 0 and e1 > 0
                       else float("nan"))
        return out

    flag = "ok"
    if max(u_errs) < 1e-12:
        flag = "exact"
    elif any(e1 >= e0 for e0, e1 in zip(u_errs, u_errs[1:])):
        flag = "inconclusive"
    return ConvergenceReport(resolutions=list(resolutions),
                             velocity_errors=u_errs, density_errors=r_errs,
                             velocity_orders=orders(u_errs),
                             density_orders=orders(r_errs), flag=flag)


# ---------------------------------------------------------------------------
# mono-fluid oracle


def monofluid_rhs(state: FieldState, params: Parameters,
                  cfg: Optional[EulerianSolverConfig] = None):
    """Mass-coordinate mono-fluid derivatives.

    Deliberately the same stencils as the N-constituent Lagrangian path
    specialized to one constituent; tests assert the shared specialization.
    """
    if params.n_constituents != 1 or state.n_constituents != 1:
        raise AssumptionError("mono-fluid oracle requires N = 1")
    if state.grid.coordinate_kind != core.LAGRANGIAN_Y:
        raise AssumptionError("mono-fluid oracle works in mass coordinates")
    return lagrangian.lagrangian_rhs(state, params, cfg)


def run_monofluid(initial: FieldState, params: Parameters,
                  cfg: Optional[EulerianSolverConfig] = None,
                  horizon: Optional[float] = None) -> Trajectory:
    """Mono-fluid reference trajectory (N = 1 Lagrangian specialization)."""
    if params.n_constituents != 1:
        raise AssumptionError("mono-fluid oracle requires N = 1")
    traj = lagrangian.run_lagrangian(initial, params, cfg, horizon)
    traj.metadata["backend"] = "monofluid"
    return traj


def pinned_density_decay_rate(mu: float, d: float, cell_count: int = 256,
                              e_foldings: float = 1.0):
    """Decay rate of the slowest velocity mode with the density pinned at 1.

    With continuity disabled and rho = 1, the momentum equation is the heat
    equation on (0, d); v = sin(pi y / d) has kinetic energy decaying at
    rate 2 mu (pi/d)^2.  Returns (measured_rate, exact_rate).
    """
    params = Parameters(n_constituents=1, pressure_coeff=1.0,
                        adiabatic_index=1.4, viscosity=np.array([[mu]]),
                        horizon=1.0)
    grid = Grid1D(cell_count=cell_count, length=d,
                  coordinate_kind=core.LAGRANGIAN_Y)
    rho = np.ones((1, cell_count))
    u = np.sin(np.pi * grid.points / d)[None, :]
    rate_exact = 2.0 * mu * (np.pi / d) ** 2
    horizon = e_foldings / rate_exact

    def du_only(uv, tau):
        s = FieldState(time=tau, grid=grid, densities=rho, velocities=uv)
        return lagrangian.lagrangian_rhs(s, params)[1]

    dt = 0.4 * grid.h ** 2 / (2.0 * mu)
    steps = int(np.ceil(horizon / dt))
    dt = horizon / steps
    t = 0.0
    e0 = integrals.integrate(u[0] ** 2, grid)
    for _ in range(steps):  # classic RK4, density frozen
        k1 = du_only(u, t)
        k2 = du_only(u + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = du_only(u + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = du_only(u + dt * k3, t + dt)
        u = u + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += dt
    e1 = integrals.integrate(u[0] ** 2, grid)
    rate = float(np.log(e0 / e1) / horizon)
    return rate, float(rate_exact)


# ---------------------------------------------------------------------------
# symmetric collapse


@dataclass
class CollapseReport:
    density_discrepancy: float
    velocity_discrepancy: float
    mono_params: Parameters
    snapshots: int

    @property
    def discrepancy(self) -> float:
        return max(self.density_discrepancy, self.velocity_discrepancy)


def symmetric_collapse_test(params: Parameters, initial: FieldState,
                            cfg: Optional[EulerianSolverConfig] = None,
                            horizon: Optional[float] = None
                            ) -> CollapseReport:
    """Identical constituents under an equal-row-sum viscosity matrix must
    move like a single fluid; runs both systems and reports the L-infinity
    discrepancies of total density and mean velocity over the horizon.
    """
    mono = core.symmetric_reduction_check(params)
    if mono is None:
        raise AssumptionError(
            "viscosity matrix rows must have equal sums for the collapse")
    n = params.n_constituents
    rho0 = initial.densities
    if np.max(np.abs(rho0 - rho0[0])) > 1e-14 * max(1.0, rho0.max()):
        raise AssumptionError("collapse needs identical initial densities")
    u0 = initial.velocities
    if np.max(np.abs(u0 - u0[0])) > 1e-14 * max(1.0, np.abs(u0).max()):
        raise AssumptionError("collapse needs identical initial velocities")

    cfg = cfg or EulerianSolverConfig()
    multi = eulerian.run(initial, params, cfg, horizon)
    mono_state = FieldState(time=initial.time, grid=initial.grid,
                            densities=core.total_density(initial)[None, :],
                            velocities=u0[:1].copy())
    single = eulerian.run(mono_state, mono, cfg, horizon)

    drho = dv = 0.0
    for sm, ss in zip(multi.states, single.states):
        drho = max(drho, float(np.max(np.abs(
            core.total_density(sm) - ss.densities[0]))))
        dv = max(dv, float(np.max(np.abs(
            core.average_velocity(sm) - ss.velocities[0]))))
    return CollapseReport(density_discrepancy=drho, velocity_discrepancy=dv,
                          mono_params=mono, snapshots=len(multi.states))


# ---------------------------------------------------------------------------
# one-constituent mass coordinates (documented negative experiment)


def _one_constituent_rhs(rho, u, m, K, gamma, Mv, h):
    """Derivatives of the system in mass coordinates attached to constituent
    m: continuity gains the cross-advection rho_m (u_i - u_m) d_z rho_i and
    momentum is weighted by rho_i / rho_m (momentum exchange dropped)."""
    rho_m = rho[m]
    rho_tot = rho.sum(axis=0)
    drho = np.empty_like(rho)
    du = np.empty_like(u)
    cross = np.empty_like(rho)
    dz_u = np.stack([_dz_velocity(u[i], h) for i in range(rho.shape[0])])
    g = core.gradient(rho_tot ** gamma, h)
    for i in range(rho.shape[0]):
        rel = u[i] - u[m]
        cross[i] = rho_m * rel * core.gradient(rho[i], h)
        drho[i] = -cross[i] - rho[i] * rho_m * dz_u[i]
        visc = np.zeros_like(u[i])
        for j in range(rho.shape[0]):
            visc += Mv[i, j] * _dz_flux(rho_m, u[j], h)
        du[i] = (rho_m / rho[i]) * (
            visc - K * g - rho[i] * rel * dz_u[i])
    return drho, du, cross


def _dz_velocity(ui, h):
    out = np.empty_like(ui)
    out[1:-1] = (ui[2:] - ui[:-2]) / (2.0 * h)
    out[0] = (ui[1] + ui[0]) / (2.0 * h)
    out[-1] = (-ui[-1] - ui[-2]) / (2.0 * h)
    return out


def _dz_flux(rho_w, uj, h):
    n = uj.shape[0]
    G = np.empty(n + 1)
    wl = max(1.5 * rho_w[0] - 0.5 * rho_w[1], 0.5 * rho_w[0])
    wr = max(1.5 * rho_w[-1] - 0.5 * rho_w[-2], 0.5 * rho_w[-1])
    G[0] = wl * (9.0 * uj[0] - uj[1]) / (3.0 * h)
    G[-1] = -wr * (9.0 * uj[-1] - uj[-2]) / (3.0 * h)
    G[1:-1] = 0.5 * (rho_w[:-1] + rho_w[1:]) * np.diff(uj) / h
    return np.diff(G) / h


@dataclass
class OneConstituentReport:
    completed: bool
    steps: int
    cross_advection_max: float
    cross_advection_final: float
    final_time: float
    rho_min: float
    rho_max: float
    note: str = ("momentum exchange terms are dropped; the experiment is "
                 "exploratory and records diagnostics only")


def one_constituent_lagrangian_demo(params: Parameters, initial: FieldState,
                                    horizon: float = 0.02,
                                    m: int = 0,
                                    cell_count: Optional[int] = None
                                    ) -> OneConstituentReport:
    """Short run in mass coordinates attached to constituent ``m``.

    For a diagonal viscosity matrix the cross-advection terms are the only
    coupling and the run stays benign; for a non-diagonal matrix their
    recorded magnitude grows.  Instability is an outcome, not an error.
    """
    if params.n_constituents < 2:
        raise AssumptionError("negative experiment needs N >= 2")
    if initial.grid.coordinate_kind != core.EULERIAN_X:
        raise AssumptionError("provide Eulerian initial data")

    # mass coordinate of constituent m alone
    g = initial.grid
    d_m = float(integrals.integrate(initial.densities[m], g))
    zgrid = Grid1D(cell_count=g.cell_count, length=d_m,
                   coordinate_kind=core.LAGRANGIAN_Y)
    z_of_x = np.cumsum(g.h * initial.densities[m]) \
        - 0.5 * g.h * initial.densities[m]
    zc = zgrid.points
    rho = np.stack([np.interp(zc, z_of_x, initial.densities[i])
                    for i in range(params.n_constituents)])
    u = np.stack([np.interp(zc, z_of_x, initial.velocities[i])
                  for i in range(params.n_constituents)])

    h = zgrid.h
    lam = params.lambda_max
    t, steps, cross_max, cross_final = 0.0, 0, 0.0, 0.0
    while t < horizon:
        dt = 0.4 * h * h * min(1.0, rho.min() / rho.max()) \
            / (2.0 * lam * rho.sum(axis=0).max())
        dt = min(dt, horizon - t)
        k1 = _one_constituent_rhs(rho, u, m, params.pressure_coeff,
                                  params.adiabatic_index, params.viscosity, h)
        cross_final = float(np.max(np.abs(k1[2])))
        cross_max = max(cross_max, cross_final)
        r1, u1 = rho + dt * k1[0], u + dt * k1[1]
        if not (np.all(np.isfinite(r1)) and np.all(np.isfinite(u1))) \
                or r1.min() <= 0:
            return OneConstituentReport(completed=False, steps=steps,
                                        cross_advection_max=cross_max,
                                        cross_advection_final=cross_final,
                                        final_time=t, rho_min=float(rho.min()),
                                        rho_max=float(rho.max()))
        k2 = _one_constituent_rhs(r1, u1, m, params.pressure_coeff,
                                  params.adiabatic_index, params.viscosity, h)
        rho = 0.5 * (rho + r1 + dt * k2[0])
        u = 0.5 * (u + u1 + dt * k2[1])
        if not (np.all(np.isfinite(rho)) and np.all(np.isfinite(u))) \
                or rho.min() <= 0:
            return OneConstituentReport(completed=False, steps=steps,
                                        cross_advection_max=cross_max,
                                        cross_advection_final=cross_final,
                                        final_time=t, rho_min=float(np.nanmin(rho)),
                                        rho_max=float(np.nanmax(rho)))
        t += dt
        steps += 1
    return OneConstituentReport(completed=True, steps=steps,
                                cross_advection_max=cross_max,
                                cross_advection_final=cross_final,
                                final_time=t, rho_min=float(rho.min()),
                                rho_max=float(rho.max()))

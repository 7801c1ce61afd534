"""Mass-Lagrangian solver on (0, d) and the Eulerian <-> Lagrangian maps.

The mass coordinate is built from the *total* density, y(x) = int_0^x rho,
which maps the unit interval onto (0, d) with d the total initial mass.  In
these variables the continuity equations are local ODEs and concentrations
rho_i / rho are pointwise invariants, so constituent masses are conserved to
round-off by construction.
"""
from __future__ import annotations

from dataclasses import replace
from typing import Optional

import numpy as np
from numba import njit
from scipy.interpolate import CubicSpline, PchipInterpolator

from . import core, integrals
from .core import FieldState, Grid1D, Parameters
from .errors import BlowUpError, PositivityError
from .eulerian import (EulerianSolverConfig, Trajectory, _INTEGRATORS,
                       SSP_RK3, _jitted, snapshot_times)


def total_mass(state: FieldState) -> float:
    """The Lagrangian domain width d (equals the total Eulerian mass)."""
    if state.grid.coordinate_kind != core.LAGRANGIAN_Y:
        raise ValueError("state is not in Lagrangian coordinates")
    return state.grid.length


def _extend_to_walls(values: np.ndarray, wall_left=None, wall_right=None):
    """Append wall values to cell-centered samples (second-order extrapolation
    when no boundary value is prescribed)."""
    v = np.asarray(values, dtype=float)
    left = ((15.0 * v[..., 0] - 10.0 * v[..., 1] + 3.0 * v[..., 2]) / 8.0
            if wall_left is None else wall_left)
    right = ((15.0 * v[..., -1] - 10.0 * v[..., -2] + 3.0 * v[..., -3]) / 8.0
             if wall_right is None else wall_right)
    return np.concatenate([np.atleast_1d(left), v, np.atleast_1d(right)],
                          axis=-1)


def _resample(x_src, values, x_dst, positive=False):
    """Cubic-spline resampling; falls back to the monotone (shape-preserving)
    interpolant if a positivity requirement would be violated."""
    out = CubicSpline(x_src, values)(x_dst)
    if positive and np.any(out <= 0):
        out = PchipInterpolator(x_src, values)(x_dst)
    return out


def unit_length(state: FieldState) -> float:
    """int_0^d dy / rho, the Lagrangian image of the unit spatial domain,
    evaluated with the spline-antiderivative rule used by the maps."""
    grid = state.grid
    y_ext = np.concatenate([[0.0], grid.points, [grid.length]])
    inv = _extend_to_walls(1.0 / core.total_density(state))
    return float(CubicSpline(y_ext, inv).antiderivative()(grid.length))


def to_lagrangian(state: FieldState) -> FieldState:
    """Transform an Eulerian state to the uniform mass-coordinate grid.

    The coordinate map is the exact antiderivative of a cubic-spline fit of
    the total density, and the result is normalized so the discrete identity
    int_0^d dy / rho = 1 holds exactly in the same rule.
    """
    if state.grid.coordinate_kind != core.EULERIAN_X:
        raise ValueError("state is already in Lagrangian coordinates")
    grid = state.grid
    x_ext = np.concatenate([[0.0], grid.points, [grid.length]])
    rho_ext = _extend_to_walls(core.total_density(state))
    ymap = CubicSpline(x_ext, rho_ext).antiderivative()
    y_ext = ymap(x_ext)
    if np.any(np.diff(y_ext) <= 0):
        raise ValueError("mass coordinate is not monotone (corrupted input)")
    d = float(y_ext[-1])

    lgrid = Grid1D(cell_count=grid.cell_count, length=d,
                   coordinate_kind=core.LAGRANGIAN_Y)
    yc = lgrid.points
    rho_l = np.stack([
        _resample(y_ext, _extend_to_walls(state.densities[i]), yc,
                  positive=True)
        for i in range(state.n_constituents)])
    u_l = np.stack([
        _resample(y_ext, _extend_to_walls(state.velocities[i], 0.0, 0.0), yc)
        for i in range(state.n_constituents)])

    out = FieldState(time=state.time, grid=lgrid,
                     densities=rho_l, velocities=u_l)
    out = FieldState(time=state.time, grid=lgrid,
                     densities=rho_l * unit_length(out), velocities=u_l)
    return out


def to_eulerian(state: FieldState) -> FieldState:
    """Invert the mass-coordinate map back to the uniform unit grid.

    x(d) should be 1; deviations are renormalized away (and reported through
    the returned state only implicitly), deviations beyond 1e-4 raise a
    mass-inconsistency error.
    """
    if state.grid.coordinate_kind != core.LAGRANGIAN_Y:
        raise ValueError("state is already in Eulerian coordinates")
    grid = state.grid
    y_ext = np.concatenate([[0.0], grid.points, [grid.length]])
    inv_ext = _extend_to_walls(1.0 / core.total_density(state))
    xmap = CubicSpline(y_ext, inv_ext).antiderivative()
    x_ext = xmap(y_ext)
    x_end = float(x_ext[-1])
    if abs(x_end - 1.0) > 1e-4:
        raise ValueError(
            f"mass inconsistency: x(d) = {x_end:.8g}, expected 1")
    x_ext = x_ext / x_end

    egrid = Grid1D(cell_count=grid.cell_count, length=1.0,
                   coordinate_kind=core.EULERIAN_X)
    xc = egrid.points
    rho_e = np.stack([
        _resample(x_ext, _extend_to_walls(state.densities[i]), xc,
                  positive=True)
        for i in range(state.n_constituents)])
    u_e = np.stack([
        _resample(x_ext, _extend_to_walls(state.velocities[i], 0.0, 0.0), xc)
        for i in range(state.n_constituents)])
    return FieldState(time=state.time, grid=egrid,
                      densities=rho_e, velocities=u_e)


def eulerian_positions(state: FieldState) -> np.ndarray:
    """x(y) at the Lagrangian cell centers (midpoint-accumulated)."""
    h = state.grid.h
    inv = 1.0 / core.total_density(state)
    return np.cumsum(h * inv) - 0.5 * h * inv


# ---------------------------------------------------------------------------
# jitted kernels


@njit(cache=True)
def _lag_rhs_kernel(rho, u, K, gamma, Mv, h, drho, du):
    N, Mc = rho.shape
    rho_tot = np.zeros(Mc)
    v = np.zeros(Mc)
    for k in range(Mc):
        s = 0.0
        sv = 0.0
        for i in range(N):
            s += rho[i, k]
            sv += u[i, k]
        rho_tot[k] = s
        v[k] = sv / N

    # dv/dy with reflected ghosts: the midpoint sum of this stencil
    # telescopes to zero, which is what conserves the unit spatial length
    dv = np.empty(Mc)
    for k in range(1, Mc - 1):
        dv[k] = (v[k + 1] - v[k - 1]) / (2.0 * h)
    dv[0] = (v[1] + v[0]) / (2.0 * h)
    dv[Mc - 1] = (-v[Mc - 1] - v[Mc - 2]) / (2.0 * h)

    for i in range(N):
        for k in range(Mc):
            drho[i, k] = -rho_tot[k] * rho[i, k] * dv[k]

    g = np.empty(Mc)
    for k in range(Mc):
        g[k] = rho_tot[k] ** gamma
    gp = np.empty(Mc)
    for k in range(1, Mc - 1):
        gp[k] = (g[k + 1] - g[k - 1]) / (2.0 * h)
    gp[0] = (-3.0 * g[0] + 4.0 * g[1] - g[2]) / (2.0 * h)
    gp[Mc - 1] = (3.0 * g[Mc - 1] - 4.0 * g[Mc - 2] + g[Mc - 3]) / (2.0 * h)

    # conservative viscous fluxes (rho u')_{k+1/2}; wall fluxes use the
    # quadratic one-sided derivative anchored at u(wall) = 0
    rho_wl = max(1.5 * rho_tot[0] - 0.5 * rho_tot[1], 0.5 * rho_tot[0])
    rho_wr = max(1.5 * rho_tot[Mc - 1] - 0.5 * rho_tot[Mc - 2],
                 0.5 * rho_tot[Mc - 1])
    G = np.empty((N, Mc + 1))
    for j in range(N):
        G[j, 0] = rho_wl * (9.0 * u[j, 0] - u[j, 1]) / (3.0 * h)
        G[j, Mc] = -rho_wr * (9.0 * u[j, Mc - 1] - u[j, Mc - 2]) / (3.0 * h)
        for m in range(1, Mc):
            G[j, m] = 0.5 * (rho_tot[m - 1] + rho_tot[m]) \
                * (u[j, m] - u[j, m - 1]) / h

    for i in range(N):
        for k in range(Mc):
            visc = 0.0
            for j in range(N):
                visc += Mv[i, j] * (G[j, k + 1] - G[j, k]) / h
            du[i, k] = rho_tot[k] / rho[i, k] * (visc - K * gp[k])


@njit(cache=True)
def _lag_stable_dt_kernel(rho, lam_max, h, cfl):
    N, Mc = rho.shape
    xi_min = 1.0
    rmax = rho[0, 0]
    for k in range(Mc):
        s = 0.0
        for i in range(N):
            s += rho[i, k]
        if s > rmax:
            rmax = s
        for i in range(N):
            xi = rho[i, k] / s
            if xi < xi_min:
                xi_min = xi
    return cfl * h * h * xi_min / (2.0 * lam_max * rmax)


@njit(cache=True)
def _lag_advance_kernel(rho, u, t0, t_end, K, gamma, Mv, lam_max, h, cfl,
                        floor, integrator, dt_override):
    N, Mc = rho.shape
    dr = np.empty((N, Mc))
    duv = np.empty((N, Mc))
    r1 = np.empty((N, Mc))
    u1 = np.empty((N, Mc))
    r2 = np.empty((N, Mc))
    u2 = np.empty((N, Mc))
    dr2 = np.empty((N, Mc))
    du2 = np.empty((N, Mc))
    dr3 = np.empty((N, Mc))
    du3 = np.empty((N, Mc))
    dr4 = np.empty((N, Mc))
    du4 = np.empty((N, Mc))

    t = t0
    steps = 0
    tol = 1e-13 * max(1.0, abs(t_end))
    while t < t_end - tol:
        if dt_override > 0.0:
            dt = dt_override
        else:
            dt = _lag_stable_dt_kernel(rho, lam_max, h, cfl)
        if t + dt > t_end:
            dt = t_end - t

        if integrator == SSP_RK3:
            _lag_rhs_kernel(rho, u, K, gamma, Mv, h, dr, duv)
            for i in range(N):
                for k in range(Mc):
                    r1[i, k] = rho[i, k] + dt * dr[i, k]
                    u1[i, k] = u[i, k] + dt * duv[i, k]
            if r1.min() <= floor:
                return 3, t, steps
            _lag_rhs_kernel(r1, u1, K, gamma, Mv, h, dr2, du2)
            for i in range(N):
                for k in range(Mc):
                    r2[i, k] = 0.75 * rho[i, k] + 0.25 * (r1[i, k] + dt * dr2[i, k])
                    u2[i, k] = 0.75 * u[i, k] + 0.25 * (u1[i, k] + dt * du2[i, k])
            if r2.min() <= floor:
                return 3, t, steps
            _lag_rhs_kernel(r2, u2, K, gamma, Mv, h, dr3, du3)
            for i in range(N):
                for k in range(Mc):
                    rho[i, k] = (rho[i, k] + 2.0 * (r2[i, k] + dt * dr3[i, k])) / 3.0
                    u[i, k] = (u[i, k] + 2.0 * (u2[i, k] + dt * du3[i, k])) / 3.0
        else:
            _lag_rhs_kernel(rho, u, K, gamma, Mv, h, dr, duv)
            for i in range(N):
                for k in range(Mc):
                    r1[i, k] = rho[i, k] + 0.5 * dt * dr[i, k]
                    u1[i, k] = u[i, k] + 0.5 * dt * duv[i, k]
            if r1.min() <= floor:
                return 3, t, steps
            _lag_rhs_kernel(r1, u1, K, gamma, Mv, h, dr2, du2)
            for i in range(N):
                for k in range(Mc):
                    r2[i, k] = rho[i, k] + 0.5 * dt * dr2[i, k]
                    u2[i, k] = u[i, k] + 0.5 * dt * du2[i, k]
            if r2.min() <= floor:
                return 3, t, steps
            _lag_rhs_kernel(r2, u2, K, gamma, Mv, h, dr3, du3)
            for i in range(N):
                for k in range(Mc):
                    r1[i, k] = rho[i, k] + dt * dr3[i, k]
                    u1[i, k] = u[i, k] + dt * du3[i, k]
            if r1.min() <= floor:
                return 3, t, steps
            _lag_rhs_kernel(r1, u1, K, gamma, Mv, h, dr4, du4)
            c = dt / 6.0
            for i in range(N):
                for k in range(Mc):
                    rho[i, k] += c * (dr[i, k] + 2.0 * dr2[i, k]
                                      + 2.0 * dr3[i, k] + dr4[i, k])
                    u[i, k] += c * (duv[i, k] + 2.0 * du2[i, k]
                                    + 2.0 * du3[i, k] + du4[i, k])

        t += dt
        steps += 1
        if rho.min() <= floor:
            return 3, t, steps
        ok = True
        for i in range(N):
            for k in range(Mc):
                if not (np.isfinite(rho[i, k]) and np.isfinite(u[i, k])):
                    ok = False
        if not ok:
            return 4, t, steps
    return 0, t, steps


@njit(cache=True)
def _positions_kernel(rho, h):
    """x(y) at cell centers, midpoint-accumulated from the total density."""
    N, Mc = rho.shape
    pos = np.empty(Mc)
    acc = 0.0
    for k in range(Mc):
        s = 0.0
        for i in range(N):
            s += rho[i, k]
        step = h / s
        pos[k] = acc + 0.5 * step
        acc += step
    return pos


@njit(cache=False)
def _lag_forced_advance_kernel(rho, u, t0, t_end, K, gamma, Mv, lam_max, h,
                               cfl, floor, dt_override, ffunc):
    """SSP-RK3 advance with a jitted Eulerian-coordinate forcing callback;
    positions x(y) are rebuilt from the stage densities."""
    N, Mc = rho.shape
    dr = np.empty((N, Mc))
    duv = np.empty((N, Mc))
    r1 = np.empty((N, Mc))
    u1 = np.empty((N, Mc))
    r2 = np.empty((N, Mc))
    u2 = np.empty((N, Mc))
    dr2 = np.empty((N, Mc))
    du2 = np.empty((N, Mc))
    dr3 = np.empty((N, Mc))
    du3 = np.empty((N, Mc))

    t = t0
    steps = 0
    tol = 1e-13 * max(1.0, abs(t_end))
    while t < t_end - tol:
        if dt_override > 0.0:
            dt = dt_override
        else:
            dt = _lag_stable_dt_kernel(rho, lam_max, h, cfl)
        if t + dt > t_end:
            dt = t_end - t

        _lag_rhs_kernel(rho, u, K, gamma, Mv, h, dr, duv)
        duv += ffunc(_positions_kernel(rho, h), t)
        for i in range(N):
            for k in range(Mc):
                r1[i, k] = rho[i, k] + dt * dr[i, k]
                u1[i, k] = u[i, k] + dt * duv[i, k]
        if r1.min() <= floor:
            return 3, t, steps
        _lag_rhs_kernel(r1, u1, K, gamma, Mv, h, dr2, du2)
        du2 += ffunc(_positions_kernel(r1, h), t + dt)
        for i in range(N):
            for k in range(Mc):
                r2[i, k] = 0.75 * rho[i, k] + 0.25 * (r1[i, k] + dt * dr2[i, k])
                u2[i, k] = 0.75 * u[i, k] + 0.25 * (u1[i, k] + dt * du2[i, k])
        if r2.min() <= floor:
            return 3, t, steps
        _lag_rhs_kernel(r2, u2, K, gamma, Mv, h, dr3, du3)
        du3 += ffunc(_positions_kernel(r2, h), t + 0.5 * dt)
        for i in range(N):
            for k in range(Mc):
                rho[i, k] = (rho[i, k] + 2.0 * (r2[i, k] + dt * dr3[i, k])) / 3.0
                u[i, k] = (u[i, k] + 2.0 * (u2[i, k] + dt * du3[i, k])) / 3.0

        t += dt
        steps += 1
        if rho.min() <= floor:
            return 3, t, steps
        ok = True
        for i in range(N):
            for k in range(Mc):
                if not (np.isfinite(rho[i, k]) and np.isfinite(u[i, k])):
                    ok = False
        if not ok:
            return 4, t, steps
    return 0, t, steps


# ---------------------------------------------------------------------------
# public API


def lagrangian_rhs(state: FieldState, params: Parameters,
                   cfg: Optional[EulerianSolverConfig] = None):
    """Time derivatives of the mass-coordinate system."""
    cfg = cfg or EulerianSolverConfig()
    if state.densities.min() <= cfg.density_floor:
        raise PositivityError("density at or below floor", time=state.time)
    drho = np.empty_like(state.densities)
    du = np.empty_like(state.velocities)
    _lag_rhs_kernel(state.densities, state.velocities, params.pressure_coeff,
                    params.adiabatic_index, params.viscosity, state.grid.h,
                    drho, du)
    if params.forcing is not None:
        du += params.forcing(eulerian_positions(state), state.time)
    return drho, du


def lagrangian_stable_dt(state: FieldState, params: Parameters,
                         cfg: Optional[EulerianSolverConfig] = None) -> float:
    cfg = cfg or EulerianSolverConfig()
    return float(_lag_stable_dt_kernel(state.densities, params.lambda_max,
                                       state.grid.h, cfg.cfl))


def lagrangian_step(state: FieldState, dt: float, params: Parameters,
                    cfg: Optional[EulerianSolverConfig] = None) -> FieldState:
    """One explicit step (forcing-capable slow path; see eulerian.step)."""
    cfg = cfg or EulerianSolverConfig()
    rho, u, t = state.densities, state.velocities, state.time

    def f(r, w, tau):
        s = FieldState(time=tau, grid=state.grid, densities=r, velocities=w)
        return lagrangian_rhs(s, params, cfg)

    def check(r, tau):
        if r.min() <= cfg.density_floor:
            raise PositivityError("density at or below floor during stage",
                                  time=tau)

    if cfg.time_integrator == "ssp_rk3":
        dr, du = f(rho, u, t)
        r1, u1 = rho + dt * dr, u + dt * du
        check(r1, t)
        dr2, du2 = f(r1, u1, t + dt)
        r2 = 0.75 * rho + 0.25 * (r1 + dt * dr2)
        u2 = 0.75 * u + 0.25 * (u1 + dt * du2)
        check(r2, t)
        dr3, du3 = f(r2, u2, t + 0.5 * dt)
        rn = (rho + 2.0 * (r2 + dt * dr3)) / 3.0
        un = (u + 2.0 * (u2 + dt * du3)) / 3.0
    else:
        k1 = f(rho, u, t)
        k2 = f(rho + 0.5 * dt * k1[0], u + 0.5 * dt * k1[1], t + 0.5 * dt)
        k3 = f(rho + 0.5 * dt * k2[0], u + 0.5 * dt * k2[1], t + 0.5 * dt)
        k4 = f(rho + dt * k3[0], u + dt * k3[1], t + dt)
        rn = rho + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        un = u + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    check(rn, t + dt)
    if not (np.all(np.isfinite(rn)) and np.all(np.isfinite(un))):
        raise BlowUpError("non-finite field values", time=t + dt)
    return FieldState(time=t + dt, grid=state.grid, densities=rn,
                      velocities=un)


def run_lagrangian(initial: FieldState, params: Parameters,
                   cfg: Optional[EulerianSolverConfig] = None,
                   horizon: Optional[float] = None,
                   dt_override: Optional[float] = None) -> Trajectory:
    """Integrate the mass-coordinate system; mirrors eulerian.run."""
    cfg = cfg or EulerianSolverConfig()
    if initial.grid.coordinate_kind != core.LAGRANGIAN_Y:
        initial = to_lagrangian(initial)
    horizon = params.horizon if horizon is None else horizon
    times = snapshot_times(horizon, cfg.snapshot_interval)
    states = [initial]
    monitors = {}
    _append(monitors, initial, params)

    fast = params.forcing is None or (
        _jitted(params.forcing) and cfg.time_integrator == "ssp_rk3")
    if fast:
        rho = initial.densities.copy()
        u = initial.velocities.copy()
        t = initial.time
        for t_next in times[1:]:
            if params.forcing is None:
                status, t, _ = _lag_advance_kernel(
                    rho, u, t, t_next, params.pressure_coeff,
                    params.adiabatic_index, params.viscosity,
                    params.lambda_max, initial.grid.h, cfg.cfl,
                    cfg.density_floor, _INTEGRATORS[cfg.time_integrator],
                    0.0 if dt_override is None else float(dt_override))
            else:
                status, t, _ = _lag_forced_advance_kernel(
                    rho, u, t, t_next, params.pressure_coeff,
                    params.adiabatic_index, params.viscosity,
                    params.lambda_max, initial.grid.h, cfg.cfl,
                    cfg.density_floor,
                    0.0 if dt_override is None else float(dt_override),
                    params.forcing)
            if status == 3:
                raise PositivityError(
                    f"density positivity lost at t={t:.6g}", time=t)
            if status == 4:
                raise BlowUpError(f"solution blew up at t={t:.6g}", time=t)
            snap = FieldState(time=t_next, grid=initial.grid,
                              densities=rho.copy(), velocities=u.copy())
            states.append(snap)
            _append(monitors, snap, params)
    else:
        state = initial
        for t_next in times[1:]:
            while state.time < t_next - 1e-13 * max(1.0, horizon):
                dt = (lagrangian_stable_dt(state, params, cfg)
                      if dt_override is None else dt_override)
                dt = min(dt, t_next - state.time)
                state = lagrangian_step(state, dt, params, cfg)
            states.append(state)
            _append(monitors, state, params)

    return Trajectory(states=states,
                      monitors={k: np.array(v) for k, v in monitors.items()},
                      metadata={"backend": "lagrangian",
                                "coordinate_kind": core.LAGRANGIAN_Y,
                                "cells": initial.grid.cell_count,
                                "total_mass": initial.grid.length})


def _append(monitors: dict, state: FieldState, params: Parameters):
    mon = integrals.basic_monitors(state, params)
    monitors.setdefault("t", []).append(state.time)
    monitors.setdefault("energy", []).append(mon["energy"])
    monitors.setdefault("dissipation", []).append(mon["dissipation"])
    monitors.setdefault("rho_min", []).append(mon["rho_min"])
    monitors.setdefault("rho_max", []).append(mon["rho_max"])
    monitors.setdefault("unit_length", []).append(unit_length(state))
    for i, m in enumerate(mon["masses"]):
        monitors.setdefault(f"mass_{i + 1}", []).append(float(m))

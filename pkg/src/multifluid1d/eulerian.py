"""Finite-volume method-of-lines solver for the mixture system on (0, 1).

Continuity is advanced in conservative flux form (upwind face flux, zero
wall flux) so per-constituent mass is conserved to round-off; momentum is
kept in the nonconservative form of the governing system, with central
second-order differences and a three-point Laplacian that honors the no-slip
walls through reflected ghost values.  Explicit SSP-RK3 (default) or RK4
time stepping; the hot loop is jitted with numba.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from numba import njit

from . import core, integrals
from .core import FieldState, Grid1D, Parameters
from .errors import BlowUpError, PositivityError

SSP_RK3 = 0
RK4 = 1
_INTEGRATORS = {"ssp_rk3": SSP_RK3, "rk4": RK4}

EPS_V = 1e-12


@dataclass(frozen=True)
class EulerianSolverConfig:
    cfl: float = 0.4
    density_floor: float = 1e-10
    time_integrator: str = "ssp_rk3"
    snapshot_interval: float = 0.01
    density_flux_order: int = 1  # 1: donor cell, 2: upwind-biased linear

    def __post_init__(self):
        if not 0.0 < self.cfl <= 1.0:
            raise ValueError("cfl must lie in (0, 1]")
        if not self.density_floor > 0:
            raise ValueError("density_floor must be positive")
        if self.time_integrator not in _INTEGRATORS:
            raise ValueError(f"unknown time_integrator {self.time_integrator!r}")
        if self.density_flux_order not in (1, 2):
            raise ValueError("density_flux_order must be 1 or 2")


@dataclass
class Trajectory:
    """Snapshots plus scalar monitor series produced by any backend."""

    states: List[FieldState]
    monitors: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.states])

    @property
    def coordinate_kind(self) -> str:
        return self.states[0].grid.coordinate_kind


# ---------------------------------------------------------------------------
# jitted kernels


@njit(cache=True)
def _rhs_kernel(rho, u, K, gamma, Mv, h, recon, drho, du):
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

    # gradient of rho^gamma: central inside, one-sided second order at ends
    g = np.empty(Mc)
    for k in range(Mc):
        g[k] = rho_tot[k] ** gamma
    gp = np.empty(Mc)
    for k in range(1, Mc - 1):
        gp[k] = (g[k + 1] - g[k - 1]) / (2.0 * h)
    gp[0] = (-3.0 * g[0] + 4.0 * g[1] - g[2]) / (2.0 * h)
    gp[Mc - 1] = (3.0 * g[Mc - 1] - 4.0 * g[Mc - 2] + g[Mc - 3]) / (2.0 * h)

    # conservative upwind continuity fluxes; wall fluxes are exactly zero
    F = np.zeros(Mc + 1)
    for i in range(N):
        for j in range(1, Mc):
            vf = 0.5 * (v[j - 1] + v[j])
            if vf >= 0.0:
                kup = j - 1
                rf = rho[i, kup]
                if recon == 2:
                    if kup == 0:
                        rf += 0.5 * (rho[i, 1] - rho[i, 0])
                    else:
                        rf += 0.25 * (rho[i, kup + 1] - rho[i, kup - 1])
            else:
                kup = j
                rf = rho[i, kup]
                if recon == 2:
                    if kup == Mc - 1:
                        rf -= 0.5 * (rho[i, Mc - 1] - rho[i, Mc - 2])
                    else:
                        rf -= 0.25 * (rho[i, kup + 1] - rho[i, kup - 1])
            F[j] = rf * vf
        for k in range(Mc):
            drho[i, k] = -(F[k + 1] - F[k]) / h

    # velocity Laplacians with reflected ghosts (u = 0 on the walls)
    lap = np.empty((N, Mc))
    h2 = h * h
    for j in range(N):
        for k in range(1, Mc - 1):
            lap[j, k] = (u[j, k + 1] - 2.0 * u[j, k] + u[j, k - 1]) / h2
        lap[j, 0] = (u[j, 1] - 3.0 * u[j, 0]) / h2
        lap[j, Mc - 1] = (u[j, Mc - 2] - 3.0 * u[j, Mc - 1]) / h2

    for i in range(N):
        for k in range(Mc):
            up1 = u[i, k + 1] if k < Mc - 1 else -u[i, Mc - 1]
            um1 = u[i, k - 1] if k > 0 else -u[i, 0]
            dux = (up1 - um1) / (2.0 * h)
            visc = 0.0
            for j in range(N):
                visc += Mv[i, j] * lap[j, k]
            du[i, k] = -v[k] * dux + (visc - K * gp[k]) / rho[i, k]


@njit(cache=True)
def _stable_dt_kernel(rho, u, lam_max, h, cfl):
    N, Mc = rho.shape
    vmax = EPS_V
    rmin = rho[0, 0]
    for k in range(Mc):
        s = 0.0
        for i in range(N):
            s += u[i, k]
            if rho[i, k] < rmin:
                rmin = rho[i, k]
        av = abs(s) / N
        if av > vmax:
            vmax = av
    dt_adv = h / vmax
    dt_visc = h * h * rmin / (2.0 * lam_max)
    return cfl * min(dt_adv, dt_visc)


@njit(cache=True)
def _advance_kernel(rho, u, t0, t_end, K, gamma, Mv, lam_max, h, cfl,
                    floor, integrator, recon, dt_override):
    """Integrate in place from t0 to t_end.  Returns (status, t, steps):
    status 0 = ok, 3 = positivity loss, 4 = non-finite values."""
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
            dt = _stable_dt_kernel(rho, u, lam_max, h, cfl)
        if t + dt > t_end:
            dt = t_end - t

        if integrator == SSP_RK3:
            _rhs_kernel(rho, u, K, gamma, Mv, h, recon, dr, duv)
            for i in range(N):
                for k in range(Mc):
                    r1[i, k] = rho[i, k] + dt * dr[i, k]
                    u1[i, k] = u[i, k] + dt * duv[i, k]
            if r1.min() <= floor:
                return 3, t, steps
            _rhs_kernel(r1, u1, K, gamma, Mv, h, recon, dr2, du2)
            for i in range(N):
                for k in range(Mc):
                    r2[i, k] = 0.75 * rho[i, k] + 0.25 * (r1[i, k] + dt * dr2[i, k])
                    u2[i, k] = 0.75 * u[i, k] + 0.25 * (u1[i, k] + dt * du2[i, k])
            if r2.min() <= floor:
                return 3, t, steps
            _rhs_kernel(r2, u2, K, gamma, Mv, h, recon, dr3, du3)
            for i in range(N):
                for k in range(Mc):
                    rho[i, k] = (rho[i, k] + 2.0 * (r2[i, k] + dt * dr3[i, k])) / 3.0
                    u[i, k] = (u[i, k] + 2.0 * (u2[i, k] + dt * du3[i, k])) / 3.0
        else:  # RK4
            _rhs_kernel(rho, u, K, gamma, Mv, h, recon, dr, duv)
            for i in range(N):
                for k in range(Mc):
                    r1[i, k] = rho[i, k] + 0.5 * dt * dr[i, k]
                    u1[i, k] = u[i, k] + 0.5 * dt * duv[i, k]
            if r1.min() <= floor:
                return 3, t, steps
            _rhs_kernel(r1, u1, K, gamma, Mv, h, recon, dr2, du2)
            for i in range(N):
                for k in range(Mc):
                    r2[i, k] = rho[i, k] + 0.5 * dt * dr2[i, k]
                    u2[i, k] = u[i, k] + 0.5 * dt * du2[i, k]
            if r2.min() <= floor:
                return 3, t, steps
            _rhs_kernel(r2, u2, K, gamma, Mv, h, recon, dr3, du3)
            for i in range(N):
                for k in range(Mc):
                    r1[i, k] = rho[i, k] + dt * dr3[i, k]
                    u1[i, k] = u[i, k] + dt * du3[i, k]
            if r1.min() <= floor:
                return 3, t, steps
            _rhs_kernel(r1, u1, K, gamma, Mv, h, recon, dr4, du4)
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


@njit(cache=False)
def _forced_advance_kernel(rho, u, pts, t0, t_end, K, gamma, Mv, lam_max, h,
                           cfl, floor, recon, dt_override, ffunc):
    """SSP-RK3 advance with a jitted forcing callback f(x, t) -> (N, Mc)."""
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
            dt = _stable_dt_kernel(rho, u, lam_max, h, cfl)
        if t + dt > t_end:
            dt = t_end - t

        _rhs_kernel(rho, u, K, gamma, Mv, h, recon, dr, duv)
        duv += ffunc(pts, t)
        for i in range(N):
            for k in range(Mc):
                r1[i, k] = rho[i, k] + dt * dr[i, k]
                u1[i, k] = u[i, k] + dt * duv[i, k]
        if r1.min() <= floor:
            return 3, t, steps
        _rhs_kernel(r1, u1, K, gamma, Mv, h, recon, dr2, du2)
        du2 += ffunc(pts, t + dt)
        for i in range(N):
            for k in range(Mc):
                r2[i, k] = 0.75 * rho[i, k] + 0.25 * (r1[i, k] + dt * dr2[i, k])
                u2[i, k] = 0.75 * u[i, k] + 0.25 * (u1[i, k] + dt * du2[i, k])
        if r2.min() <= floor:
            return 3, t, steps
        _rhs_kernel(r2, u2, K, gamma, Mv, h, recon, dr3, du3)
        du3 += ffunc(pts, t + 0.5 * dt)
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


def _jitted(fn) -> bool:
    """True when fn is a numba dispatcher usable inside jitted loops."""
    return fn is not None and hasattr(fn, "py_func")


# ---------------------------------------------------------------------------
# public API


def rhs(state: FieldState, params: Parameters,
        cfg: Optional[EulerianSolverConfig] = None):
    """Semi-discrete time derivatives (drho_i/dt, du_i/dt) of the state."""
    cfg = cfg or EulerianSolverConfig()
    if state.densities.min() <= cfg.density_floor:
        raise PositivityError("density at or below floor", time=state.time)
    drho = np.empty_like(state.densities)
    du = np.empty_like(state.velocities)
    _rhs_kernel(state.densities, state.velocities, params.pressure_coeff,
                params.adiabatic_index, params.viscosity, state.grid.h,
                cfg.density_flux_order, drho, du)
    if params.forcing is not None:
        du += params.forcing(state.grid.points, state.time)
    return drho, du


def stable_dt(state: FieldState, params: Parameters,
              cfg: Optional[EulerianSolverConfig] = None) -> float:
    """cfl * min(advective, viscous) explicit step bound."""
    cfg = cfg or EulerianSolverConfig()
    return float(_stable_dt_kernel(state.densities, state.velocities,
                                   params.lambda_max, state.grid.h, cfg.cfl))


def reconstructed_wall_velocity(state: FieldState) -> np.ndarray:
    """Wall values implied by the ghost-reflection convention: (N, 2) zeros."""
    u = state.velocities
    return np.stack([(u[:, 0] + (-u[:, 0])) / 2.0,
                     (u[:, -1] + (-u[:, -1])) / 2.0], axis=1)


def _stage_add(rho, u, dt, deriv):
    drho, du = deriv
    return rho + dt * drho, u + dt * du


def step(state: FieldState, dt: float, params: Parameters,
         cfg: Optional[EulerianSolverConfig] = None) -> FieldState:
    """One explicit step; supports forcing (used by tests and MMS runs).

    The no-forcing fast path in :func:`run` applies the same stencils and
    stage arithmetic inside a jitted loop.
    """
    cfg = cfg or EulerianSolverConfig()
    rho, u, t = state.densities, state.velocities, state.time

    def f(r, w, tau):
        s = FieldState(time=tau, grid=state.grid, densities=r, velocities=w)
        return rhs(s, params, cfg)

    def check(r, tau):
        if r.min() <= cfg.density_floor:
            raise PositivityError("density at or below floor during stage",
                                  time=tau)

    if cfg.time_integrator == "ssp_rk3":
        r1, u1 = _stage_add(rho, u, dt, f(rho, u, t))
        check(r1, t)
        r2b, u2b = _stage_add(r1, u1, dt, f(r1, u1, t + dt))
        r2 = 0.75 * rho + 0.25 * r2b
        u2 = 0.75 * u + 0.25 * u2b
        check(r2, t)
        r3b, u3b = _stage_add(r2, u2, dt, f(r2, u2, t + 0.5 * dt))
        rn = (rho + 2.0 * r3b) / 3.0
        un = (u + 2.0 * u3b) / 3.0
    else:
        k1 = f(rho, u, t)
        r1, u1 = _stage_add(rho, u, 0.5 * dt, k1)
        check(r1, t)
        k2 = f(r1, u1, t + 0.5 * dt)
        r2, u2 = _stage_add(rho, u, 0.5 * dt, k2)
        check(r2, t)
        k3 = f(r2, u2, t + 0.5 * dt)
        r3, u3 = _stage_add(rho, u, dt, k3)
        check(r3, t)
        k4 = f(r3, u3, t + dt)
        rn = rho + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        un = u + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    check(rn, t + dt)
    if not (np.all(np.isfinite(rn)) and np.all(np.isfinite(un))):
        raise BlowUpError("non-finite field values", time=t + dt)
    return FieldState(time=t + dt, grid=state.grid, densities=rn, velocities=un)


def snapshot_times(horizon: float, interval: float) -> np.ndarray:
    if horizon <= 0:
        return np.array([0.0])
    n = max(1, int(round(horizon / interval)))
    return np.linspace(0.0, horizon, n + 1)


def run(initial: FieldState, params: Parameters,
        cfg: Optional[EulerianSolverConfig] = None,
        horizon: Optional[float] = None,
        dt_override: Optional[float] = None) -> Trajectory:
    """Integrate from the initial state to the horizon, emitting snapshots.

    Terminates with PositivityError / BlowUpError (carrying the offending
    time) instead of clipping, so a failed run never corrupts the ledger.
    """
    cfg = cfg or EulerianSolverConfig()
    horizon = params.horizon if horizon is None else horizon
    times = snapshot_times(horizon, cfg.snapshot_interval)
    states = [initial]
    _append_monitors(monitors := {}, initial, params)

    fast = params.forcing is None or (
        _jitted(params.forcing) and cfg.time_integrator == "ssp_rk3")
    if fast:
        rho = initial.densities.copy()
        u = initial.velocities.copy()
        t = initial.time
        for t_next in times[1:]:
            if params.forcing is None:
                status, t, _ = _advance_kernel(
                    rho, u, t, t_next, params.pressure_coeff,
                    params.adiabatic_index, params.viscosity,
                    params.lambda_max, initial.grid.h, cfg.cfl,
                    cfg.density_floor, _INTEGRATORS[cfg.time_integrator],
                    cfg.density_flux_order,
                    0.0 if dt_override is None else float(dt_override))
            else:
                status, t, _ = _forced_advance_kernel(
                    rho, u, initial.grid.points, t, t_next,
                    params.pressure_coeff, params.adiabatic_index,
                    params.viscosity, params.lambda_max, initial.grid.h,
                    cfg.cfl, cfg.density_floor, cfg.density_flux_order,
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
            _append_monitors(monitors, snap, params)
    else:
        state = initial
        for t_next in times[1:]:
            while state.time < t_next - 1e-13 * max(1.0, horizon):
                dt = (stable_dt(state, params, cfg) if dt_override is None
                      else dt_override)
                dt = min(dt, t_next - state.time)
                state = step(state, dt, params, cfg)
            state = FieldState(time=t_next, grid=state.grid,
                               densities=state.densities,
                               velocities=state.velocities)
            states.append(state)
            _append_monitors(monitors, state, params)

    traj = Trajectory(states=states,
                      monitors={k: np.array(v) for k, v in monitors.items()},
                      metadata={"backend": "eulerian",
                                "coordinate_kind": initial.grid.coordinate_kind,
                                "cells": initial.grid.cell_count})
    return traj


def _append_monitors(monitors: dict, state: FieldState, params: Parameters):
    mon = integrals.basic_monitors(state, params)
    monitors.setdefault("t", []).append(state.time)
    monitors.setdefault("energy", []).append(mon["energy"])
    monitors.setdefault("dissipation", []).append(mon["dissipation"])
    monitors.setdefault("rho_min", []).append(mon["rho_min"])
    monitors.setdefault("rho_max", []).append(mon["rho_max"])
    for i, m in enumerate(mon["masses"]):
        monitors.setdefault(f"mass_{i + 1}", []).append(float(m))

"""Spectral Galerkin solver on the Dirichlet sine basis.

Velocities are expanded as u_i = sum_k c_ik sin(k pi x), so the no-slip
boundary conditions hold exactly by construction.  Densities are carried as
point values on the (composite-Simpson) quadrature grid and transported in
conservative flux form with the analytically reconstructed velocity, which
makes the trapezoid mass of each constituent exact to round-off.  Each step
is an implicit-midpoint update solved by damped-free Picard iteration on the
joint (coefficients, densities) variables.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import List, Optional

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

from . import core, integrals
from .core import FieldState, Grid1D, Parameters
from .errors import IterationError, PositivityError
from .eulerian import Trajectory, snapshot_times


@dataclass(frozen=True)
class GalerkinConfig:
    mode_count: int = 16
    quadrature_points: Optional[int] = None  # default 8n+1
    picard_tol: float = 1e-10
    picard_max_iters: int = 50
    dt: Optional[float] = None  # None: follow the stability bound
    cfl: float = 0.4
    snapshot_interval: float = 0.01

    def __post_init__(self):
        if self.mode_count < 1:
            raise ValueError("mode_count must be >= 1")
        q = self.resolved_quadrature
        if q % 2 == 0 or q < 2 * self.mode_count + 1:
            raise ValueError("quadrature_points must be odd and >= 2n+1")
        if not self.picard_tol > 0:
            raise ValueError("picard_tol must be positive")

    @property
    def resolved_quadrature(self) -> int:
        return (8 * self.mode_count + 1 if self.quadrature_points is None
                else self.quadrature_points)


@dataclass(frozen=True)
class ModalState:
    """Velocity coefficients plus densities sampled at the quadrature nodes."""

    time: float
    coefficients: np.ndarray  # (N, n)
    densities: np.ndarray     # (N, Q), > 0

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        rho = np.asarray(self.densities, dtype=float)
        if c.ndim != 2 or rho.ndim != 2 or c.shape[0] != rho.shape[0]:
            raise ValueError("coefficients and densities must be (N, n), (N, Q)")
        if np.any(rho <= 0):
            raise PositivityError("quadrature densities must be positive")
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "densities", rho)


class _Basis:
    """Precomputed sine-basis samples and Simpson weights for (n, Q)."""

    def __init__(self, n: int, q: int):
        self.n, self.q = n, q
        self.x = np.linspace(0.0, 1.0, q)
        self.h = 1.0 / (q - 1)
        k = np.arange(1, n + 1) * np.pi
        self.S = np.sin(np.outer(self.x, k))          # (Q, n)
        self.C = np.cos(np.outer(self.x, k)) * k      # d/dx
        self.S2 = -self.S * k ** 2                    # d2/dx2
        x_half = self.x[:-1] + 0.5 * self.h
        self.S_half = np.sin(np.outer(x_half, k))     # (Q-1, n)
        w = np.full(q, 2.0)
        w[1::2] = 4.0
        w[0] = w[-1] = 1.0
        self.w = w * self.h / 3.0                     # composite Simpson


@lru_cache(maxsize=32)
def _basis(n: int, q: int) -> _Basis:
    return _Basis(n, q)


def project_velocity(u: np.ndarray, n: int) -> np.ndarray:
    """L2 projection onto the first n sine modes: c_k = 2 int u sin(k pi x).

    ``u`` holds samples at the Q quadrature nodes (last axis); the integral
    uses composite Simpson.
    """
    u = np.asarray(u, dtype=float)
    b = _basis(n, u.shape[-1])
    return 2.0 * (u * b.w) @ b.S


def reconstruct_velocity(coefficients: np.ndarray, q: int) -> np.ndarray:
    """Evaluate the sine expansion at the Q quadrature nodes."""
    c = np.asarray(coefficients, dtype=float)
    b = _basis(c.shape[-1], q)
    return c @ b.S.T


def modal_rhs(state: ModalState, params: Parameters,
              cfg: Optional[GalerkinConfig] = None):
    """Galerkin-projected time derivatives (dc/dt, drho/dt).

    Momentum: for each constituent the density-weighted mass system
    A c' = b is assembled with the current rho_i and solved directly.
    Continuity: conservative central flux on the quadrature grid with the
    analytic velocity at face midpoints (zero wall flux).
    """
    n_mode = state.coefficients.shape[1]
    q = state.densities.shape[1]
    b = _basis(n_mode, q)
    rho = state.densities
    rho_tot = rho.sum(axis=0)

    u = state.coefficients @ b.S.T            # (N, Q)
    dxu = state.coefficients @ b.C.T
    dxxu = state.coefficients @ b.S2.T
    v = u.mean(axis=0)

    g = rho_tot ** params.adiabatic_index
    dxg = core.gradient(g, b.h)

    force = (params.forcing(b.x, state.time) if params.forcing is not None
             else 0.0)
    integrand = (-rho * v * dxu
                 - params.pressure_coeff * dxg
                 + params.viscosity @ dxxu
                 + rho * force)
    rhs_vec = (integrand * b.w) @ b.S         # (N, n)

    dc = np.empty_like(state.coefficients)
    for i in range(rho.shape[0]):
        a = (b.S * (b.w * rho[i])[:, None]).T @ b.S
        try:
            dc[i] = np.linalg.solve(a, rhs_vec[i])
        except np.linalg.LinAlgError as exc:
            raise PositivityError(
                "singular weighted mass system (density positivity lost)"
            ) from exc

    # continuity: flux differences, half cells at the walls
    v_half = (state.coefficients @ b.S_half.T).mean(axis=0)  # (Q-1,)
    rho_face = 0.5 * (rho[:, :-1] + rho[:, 1:])
    flux = rho_face * v_half
    drho = np.empty_like(rho)
    drho[:, 1:-1] = -(flux[:, 1:] - flux[:, :-1]) / b.h
    drho[:, 0] = -flux[:, 0] / (0.5 * b.h)
    drho[:, -1] = flux[:, -1] / (0.5 * b.h)
    return dc, drho


def galerkin_stable_dt(state: ModalState, params: Parameters,
                       cfg: GalerkinConfig) -> float:
    """cfl * min(viscous mode bound, quadrature-grid advection bound)."""
    n_mode = state.coefficients.shape[1]
    q = state.densities.shape[1]
    b = _basis(n_mode, q)
    rho_min = float(state.densities.min())
    u = state.coefficients @ b.S.T
    v_max = max(float(np.abs(u.mean(axis=0)).max()), 1e-12)
    dt_visc = 2.0 * rho_min / (params.lambda_max * (n_mode * np.pi) ** 2)
    return cfg.cfl * min(dt_visc, b.h / v_max)


def galerkin_step(state: ModalState, dt: float, params: Parameters,
                  cfg: GalerkinConfig):
    """Implicit-midpoint step by Picard iteration.

    Returns (new_state, iteration_count).  Aborts when the residual grows
    over five consecutive sweeps or the iteration budget is exhausted.
    """
    c0, r0 = state.coefficients, state.densities
    t_mid = state.time + 0.5 * dt
    cm, rm = c0.copy(), r0.copy()
    scale = max(1.0, float(np.abs(c0).max()), float(np.abs(r0).max()))
    prev_res = np.inf
    growth = 0
    for it in range(1, cfg.picard_max_iters + 1):
        mid = ModalState(time=t_mid, coefficients=cm, densities=rm)
        dc, dr = modal_rhs(mid, params, cfg)
        cn = c0 + 0.5 * dt * dc
        rn = r0 + 0.5 * dt * dr
        if np.any(rn <= 0):
            raise PositivityError("density positivity lost in midpoint solve",
                                  time=state.time)
        res = max(float(np.abs(cn - cm).max()),
                  float(np.abs(rn - rm).max())) / scale
        cm, rm = cn, rn
        if res <= cfg.picard_tol:
            break
        growth = growth + 1 if res > prev_res else 0
        if growth >= 5:
            raise IterationError(
                f"Picard iteration diverging at t={state.time:.6g}")
        prev_res = res
    else:
        raise IterationError(
            f"Picard iteration exceeded {cfg.picard_max_iters} sweeps "
            f"at t={state.time:.6g} (residual {res:.3g})")
    new = ModalState(time=state.time + dt,
                     coefficients=2.0 * cm - c0,
                     densities=2.0 * rm - r0)
    if np.any(new.densities <= 0):
        raise PositivityError("density positivity lost after step",
                              time=state.time + dt)
    return new, it


def modal_from_field(state: FieldState, cfg: GalerkinConfig) -> ModalState:
    """Sample a cell-centered state onto the quadrature grid and project."""
    q = cfg.resolved_quadrature
    b = _basis(cfg.mode_count, q)
    if state.grid.node_centered and state.grid.n_values == q:
        rho_q = state.densities.copy()
        u_q = state.velocities.copy()
    else:
        x_ext = np.concatenate([[0.0], state.grid.points, [state.grid.length]])
        rho_q = np.empty((state.n_constituents, q))
        u_q = np.empty((state.n_constituents, q))
        for i in range(state.n_constituents):
            re = np.concatenate([
                [(15 * state.densities[i, 0] - 10 * state.densities[i, 1]
                  + 3 * state.densities[i, 2]) / 8.0],
                state.densities[i],
                [(15 * state.densities[i, -1] - 10 * state.densities[i, -2]
                  + 3 * state.densities[i, -3]) / 8.0]])
            out = CubicSpline(x_ext, re)(b.x)
            if np.any(out <= 0):
                out = PchipInterpolator(x_ext, re)(b.x)
            rho_q[i] = out
            ue = np.concatenate([[0.0], state.velocities[i], [0.0]])
            u_q[i] = CubicSpline(x_ext, ue)(b.x)
    return ModalState(time=state.time,
                      coefficients=project_velocity(u_q, cfg.mode_count),
                      densities=rho_q)


def field_from_modal(state: ModalState) -> FieldState:
    """Snapshot on the node-centered quadrature grid."""
    q = state.densities.shape[1]
    grid = Grid1D(cell_count=q - 1, length=1.0,
                  coordinate_kind=core.EULERIAN_X, node_centered=True)
    u = reconstruct_velocity(state.coefficients, q)
    return FieldState(time=state.time, grid=grid,
                      densities=state.densities, velocities=u)


def run_galerkin(initial: FieldState, params: Parameters,
                 cfg: Optional[GalerkinConfig] = None,
                 horizon: Optional[float] = None,
                 dt_override: Optional[float] = None) -> Trajectory:
    """Integrate the modal system; snapshots live on the quadrature grid."""
    cfg = cfg or GalerkinConfig()
    horizon = params.horizon if horizon is None else horizon
    state = modal_from_field(initial, cfg)
    times = snapshot_times(horizon, cfg.snapshot_interval)

    snap = field_from_modal(state)
    states: List[FieldState] = [snap]
    monitors: dict = {}
    _append(monitors, snap, params)
    iters: List[int] = []

    for t_next in times[1:]:
        while state.time < t_next - 1e-13 * max(1.0, horizon):
            if dt_override is not None:
                dt = dt_override
            else:
                dt = galerkin_stable_dt(state, params, cfg)
                if cfg.dt is not None:
                    dt = min(dt, cfg.dt)
            dt = min(dt, t_next - state.time)
            state, n_it = galerkin_step(state, dt, params, cfg)
            iters.append(n_it)
        state = replace(state, time=t_next)
        snap = field_from_modal(state)
        states.append(snap)
        _append(monitors, snap, params)

    return Trajectory(states=states,
                      monitors={k: np.array(v) for k, v in monitors.items()},
                      metadata={"backend": "galerkin",
                                "coordinate_kind": core.EULERIAN_X,
                                "mode_count": cfg.mode_count,
                                "quadrature_points": cfg.resolved_quadrature,
                                "picard_iterations": iters})


def _append(monitors: dict, state: FieldState, params: Parameters):
    mon = integrals.basic_monitors(state, params)
    monitors.setdefault("t", []).append(state.time)
    monitors.setdefault("energy", []).append(mon["energy"])
    monitors.setdefault("dissipation", []).append(mon["dissipation"])
    monitors.setdefault("rho_min", []).append(mon["rho_min"])
    monitors.setdefault("rho_max", []).append(mon["rho_max"])
    for i, m in enumerate(mon["masses"]):
        monitors.setdefault(f"mass_{i + 1}", []).append(float(m))

"""The a priori estimate ledger.

Given any trajectory (from any backend) this module computes the discrete
analogues of the quantities the existence theory bounds -- masses, energy
and dissipation, density extremes, and the L2 norm of d/dy ln(rho) in mass
coordinates -- and renders them as pass/fail records against configured
numerical bounds.  The analytic constants of the theory are existential, so
the ledger reports measured constants and checks configured tolerances, not
unprovable bounds.

All functions are pure: the same trajectory yields a bit-identical report.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import core, integrals, lagrangian
from .core import FieldState, Parameters
from .eulerian import Trajectory


@dataclass(frozen=True)
class LedgerCheck:
    name: str
    measured: float
    bound: float
    tolerance: float
    passed: bool

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (f"{tag} {self.name}: measured={self.measured:.6e} "
                f"bound={self.bound:.6e} tol={self.tolerance:.1e}")


@dataclass
class LedgerReport:
    checks: List[LedgerCheck]
    series: dict = field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_text(self) -> str:
        lines = [c.line() for c in self.checks]
        lines.append("RESULT " + ("PASS" if self.all_passed else "FAIL"))
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "checks": [{"name": c.name, "measured": float(c.measured),
                        "bound": float(c.bound),
                        "tolerance": float(c.tolerance),
                        "passed": bool(c.passed)} for c in self.checks],
            "all_passed": bool(self.all_passed),
        }


@dataclass(frozen=True)
class LedgerConfig:
    mass_drift_tol: float = 1e-10
    mass_drift_tol_eulerian: float = 1e-12
    energy_residual_tol: Optional[float] = None  # None: 2% of E(0)
    dissipation_floor_scale: float = 1e-12
    w_kappa: float = 3.0
    w_kappa0: float = 1.0
    density_floor: float = 1e-10
    include_w_norm: bool = True


# ---------------------------------------------------------------------------
# monitored series


def masses(traj: Trajectory) -> np.ndarray:
    """(n_snapshots, N) per-constituent masses along the trajectory."""
    return np.stack([integrals.masses(s) for s in traj.states])


def energy_balance(traj: Trajectory, params: Parameters):
    """Energy E(t), dissipation D(t) and the balance residual
    r(t) = E(t) - E(0) + int_0^t D dtau (trapezoid in time).

    When the scenario carries a forcing, its work rate is subtracted from
    the residual; r(0) is exactly zero.
    """
    t = traj.times
    e = np.array([integrals.energy(s, params) for s in traj.states])
    d = np.array([integrals.dissipation(s, params) for s in traj.states])
    residual = e - e[0] + _cumtrapz(d, t)
    if params.forcing is not None:
        work = np.array([_forcing_work(s, params) for s in traj.states])
        residual -= _cumtrapz(work, t)
    return e, d, residual


def _cumtrapz(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


def _forcing_work(state: FieldState, params: Parameters) -> float:
    if state.grid.coordinate_kind == core.LAGRANGIAN_Y:
        x = lagrangian.eulerian_positions(state)
        f = params.forcing(x, state.time)
        integrand = core.concentrations(state) * state.velocities * f
    else:
        f = params.forcing(state.grid.points, state.time)
        integrand = state.densities * state.velocities * f
    return float(integrals.integrate(integrand, state.grid).sum())


def log_density_gradient(traj: Trajectory) -> np.ndarray:
    """||d/dy ln rho||_{L2(0,d)} per snapshot.

    The quantity lives in mass coordinates; Eulerian-coordinate snapshots
    are transformed first.
    """
    out = np.empty(len(traj.states))
    for m, s in enumerate(traj.states):
        if s.grid.coordinate_kind != core.LAGRANGIAN_Y:
            s = lagrangian.to_lagrangian(s)
        w = core.gradient(np.log(core.total_density(s)), s.grid.h)
        out[m] = np.sqrt(integrals.integrate(w ** 2, s.grid))
    return out


def density_bounds(traj: Trajectory):
    """Per-snapshot density extremes and, in mass coordinates, the
    mean-value sandwich min rho <= d <= max rho."""
    rho_min = np.array([float(s.densities.min()) for s in traj.states])
    rho_max = np.array([float(s.densities.max()) for s in traj.states])
    tot_min = np.array([float(core.total_density(s).min())
                        for s in traj.states])
    tot_max = np.array([float(core.total_density(s).max())
                        for s in traj.states])
    sandwich = None
    if traj.coordinate_kind == core.LAGRANGIAN_Y:
        d = traj.states[0].grid.length
        sandwich = (tot_min <= d) & (d <= tot_max)
    return {"rho_min": rho_min, "rho_max": rho_max,
            "rho_total_min": tot_min, "rho_total_max": tot_max,
            "sandwich": sandwich}


def dissipation_positivity(traj: Trajectory, params: Parameters,
                           floor_scale: float = 1e-12) -> np.ndarray:
    """Flags D(t) >= -floor_scale * scale; guards stencil bugs, since the
    dissipation is a quadratic form of the gradients."""
    d = np.array([integrals.dissipation(s, params) for s in traj.states])
    scale = float(np.max(np.abs(d))) if d.size else 0.0
    return d >= -floor_scale * max(scale, 1.0)


def dissipation_brute_force(state: FieldState, params: Parameters) -> float:
    """Independent double-loop evaluation of the dissipation integral."""
    g = core.gradient(state.velocities, state.grid.h)
    n = params.n_constituents
    q = np.zeros(g.shape[1])
    for i in range(n):
        for j in range(n):
            q += params.viscosity[i, j] * g[i] * g[j]
    if state.grid.coordinate_kind == core.LAGRANGIAN_Y:
        q = q * core.total_density(state)
    return float(integrals.integrate(q, state.grid))


# ---------------------------------------------------------------------------
# report assembly


def build_ledger(traj: Trajectory, params: Parameters,
                 cfg: Optional[LedgerConfig] = None) -> LedgerReport:
    cfg = cfg or LedgerConfig()
    checks: List[LedgerCheck] = []
    series: dict = {"t": traj.times}

    m = masses(traj)
    series["masses"] = m
    drift = float(np.max(np.abs(m - m[0]) / np.abs(m[0])))
    mass_tol = (cfg.mass_drift_tol_eulerian
                if traj.metadata.get("backend") == "eulerian"
                else cfg.mass_drift_tol)
    checks.append(LedgerCheck("mass-conservation", drift, mass_tol, 0.0,
                              drift <= mass_tol))

    e, d, r = energy_balance(traj, params)
    series["energy"], series["dissipation"], series["energy_residual"] = e, d, r
    e_tol = (0.02 * abs(e[0]) if cfg.energy_residual_tol is None
             else cfg.energy_residual_tol)
    r_max = float(np.max(np.abs(r)))
    checks.append(LedgerCheck("energy-dissipation-balance", r_max, e_tol, 0.0,
                              r_max <= e_tol))

    flags = dissipation_positivity(traj, params, cfg.dissipation_floor_scale)
    series["dissipation_nonnegative"] = flags
    worst = float(np.min(d)) if d.size else 0.0
    checks.append(LedgerCheck("dissipation-nonnegativity", worst, 0.0,
                              cfg.dissipation_floor_scale * max(1.0, float(np.max(np.abs(d)))),
                              bool(np.all(flags))))

    bounds = density_bounds(traj)
    series.update(bounds)
    checks.append(LedgerCheck("density-positivity",
                              float(bounds["rho_min"].min()),
                              cfg.density_floor, 0.0,
                              bool(bounds["rho_min"].min() > cfg.density_floor)))
    if bounds["sandwich"] is not None:
        checks.append(LedgerCheck("mean-value-sandwich",
                                  float(np.sum(~bounds["sandwich"])), 0.0, 0.0,
                                  bool(np.all(bounds["sandwich"]))))

    if cfg.include_w_norm:
        w = log_density_gradient(traj)
        series["w_norm"] = w
        w_bound = cfg.w_kappa * w[0] + cfg.w_kappa0
        w_max = float(w.max())
        checks.append(LedgerCheck("log-density-gradient-bound", w_max,
                                  w_bound, 0.0, w_max <= w_bound))

    return LedgerReport(checks=checks, series=series)

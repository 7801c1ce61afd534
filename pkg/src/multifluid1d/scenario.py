"""Scenario configuration: schema, presets, validation, and dispatch.

A scenario is a single JSON-compatible document.  Validation enforces the
well-posedness hypotheses of the model -- adiabatic index above one,
positive pressure coefficient, symmetric positive definite viscosity
matrix, strictly positive initial densities, and no-slip compatible initial
velocities -- and reports which hypothesis a bad document breaches.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np
import sympy as sp

from . import core, eulerian, galerkin, lagrangian
from .core import FieldState, Grid1D, Parameters
from .errors import AssumptionError, ConfigError
from .eulerian import EulerianSolverConfig, Trajectory

SCHEMA_VERSION = 1
BACKENDS = ("eulerian", "lagrangian", "galerkin")

PRESETS: Dict[str, dict] = {
    "rest": {
        "parameters": {"n_constituents": 2, "pressure_coeff": 1.0,
                       "adiabatic_index": 1.4,
                       "viscosity": [[2.0, 1.0], [1.0, 2.0]],
                       "horizon": 0.1},
        "initial_data": {"rho": ["1/2", "1/2"], "u": ["0", "0"]},
    },
    "smooth-mix": {
        "parameters": {"n_constituents": 2, "pressure_coeff": 1.0,
                       "adiabatic_index": 1.4,
                       "viscosity": [[2.0, 1.0], [1.0, 2.0]],
                       "horizon": 0.1},
        "initial_data": {
            "rho": ["0.5 + 0.2*sin(2*pi*x)", "0.5 - 0.1*sin(2*pi*x)"],
            "u": ["0.1*sin(pi*x)", "-0.05*sin(pi*x)"]},
    },
    "collapse": {
        "parameters": {"n_constituents": 2, "pressure_coeff": 1.0,
                       "adiabatic_index": 1.4,
                       "viscosity": [[2.0, 1.0], [1.0, 2.0]],
                       "horizon": 0.1},
        "initial_data": {
            "rho": ["0.5*(1 + 0.2*sin(2*pi*x))", "0.5*(1 + 0.2*sin(2*pi*x))"],
            "u": ["0.1*sin(pi*x)", "0.1*sin(pi*x)"]},
    },
    "mono": {
        "parameters": {"n_constituents": 1, "pressure_coeff": 1.0,
                       "adiabatic_index": 1.4, "viscosity": [[1.0]],
                       "horizon": 0.1},
        "initial_data": {"rho": ["1 + 0.2*sin(2*pi*x)"],
                         "u": ["0.1*sin(pi*x)"]},
    },
}

_VALIDATION_SAMPLES = 10_001  # endpoints plus all k/10000 rational nodes
_DENSITY_FLOOR = 1e-10
_X = sp.symbols("x", real=True)


@dataclass(frozen=True)
class ScenarioConfig:
    parameters: Parameters
    backend: str = "eulerian"
    cells: int = 256
    modes: int = 32
    initial_rho: tuple = ()
    initial_u: tuple = ()
    cfl: float = 0.4
    time_integrator: str = "ssp_rk3"
    density_flux_order: int = 1
    snapshot_interval: float = 0.01
    picard_tol: float = 1e-10
    out_dir: str = "out"
    plots: bool = False
    seed: int = 0
    preset: Optional[str] = None

    def solver_config(self) -> EulerianSolverConfig:
        return EulerianSolverConfig(
            cfl=self.cfl, time_integrator=self.time_integrator,
            snapshot_interval=self.snapshot_interval,
            density_flux_order=self.density_flux_order)

    def galerkin_config(self) -> galerkin.GalerkinConfig:
        return galerkin.GalerkinConfig(
            mode_count=self.modes, cfl=self.cfl,
            picard_tol=self.picard_tol,
            snapshot_interval=self.snapshot_interval)

    def document(self) -> dict:
        """The canonical JSON-compatible form (round-trips through parse)."""
        p = self.parameters
        return {
            "schema_version": SCHEMA_VERSION,
            "preset": self.preset,
            "backend": self.backend,
            "cells": self.cells,
            "modes": self.modes,
            "parameters": {
                "n_constituents": p.n_constituents,
                "pressure_coeff": p.pressure_coeff,
                "adiabatic_index": p.adiabatic_index,
                "viscosity": np.asarray(p.viscosity).tolist(),
                "horizon": p.horizon,
            },
            "initial_data": {"rho": list(self.initial_rho),
                             "u": list(self.initial_u)},
            "solver": {"cfl": self.cfl,
                       "time_integrator": self.time_integrator,
                       "density_flux_order": self.density_flux_order,
                       "snapshot_interval": self.snapshot_interval,
                       "picard_tol": self.picard_tol},
            "outputs": {"directory": self.out_dir, "plots": self.plots},
            "seed": self.seed,
        }


def _require(cond: bool, message: str):
    if not cond:
        raise ConfigError(message)


def parse_config(document) -> ScenarioConfig:
    """Validate a scenario document (dict or JSON text).

    Schema problems raise ConfigError with a field-level message; breaches
    of the model hypotheses raise AssumptionError naming the hypothesis.
    """
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
    _require(isinstance(document, dict), "config document must be an object")
    doc = dict(document)

    preset = doc.get("preset")
    if preset is not None:
        _require(preset in PRESETS,
                 f"preset: unknown preset {preset!r} "
                 f"(choose from {sorted(PRESETS)})")
        base = json.loads(json.dumps(PRESETS[preset]))
        for key, value in base.items():
            if isinstance(value, dict) and isinstance(doc.get(key), dict):
                for sub, subval in value.items():
                    doc[key].setdefault(sub, subval)
            else:
                doc.setdefault(key, value)

    version = doc.get("schema_version", SCHEMA_VERSION)
    _require(version == SCHEMA_VERSION,
             f"schema_version: expected {SCHEMA_VERSION}, got {version}")

    backend = doc.get("backend", "eulerian")
    _require(backend in BACKENDS,
             f"backend: must be one of {BACKENDS}, got {backend!r}")

    pdoc = doc.get("parameters")
    _require(isinstance(pdoc, dict), "parameters: required object missing")
    for key in ("n_constituents", "pressure_coeff", "adiabatic_index",
                "viscosity", "horizon"):
        _require(key in pdoc, f"parameters.{key}: required field missing")

    n = pdoc["n_constituents"]
    _require(isinstance(n, int) and n >= 1,
             "parameters.n_constituents: must be an integer >= 1")
    if not pdoc["adiabatic_index"] > 1:
        raise AssumptionError("adiabatic_index must exceed 1")
    if not pdoc["pressure_coeff"] > 0:
        raise AssumptionError("pressure_coeff must be positive")
    if not pdoc["horizon"] > 0:
        raise ConfigError("parameters.horizon: must be positive")

    m = np.asarray(pdoc["viscosity"], dtype=float)
    _require(m.shape == (n, n),
             f"parameters.viscosity: must be {n}x{n}, got {list(m.shape)}")
    if not np.allclose(m, m.T, rtol=0.0, atol=core.pd_threshold(m)):
        raise AssumptionError("viscosity matrix must be symmetric")
    m = 0.5 * (m + m.T)
    audit = core.audit_viscosity(core.GeneralViscosityPair(
        lambda_matrix=np.zeros_like(m), mu_matrix=m, flow_dim=1))
    if not audit.all_ok:
        worst = min(audit.min_eigenvalues,
                    key=lambda nm: audit.min_eigenvalues[nm])
        raise AssumptionError(
            "viscosity matrix must be positive definite; condition "
            f"{worst!r} fails with minimum eigenvalue "
            f"{audit.min_eigenvalues[worst]:.6g} along witness direction "
            f"{np.round(audit.witness, 6).tolist()}")

    params = Parameters(n_constituents=n,
                        pressure_coeff=float(pdoc["pressure_coeff"]),
                        adiabatic_index=float(pdoc["adiabatic_index"]),
                        viscosity=m, horizon=float(pdoc["horizon"]))

    idoc = doc.get("initial_data")
    _require(isinstance(idoc, dict), "initial_data: required object missing")
    rho_exprs = idoc.get("rho")
    u_exprs = idoc.get("u")
    _require(isinstance(rho_exprs, list) and len(rho_exprs) == n,
             f"initial_data.rho: need {n} expressions")
    _require(isinstance(u_exprs, list) and len(u_exprs) == n,
             f"initial_data.u: need {n} expressions")
    _validate_initial_data(rho_exprs, u_exprs)

    sdoc = doc.get("solver", {})
    odoc = doc.get("outputs", {})
    cfg = ScenarioConfig(
        parameters=params, backend=backend,
        cells=int(doc.get("cells", 256)), modes=int(doc.get("modes", 32)),
        initial_rho=tuple(rho_exprs), initial_u=tuple(u_exprs),
        cfl=float(sdoc.get("cfl", 0.4)),
        time_integrator=str(sdoc.get("time_integrator", "ssp_rk3")),
        density_flux_order=int(sdoc.get("density_flux_order", 1)),
        snapshot_interval=float(sdoc.get("snapshot_interval", 0.01)),
        picard_tol=float(sdoc.get("picard_tol", 1e-10)),
        out_dir=str(odoc.get("directory", "out")),
        plots=bool(odoc.get("plots", False)),
        seed=int(doc.get("seed", 0)), preset=preset)
    _require(cfg.cells >= 4, "cells: must be >= 4")
    _require(cfg.modes >= 1, "modes: must be >= 1")
    try:
        cfg.solver_config()
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from exc
    return cfg


def _compile_expr(text: str):
    try:
        expr = sp.sympify(text, locals={"x": _X})
    except (sp.SympifyError, SyntaxError) as exc:
        raise ConfigError(f"initial_data: cannot parse {text!r}: {exc}") \
            from exc
    extra = expr.free_symbols - {_X}
    if extra:
        raise ConfigError(
            f"initial_data: {text!r} uses unknown symbols {sorted(map(str, extra))}")
    fn = sp.lambdify(_X, expr, modules="numpy")
    return lambda xv: np.broadcast_to(np.asarray(fn(xv), dtype=float),
                                      np.shape(xv)).copy()


def _validate_initial_data(rho_exprs: List[str], u_exprs: List[str]):
    xs = np.linspace(0.0, 1.0, _VALIDATION_SAMPLES)
    for i, text in enumerate(rho_exprs):
        vals = _compile_expr(text)(xs)
        if not np.all(np.isfinite(vals)) or vals.min() <= _DENSITY_FLOOR:
            raise AssumptionError(
                f"initial densities must be strictly positive; rho_0{i + 1} "
                f"= {text!r} attains {vals.min():.6g} on [0, 1]")
    for i, text in enumerate(u_exprs):
        vals = _compile_expr(text)(xs)
        if not np.all(np.isfinite(vals)):
            raise AssumptionError(
                f"initial velocities must be finite; u_0{i + 1} = {text!r}")
        if max(abs(vals[0]), abs(vals[-1])) > 1e-12:
            raise AssumptionError(
                f"initial velocities must vanish at the walls; u_0{i + 1} "
                f"= {text!r} has boundary values "
                f"({vals[0]:.3g}, {vals[-1]:.3g})")


def initial_state(config: ScenarioConfig,
                  grid: Optional[Grid1D] = None) -> FieldState:
    """Sample the configured closed-form data on the (Eulerian) grid."""
    grid = grid or Grid1D(cell_count=config.cells, length=1.0,
                          coordinate_kind=core.EULERIAN_X)
    x = grid.points
    rho = np.stack([_compile_expr(e)(x) for e in config.initial_rho])
    u = np.stack([_compile_expr(e)(x) for e in config.initial_u])
    return FieldState(time=0.0, grid=grid, densities=rho, velocities=u)


def run_scenario(config: ScenarioConfig,
                 dt_override: Optional[float] = None) -> Trajectory:
    """Dispatch to the configured backend.  Solver failures propagate as the
    typed errors of :mod:`multifluid1d.errors`."""
    state0 = initial_state(config)
    if config.backend == "eulerian":
        traj = eulerian.run(state0, config.parameters, config.solver_config(),
                            dt_override=dt_override)
    elif config.backend == "lagrangian":
        traj = lagrangian.run_lagrangian(state0, config.parameters,
                                         config.solver_config(),
                                         dt_override=dt_override)
    else:
        gcfg = config.galerkin_config()
        if dt_override is not None:
            gcfg = replace(gcfg, dt=dt_override)
        traj = galerkin.run_galerkin(state0, config.parameters, gcfg)
    traj.metadata["config"] = config.document()
    return traj


# ---------------------------------------------------------------------------
# cross-backend comparison


@dataclass
class ComparisonReport:
    times: List[float]
    linf: Dict[str, List[float]]
    l2: Dict[str, List[float]]

    def max_linf(self, fld: str) -> float:
        return max(self.linf[fld])

    def to_dict(self) -> dict:
        return {"times": self.times, "linf": self.linf, "l2": self.l2}


def _eulerian_samples(state: FieldState):
    """(x, total density, mean velocity) in spatial coordinates."""
    if state.grid.coordinate_kind == core.LAGRANGIAN_Y:
        x = lagrangian.eulerian_positions(state)
    else:
        x = state.grid.points
    return x, core.total_density(state), core.average_velocity(state)


def compare_trajectories(traj_a: Trajectory, traj_b: Trajectory,
                         time_tol: float = 1e-9) -> ComparisonReport:
    """Discrepancies of total density and mean velocity at shared snapshot
    times, with trajectory b interpolated onto a's spatial points."""
    tb = {round(s.time / time_tol): s for s in traj_b.states}
    times, linf, l2 = [], {"rho": [], "v": []}, {"rho": [], "v": []}
    for sa in traj_a.states:
        key = round(sa.time / time_tol)
        if key not in tb:
            continue
        sb = tb[key]
        xa, rho_a, v_a = _eulerian_samples(sa)
        xb, rho_b, v_b = _eulerian_samples(sb)
        rho_b_on_a = np.interp(xa, xb, rho_b)
        v_b_on_a = np.interp(xa, xb, v_b)
        times.append(float(sa.time))
        for name, da, db in (("rho", rho_a, rho_b_on_a), ("v", v_a, v_b_on_a)):
            diff = da - db
            linf[name].append(float(np.max(np.abs(diff))))
            l2[name].append(float(np.sqrt(np.mean(diff ** 2))))
    if not times:
        raise ConfigError("trajectories share no snapshot times "
                          "(incompatible horizons or cadences)")
    return ComparisonReport(times=times, linf=linf, l2=l2)

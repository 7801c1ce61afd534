"""Discrete integrals and the scalar monitors recorded along trajectories.

The integration rule is tied to the sampling: cell-centered data use the
midpoint rule h * sum (the functional the finite-volume fluxes conserve
exactly), node-centered data use the trapezoid rule (the functional the
spectral backend's density flux conserves exactly).  Both are second order,
so cross-backend reports stay comparable.
"""
from __future__ import annotations

import numpy as np

from . import core
from .core import FieldState, Grid1D, Parameters


def integrate(values: np.ndarray, grid: Grid1D) -> np.ndarray:
    """Integrate samples over the grid; acts on the last axis."""
    v = np.asarray(values, dtype=float)
    if grid.node_centered:
        s = v[..., 1:-1].sum(axis=-1) + 0.5 * (v[..., 0] + v[..., -1])
        return s * grid.h
    return v.sum(axis=-1) * grid.h


def masses(state: FieldState) -> np.ndarray:
    """Per-constituent mass: int rho_i dx, or int (rho_i/rho) dy in mass
    coordinates (where the concentration is the conserved line density)."""
    if state.grid.coordinate_kind == core.LAGRANGIAN_Y:
        return integrate(core.concentrations(state), state.grid)
    return integrate(state.densities, state.grid)


def energy(state: FieldState, params: Parameters) -> float:
    """Total energy: kinetic plus elastic NK/(gamma-1) int rho^gamma dx.

    The elastic weight carries the factor N because each of the N momentum
    equations contributes the full pressure gradient while the transport
    velocity is the 1/N average.
    """
    n = params.n_constituents
    gam = params.adiabatic_index
    k_el = n * params.pressure_coeff / (gam - 1.0)
    rho = core.total_density(state)
    if state.grid.coordinate_kind == core.LAGRANGIAN_Y:
        kin = integrate(core.concentrations(state) * state.velocities ** 2 / 2.0,
                        state.grid).sum()
        el = k_el * integrate(rho ** (gam - 1.0), state.grid)
    else:
        kin = integrate(state.densities * state.velocities ** 2 / 2.0,
                        state.grid).sum()
        el = k_el * integrate(rho ** gam, state.grid)
    return float(kin + el)


def dissipation(state: FieldState, params: Parameters) -> float:
    """Viscous dissipation integral D = int sum_ij mu_ij u_i' u_j' dx."""
    g = core.gradient(state.velocities, state.grid.h)
    q = np.einsum("ij,ik,jk->k", params.viscosity, g, g)
    if state.grid.coordinate_kind == core.LAGRANGIAN_Y:
        q = q * core.total_density(state)
    return float(integrate(q, state.grid))


def basic_monitors(state: FieldState, params: Parameters) -> dict:
    rho = core.total_density(state)
    return {
        "energy": energy(state, params),
        "dissipation": dissipation(state, params),
        "masses": masses(state),
        "rho_min": float(state.densities.min()),
        "rho_max": float(state.densities.max()),
        "rho_total_min": float(rho.min()),
        "rho_total_max": float(rho.max()),
    }

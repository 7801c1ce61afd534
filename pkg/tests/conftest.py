"""Shared fixtures.  Heavy reference runs are session-scoped so the
acceptance criteria can share them instead of recomputing."""
import numpy as np
import pytest

from multifluid1d import core, scenario
from multifluid1d.core import FieldState, Grid1D, Parameters


@pytest.fixture(scope="session")
def mix_params() -> Parameters:
    return Parameters(n_constituents=2, pressure_coeff=1.0,
                      adiabatic_index=1.4,
                      viscosity=np.array([[2.0, 1.0], [1.0, 2.0]]),
                      horizon=0.1)


@pytest.fixture(scope="session")
def mono_params() -> Parameters:
    return Parameters(n_constituents=1, pressure_coeff=1.0,
                      adiabatic_index=1.4, viscosity=np.array([[1.0]]),
                      horizon=0.1)


def make_grid(cells: int, kind: str = core.EULERIAN_X,
              length: float = 1.0) -> Grid1D:
    return Grid1D(cell_count=cells, length=length, coordinate_kind=kind)


def smooth_mix_state(cells: int) -> FieldState:
    cfg = scenario.parse_config({"preset": "smooth-mix", "cells": cells})
    return scenario.initial_state(cfg)


def mono_state(cells: int) -> FieldState:
    cfg = scenario.parse_config({"preset": "mono", "cells": cells})
    return scenario.initial_state(cfg)


@pytest.fixture(scope="session")
def smooth_mix_64() -> FieldState:
    return smooth_mix_state(64)


def run_preset(preset: str, backend: str, cells: int = 128, modes: int = 16,
               horizon=None, snapshot_interval: float = 0.01,
               **extra):
    doc = {"preset": preset, "backend": backend, "cells": cells,
           "modes": modes, "solver": {"snapshot_interval": snapshot_interval}}
    doc["solver"].update(extra)
    cfg = scenario.parse_config(doc)
    if horizon is not None:
        from dataclasses import replace
        cfg = replace(cfg, parameters=replace(cfg.parameters,
                                              horizon=horizon))
    return cfg, scenario.run_scenario(cfg)


@pytest.fixture(scope="session")
def eul_smooth_256():
    return run_preset("smooth-mix", "eulerian", cells=256,
                      snapshot_interval=0.004)


@pytest.fixture(scope="session")
def eul_smooth_512():
    return run_preset("smooth-mix", "eulerian", cells=512,
                      snapshot_interval=0.002)


@pytest.fixture(scope="session")
def lag_smooth_256():
    return run_preset("smooth-mix", "lagrangian", cells=256,
                      snapshot_interval=0.004)


@pytest.fixture(scope="session")
def lag_smooth_512():
    return run_preset("smooth-mix", "lagrangian", cells=512,
                      snapshot_interval=0.002)


@pytest.fixture(scope="session")
def mms_mix(mix_params):
    from dataclasses import replace
    from multifluid1d import verification
    params = replace(mix_params, horizon=0.02)
    return params, verification.build_manufactured(params)

"""Trajectory persistence and figures.

Trajectories are written as one CSV per field per snapshot plus a manifest,
with monitors collected in a single CSV.  Every emitted file opens with a
header comment carrying the schema version and the hash of the generating
config, and all output is deterministic: the same config produces
byte-identical files (SVG figures included).
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
from typing import Optional

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from . import core, estimates
from .core import FieldState, Grid1D, Parameters
from .eulerian import Trajectory

SCHEMA_VERSION = 1
_FLOAT_FMT = "%.17g"


def config_hash(document: dict) -> str:
    """Stable short hash of the canonical JSON form of a config."""
    canon = json.dumps(document, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _header(chash: str) -> str:
    return f"# schema_version={SCHEMA_VERSION} config_hash={chash}\n"


def _write_csv(path: str, chash: str, columns, rows):
    with open(path, "w", newline="") as fh:
        fh.write(_header(chash))
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_FLOAT_FMT % v for v in row])


def write_trajectory(traj: Trajectory, out_dir: str,
                     params: Optional[Parameters] = None) -> dict:
    """Persist snapshots + monitors + manifest; returns the manifest."""
    os.makedirs(out_dir, exist_ok=True)
    doc = traj.metadata.get("config", {})
    chash = config_hash(doc)
    n = traj.states[0].n_constituents
    coord = "y" if traj.coordinate_kind == core.LAGRANGIAN_Y else "x"

    files = []
    for m, state in enumerate(traj.states):
        pts = state.grid.points
        for fld, data in (("density", state.densities),
                          ("velocity", state.velocities)):
            name = f"{fld}_{m:04d}.csv"
            cols = [coord] + [f"{'rho' if fld == 'density' else 'u'}_{i + 1}"
                              for i in range(n)]
            _write_csv(os.path.join(out_dir, name), chash, cols,
                       np.column_stack([pts] + list(data)))
            files.append(name)

    mon = dict(traj.monitors)
    if params is not None and "w_norm" not in mon:
        mon["w_norm"] = estimates.log_density_gradient(traj)
    cols = (["t", "E", "D"] + [f"m_{i + 1}" for i in range(n)]
            + ["rho_min", "rho_max", "w_norm"])
    rows = np.column_stack(
        [mon["t"], mon["energy"], mon["dissipation"]]
        + [mon[f"mass_{i + 1}"] for i in range(n)]
        + [mon["rho_min"], mon["rho_max"],
           mon.get("w_norm", np.full(len(mon["t"]), np.nan))])
    _write_csv(os.path.join(out_dir, "monitors.csv"), chash, cols, rows)
    files.append("monitors.csv")

    grid0 = traj.states[0].grid
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "config_hash": chash,
        "config": doc,
        "backend": traj.metadata.get("backend"),
        "coordinate_kind": grid0.coordinate_kind,
        "cell_count": grid0.cell_count,
        "node_centered": bool(getattr(grid0, "node_centered", False)),
        "domain_length": grid0.length,
        "n_constituents": n,
        "times": [float(s.time) for s in traj.states],
        "files": files,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def read_trajectory(out_dir: str) -> Trajectory:
    """Rebuild a trajectory (states + monitors) from a written run directory."""
    with open(os.path.join(out_dir, "manifest.json")) as fh:
        manifest = json.load(fh)
    grid = Grid1D(cell_count=manifest["cell_count"],
                  length=manifest["domain_length"],
                  coordinate_kind=manifest["coordinate_kind"],
                  node_centered=manifest.get("node_centered", False))
    n = manifest["n_constituents"]

    def load(name):
        return np.loadtxt(os.path.join(out_dir, name), delimiter=",",
                          skiprows=2, ndmin=2)

    states = []
    for m, t in enumerate(manifest["times"]):
        rho = load(f"density_{m:04d}.csv")[:, 1:1 + n].T
        u = load(f"velocity_{m:04d}.csv")[:, 1:1 + n].T
        states.append(FieldState(time=t, grid=grid, densities=rho,
                                 velocities=u))

    monitors = {}
    mrows = load("monitors.csv")
    with open(os.path.join(out_dir, "monitors.csv")) as fh:
        fh.readline()
        cols = fh.readline().strip().split(",")
    remap = {"E": "energy", "D": "dissipation"}
    remap.update({f"m_{i + 1}": f"mass_{i + 1}" for i in range(n)})
    for j, cname in enumerate(cols):
        monitors[remap.get(cname, cname)] = mrows[:, j]

    return Trajectory(states=states, monitors=monitors,
                      metadata={"backend": manifest.get("backend"),
                                "config": manifest.get("config", {}),
                                "cells": manifest["cell_count"]})


# ---------------------------------------------------------------------------
# figures


def _deterministic_svg():
    plt.rcParams["svg.hashsalt"] = "multifluid1d"
    plt.rcParams["svg.fonttype"] = "path"


def _save(fig, path: str):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def render_plots(traj: Trajectory, out_dir: str) -> list:
    """Static SVG line charts: fields at a few snapshot times plus the
    monitor series.  Returns the list of written file names."""
    _deterministic_svg()
    os.makedirs(out_dir, exist_ok=True)
    n = traj.states[0].n_constituents
    coord = "y" if traj.coordinate_kind == core.LAGRANGIAN_Y else "x"
    idx = sorted({0, len(traj.states) // 2, len(traj.states) - 1})
    written = []

    for fld, attr in (("density", "densities"), ("velocity", "velocities")):
        fig, axes = plt.subplots(1, n, figsize=(5.0 * n, 3.4), squeeze=False)
        for i in range(n):
            ax = axes[0, i]
            for m in idx:
                s = traj.states[m]
                ax.plot(s.grid.points, getattr(s, attr)[i],
                        label=f"t = {s.time:.3g}")
            ax.set_xlabel(coord)
            sym = "rho" if fld == "density" else "u"
            ax.set_ylabel(f"{sym}_{i + 1}")
            ax.legend(fontsize=8)
        fig.tight_layout()
        name = f"{fld}.svg"
        _save(fig, os.path.join(out_dir, name))
        written.append(name)

    mon = traj.monitors
    if "t" in mon:
        fig, axes = plt.subplots(2, 2, figsize=(9.0, 6.0))
        panels = [("energy", "E"), ("dissipation", "D"),
                  ("rho_min", "min rho"), ("rho_max", "max rho")]
        for ax, (key, label) in zip(axes.ravel(), panels):
            if key in mon:
                ax.plot(mon["t"], mon[key])
            ax.set_xlabel("t")
            ax.set_ylabel(label)
        fig.tight_layout()
        _save(fig, os.path.join(out_dir, "monitors.svg"))
        written.append("monitors.svg")
    return written

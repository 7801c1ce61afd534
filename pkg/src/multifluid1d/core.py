"""Shared domain types, closures and viscosity-matrix admissibility checks.

All types here are immutable after construction (arrays are frozen with
``setflags(write=False)``) so states can be shared freely between threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class DomainError(ValueError):
    """Raised when a physical precondition (positivity, shape) is violated."""


def _frozen(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Parameters:
    """Model constants for the N-constituent viscous compressible mixture.

    ``forcing``, when present, is a callable ``f(x, t) -> (N, len(x))`` giving
    per-constituent accelerations; it exists only for manufactured solutions.
    """

    n_constituents: int
    pressure_coeff: float
    adiabatic_index: float
    viscosity: np.ndarray
    horizon: float
    forcing: Optional[Callable[[np.ndarray, float], np.ndarray]] = None

    def __post_init__(self):
        n = self.n_constituents
        if n < 1:
            raise DomainError("n_constituents must be >= 1")
        if not self.pressure_coeff > 0:
            raise DomainError("pressure_coeff must be positive")
        if not self.adiabatic_index > 1:
            raise DomainError("adiabatic_index must exceed 1")
        if not self.horizon > 0:
            raise DomainError("horizon must be positive")
        m = _frozen(self.viscosity)
        if m.shape != (n, n):
            raise DomainError(f"viscosity matrix must be {n}x{n}, got {m.shape}")
        if not np.array_equal(m, m.T):
            raise DomainError("viscosity matrix must be symmetric")
        lam_min = np.linalg.eigvalsh(m)[0]
        if lam_min <= pd_threshold(m):
            raise DomainError(
                "viscosity matrix must be positive definite "
                f"(smallest eigenvalue {lam_min:g})"
            )
        object.__setattr__(self, "viscosity", m)

    @property
    def lambda_max(self) -> float:
        return float(np.linalg.eigvalsh(self.viscosity)[-1])


@dataclass(frozen=True)
class GeneralViscosityPair:
    """A (bulk, shear) viscosity matrix pair for the admissibility auditor.

    Used only by :func:`audit_viscosity`; the 1D solvers see a single
    effective matrix (the momentum system is written directly with mu_ij).
    """

    lambda_matrix: np.ndarray
    mu_matrix: np.ndarray
    flow_dim: int = 1

    def __post_init__(self):
        lam = _frozen(self.lambda_matrix)
        mu = _frozen(self.mu_matrix)
        if lam.ndim != 2 or lam.shape[0] != lam.shape[1]:
            raise DomainError("lambda_matrix must be square")
        if mu.shape != lam.shape:
            raise DomainError(
                f"matrix dimension mismatch: {lam.shape} vs {mu.shape}"
            )
        if self.flow_dim < 1:
            raise DomainError("flow_dim must be >= 1")
        object.__setattr__(self, "lambda_matrix", lam)
        object.__setattr__(self, "mu_matrix", mu)


EULERIAN_X = "eulerian_x"
LAGRANGIAN_Y = "lagrangian_y"


@dataclass(frozen=True)
class Grid1D:
    """Uniform 1D grid on (0, length).

    Cell-centered by default (values at (k+1/2)h); ``node_centered`` grids
    carry values at the cell_count+1 nodes k*h including both walls (used by
    the spectral backend's sampled snapshots).
    """

    cell_count: int
    length: float = 1.0
    coordinate_kind: str = EULERIAN_X
    node_centered: bool = False

    def __post_init__(self):
        if self.cell_count < 4:
            raise DomainError("cell_count must be >= 4")
        if not self.length > 0:
            raise DomainError("grid length must be positive")
        if self.coordinate_kind not in (EULERIAN_X, LAGRANGIAN_Y):
            raise DomainError(f"unknown coordinate_kind {self.coordinate_kind!r}")

    @property
    def h(self) -> float:
        return self.length / self.cell_count

    @property
    def n_values(self) -> int:
        return self.cell_count + 1 if self.node_centered else self.cell_count

    @property
    def points(self) -> np.ndarray:
        if self.node_centered:
            return np.linspace(0.0, self.length, self.cell_count + 1)
        return (np.arange(self.cell_count) + 0.5) * self.h


@dataclass(frozen=True)
class FieldState:
    """Densities and velocities of all constituents at one time instant."""

    time: float
    grid: Grid1D
    densities: np.ndarray   # (N, n_values), all > 0
    velocities: np.ndarray  # (N, n_values)

    def __post_init__(self):
        rho = _frozen(self.densities)
        u = _frozen(self.velocities)
        if rho.ndim != 2 or rho.shape != u.shape:
            raise DomainError("densities and velocities must share shape (N, M)")
        if rho.shape[1] != self.grid.n_values:
            raise DomainError(
                f"fields have {rho.shape[1]} values, grid expects {self.grid.n_values}"
            )
        if not np.all(np.isfinite(rho)) or not np.all(np.isfinite(u)):
            raise DomainError("non-finite field values")
        if np.any(rho <= 0):
            raise DomainError("densities must be strictly positive")
        object.__setattr__(self, "densities", rho)
        object.__setattr__(self, "velocities", u)

    @property
    def n_constituents(self) -> int:
        return self.densities.shape[0]


@dataclass(frozen=True)
class MatrixAuditReport:
    symmetric: bool
    positive_definite: bool
    second_law_ok: bool
    coercive: bool
    diagonal: bool
    triangular: bool
    min_eigenvalues: dict = field(default_factory=dict)
    witness: Optional[np.ndarray] = None

    @property
    def all_ok(self) -> bool:
        return (self.symmetric and self.positive_definite
                and self.second_law_ok and self.coercive)


def pd_threshold(a: np.ndarray) -> float:
    """Scale-invariant round-off guard for definiteness decisions."""
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    return 1e-12 * scale


# ---------------------------------------------------------------------------
# derived fields


def total_density(state: FieldState) -> np.ndarray:
    """Pointwise sum of the constituent densities."""
    return state.densities.sum(axis=0)


def average_velocity(state: FieldState) -> np.ndarray:
    """The mixture transport velocity: arithmetic mean of the u_i."""
    return state.velocities.mean(axis=0)


def pressure(rho: np.ndarray, params: Parameters) -> np.ndarray:
    """Barotropic closure p = K rho^gamma."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise DomainError("pressure requires strictly positive density")
    return params.pressure_coeff * rho ** params.adiabatic_index


def concentrations(state: FieldState) -> np.ndarray:
    """Mass fractions xi_i = rho_i / rho; rows sum to one pointwise."""
    return state.densities / total_density(state)


def gradient(values: np.ndarray, h: float) -> np.ndarray:
    """Second-order difference: central inside, one-sided at the end cells.

    Acts on the last axis; this is the stencil all monitors use so that
    diagnostics and dynamics see the same derivative.
    """
    v = np.asarray(values, dtype=float)
    g = np.empty_like(v)
    g[..., 1:-1] = (v[..., 2:] - v[..., :-2]) / (2.0 * h)
    g[..., 0] = (-3.0 * v[..., 0] + 4.0 * v[..., 1] - v[..., 2]) / (2.0 * h)
    g[..., -1] = (3.0 * v[..., -1] - 4.0 * v[..., -2] + v[..., -3]) / (2.0 * h)
    return g


def dissipation_density(state: FieldState, params: Parameters) -> np.ndarray:
    """Pointwise viscous dissipation q = sum_ij mu_ij u_i' u_j'.

    Nonnegative (up to round-off) whenever the viscosity matrix is positive
    semidefinite, being a quadratic form in the velocity gradients.
    """
    g = gradient(state.velocities, state.grid.h)
    return np.einsum("ij,ik,jk->k", params.viscosity, g, g)


# ---------------------------------------------------------------------------
# viscosity-matrix admissibility


def _is_triangular(a: np.ndarray) -> bool:
    return np.allclose(a, np.triu(a)) or np.allclose(a, np.tril(a))


def audit_viscosity(pair: GeneralViscosityPair) -> MatrixAuditReport:
    """Audit a viscosity matrix pair against the admissibility conditions.

    Strict conditions (definiteness) demand the smallest eigenvalue of the
    symmetrized matrix to exceed the round-off threshold; non-strict ones
    (semidefiniteness, the entropy-production condition) tolerate it down to
    minus the threshold.  On failure, ``witness`` is a unit eigenvector of
    the most negative eigenvalue among the failed conditions.
    """
    lam, mu, n = pair.lambda_matrix, pair.mu_matrix, pair.flow_dim

    def sym(a):
        return 0.5 * (a + a.T)

    def min_eig(a):
        w, vec = np.linalg.eigh(sym(a))
        return float(w[0]), vec[:, 0]

    mats = {
        "M": mu,
        "n_lambda_plus_2M": n * lam + 2.0 * mu,
        "lambda_plus_2M": lam + 2.0 * mu,
    }
    eigs = {name: min_eig(a) for name, a in mats.items()}
    thr = {name: pd_threshold(sym(a)) for name, a in mats.items()}

    def strict(name):
        return eigs[name][0] > thr[name]

    def nonneg(name):
        return eigs[name][0] >= -thr[name]

    symmetric = np.array_equal(lam, lam.T) and np.array_equal(mu, mu.T)
    positive_definite = strict("M")
    second_law_ok = nonneg("n_lambda_plus_2M") and nonneg("M")
    coercive = strict("lambda_plus_2M") and strict("M")

    total = lam + 2.0 * mu  # matrix coupling the highest-order terms
    diagonal = np.allclose(total, np.diag(np.diag(total))) and \
        np.allclose(mu, np.diag(np.diag(mu)))
    triangular = _is_triangular(total)

    witness = None
    if not (positive_definite and second_law_ok and coercive):
        failed = {nm for nm in mats if eigs[nm][0] <= thr[nm]}
        worst = min(failed or {"M"}, key=lambda nm: eigs[nm][0])
        witness = eigs[worst][1]

    return MatrixAuditReport(
        symmetric=bool(symmetric),
        positive_definite=bool(positive_definite),
        second_law_ok=bool(second_law_ok),
        coercive=bool(coercive),
        diagonal=bool(diagonal),
        triangular=bool(triangular),
        min_eigenvalues={name: eigs[name][0] for name in mats},
        witness=witness,
    )


def brute_force_definiteness(a: np.ndarray, n_samples: int = 10_000,
                             seed: int = 0) -> float:
    """Sampled minimum of the quadratic form xi^T A xi over random unit xi.

    Independent oracle for the eigenvalue-based audit: the returned value
    approximates the smallest eigenvalue of the symmetrized matrix.
    """
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal((n_samples, a.shape[0]))
    xi /= np.linalg.norm(xi, axis=1, keepdims=True)
    return float(np.min(np.einsum("si,ij,sj->s", xi, a, xi)))


def symmetric_reduction_check(params: Parameters) -> Optional[Parameters]:
    """Collapse parameters to a mono-fluid set when all row sums of M agree.

    With identical constituents the N momentum equations coincide, and the
    mixture total density obeys the single-fluid system with viscosity
    N * (common row sum) and pressure coefficient N * K.  Returns None when
    the row sums differ beyond the round-off threshold.
    """
    m = params.viscosity
    row_sums = m.sum(axis=1)
    eps = 1e-12 * float(np.max(np.abs(m)))
    if np.max(row_sums) - np.min(row_sums) > eps:
        return None
    n = params.n_constituents
    s = float(row_sums.mean())
    return Parameters(
        n_constituents=1,
        pressure_coeff=n * params.pressure_coeff,
        adiabatic_index=params.adiabatic_index,
        viscosity=np.array([[n * s]]),
        horizon=params.horizon,
        forcing=params.forcing,
    )

"""Estimator-style front end and the convergence-study driver."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .assembly import H_MODES, Discretization, assemble, load_vector, solve
from .femspace import reference_p2
from .mesh import TriangleMesh, generate_mesh, perturb_vertices
from .problems import LOAD_SOURCES, PROBLEMS, get_problem
from .validation import check_mesh, check_points, check_positive
from .verify import ConvergenceReport, ConvergenceRow, energy_error, l2_quotient_error

logger = logging.getLogger(__name__)


class SurfaceBiharmonicSolver(BaseEstimator):
    """Continuous/discontinuous Galerkin solver for ``Delta_Gamma^2 u = f`` on a closed surface.

    Parameters
    ----------
    beta : float, default=10.0
        Penalty on the jumps of the normal derivative across edges.
    h_mode : {"global", "per-edge"}, default="global"
        Whether the penalty scales with the largest edge length or with each
        edge's own length.

    Attributes
    ----------
    coef_ : ndarray of shape (n_dofs,)
        P2 coefficients of the discrete solution, with zero mean on ``Gamma_h``.
    multiplier_ : float
        Lagrange multiplier of the mean-value constraint.
    load_mean_ : float
        Mean of the lifted load removed before assembly.
    discretization_ : Discretization
    system_ : SparseSystem

    Examples
    --------
    >>> from cdgsurf import Sphere, generate_mesh, sphere_problem
    >>> prob = sphere_problem()
    >>> est = SurfaceBiharmonicSolver(beta=10.0).fit(generate_mesh(prob.surface, 2), prob.f_load)
    >>> est.coef_.shape
    (642,)
    """

    def __init__(self, beta: float = 10.0, h_mode: str = "global"):
        self.beta = beta
        self.h_mode = h_mode

    def _validate_params(self):
        check_positive(self.beta, "beta")
        if self.h_mode not in H_MODES:
            raise ValueError(f"h_mode must be one of {H_MODES}, got {self.h_mode!r}")

    def fit(self, mesh: TriangleMesh, f):
        """Assemble and solve on ``mesh`` for the load ``f`` (a function of surface points)."""
        self._validate_params()
        mesh = check_mesh(mesh)
        disc = Discretization(mesh)
        system = assemble(disc, self.beta, self.h_mode)
        b, mean = load_vector(disc, f)
        u, lam = solve(system, b)
        self.discretization_ = disc
        self.system_ = system
        self.rhs_ = b
        self.load_mean_ = mean
        self.coef_ = u
        self.multiplier_ = lam
        self.n_dofs_ = disc.n_dofs
        return self

    def predict(self, X) -> np.ndarray:
        """Evaluate ``u_h`` at points near ``Gamma_h``.

        Each point is projected orthogonally onto the closest facet that
        contains its projection; points falling between facets use the facet
        with the smallest barycentric violation.
        """
        check_is_fitted(self, "coef_")
        X = check_points(X)
        disc = self.discretization_
        faces, lam = locate(disc, X)
        values, _ = reference_p2(lam)
        return np.einsum("nj,nj->n", values, self.coef_[disc.dofmap.face_dofs[faces]])

    def l2_error(self, u_exact) -> float:
        check_is_fitted(self, "coef_")
        return l2_quotient_error(self.discretization_, self.coef_, u_exact)

    def energy_error(self, u_exact) -> float:
        check_is_fitted(self, "coef_")
        return energy_error(self.discretization_, self.coef_, u_exact)


def locate(disc: Discretization, X, n_candidates: int = 8):
    """Face index and barycentric coordinates of the facet projection of each point."""
    mesh = disc.mesh
    corners = mesh.corners()
    tree = cKDTree(corners.mean(axis=1))
    k = min(n_candidates, mesh.n_faces)
    _, cand = tree.query(X, k=k)
    cand = np.asarray(cand).reshape(len(X), k)
    origin = disc.frames.origin[cand]  # (N, k, 3)
    rel = X[:, None, :] - origin
    xi1 = np.einsum("nki,nki->nk", rel, disc.frames.t1[cand])
    xi2 = np.einsum("nki,nki->nk", rel, disc.frames.t2[cand])
    dist = np.abs(np.einsum("nki,nki->nk", rel, disc.frames.n_h[cand]))
    ref = np.einsum("nkij,nkj->nki", disc.frames.jacobian_inv[cand], np.stack([xi1, xi2], axis=-1))
    lam = np.concatenate([1.0 - ref.sum(axis=-1, keepdims=True), ref], axis=-1)
    violation = np.maximum(-lam, 0.0).sum(axis=-1)
    inside = violation <= 1e-10
    score = np.where(inside, dist, np.inf)
    best = np.argmin(score, axis=1)
    outside = ~inside.any(axis=1)
    best[outside] = np.argmin(violation[outside], axis=1)
    rows = np.arange(len(X))
    lam = np.clip(lam[rows, best], 0.0, None)
    lam /= lam.sum(axis=1, keepdims=True)
    return cand[rows, best], lam


# --- experiment driver -----------------------------------------------------------------


@dataclass
class RunConfig:
    problem: str = "sphere"
    levels: tuple = (1, 2, 3, 4)
    beta: float = 10.0
    mesh: str = "structured"
    seed: int = 0
    amplitude: float = 0.2
    load_source: str = "oracle"
    h_mode: str = "global"
    out: str | None = None

    def __post_init__(self):
        self.levels = tuple(int(k) for k in self.levels)
        if not self.levels or list(self.levels) != sorted(set(self.levels)):
            raise ValueError(f"levels must be non-empty and strictly ascending, got {self.levels}")
        check_positive(self.beta, "beta")
        if self.levels[0] < 0:
            raise ValueError(f"levels must be non-negative, got {self.levels}")
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}; choose from {sorted(PROBLEMS)}")
        if self.load_source not in LOAD_SOURCES:
            raise ValueError(f"load_source must be one of {LOAD_SOURCES}, got {self.load_source!r}")
        if not 0.0 <= float(self.amplitude) <= 0.3:
            raise ValueError(f"amplitude must lie in [0, 0.3], got {self.amplitude}")
        if self.mesh not in ("structured", "perturbed"):
            raise ValueError(f"mesh must be 'structured' or 'perturbed', got {self.mesh!r}")
        if self.h_mode not in H_MODES:
            raise ValueError(f"h_mode must be one of {H_MODES}, got {self.h_mode!r}")


def build_mesh(config: RunConfig, surface, level: int) -> TriangleMesh:
    mesh = generate_mesh(surface, level)
    if config.mesh == "perturbed":
        mesh = perturb_vertices(mesh, config.amplitude, config.seed)
    return mesh


def run_level(config: RunConfig, level: int):
    """Solve one refinement level; returns the fitted estimator and a report row."""
    problem = get_problem(config.problem, config.load_source)
    mesh = build_mesh(config, problem.surface, level)
    est = SurfaceBiharmonicSolver(config.beta, config.h_mode).fit(mesh, problem.f_load)
    row = ConvergenceRow(
        level=level,
        h=est.discretization_.h,
        ndof=est.n_dofs_,
        l2_error=est.l2_error(problem.u_exact),
        energy_error=est.energy_error(problem.u_exact),
    )
    logger.info("level %d: h=%.4f ndof=%d l2=%.4e", level, row.h, row.ndof, row.l2_error)
    return est, row


def convergence_study(config: RunConfig) -> ConvergenceReport:
    report = ConvergenceReport(
        metadata={
            "problem": config.problem,
            "beta": config.beta,
            "mesh": config.mesh,
            "seed": config.seed,
            "amplitude": config.amplitude,
            "load_source": config.load_source,
            "h_mode": config.h_mode,
        }
    )
    for level in config.levels:
        _, row = run_level(config, level)
        report.add(row)
    return report


def finest_pair_eocs(report: ConvergenceReport, n: int = 2) -> list:
    return [r.eoc_l2 for r in report.rows[-n:] if not math.isnan(r.eoc_l2)]

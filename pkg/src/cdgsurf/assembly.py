"""Assembly and solution of the continuous/discontinuous Galerkin biharmonic system."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import SolverBreakdown
from .femspace import (
    DofMap,
    FacetFrame,
    FacetOperators,
    build_dofmap,
    build_frames,
    edge_rule,
    facet_operators,
    physical_points,
    reference_p2,
    triangle_rule,
)
from .geometry import closest_point
from .mesh import OPPOSITE, EdgeAdjacency, TriangleMesh, build_adjacency

logger = logging.getLogger(__name__)

H_MODES = ("global", "per-edge")


class Discretization:
    """Mesh plus everything derived from it that assembly and error evaluation share."""

    def __init__(self, mesh: TriangleMesh):
        self.mesh = mesh
        self.adjacency: EdgeAdjacency = build_adjacency(mesh)
        self.h = float(self.adjacency.lengths.max())
        self.dofmap: DofMap = build_dofmap(mesh, self.adjacency)
        self.frames: FacetFrame = build_frames(mesh, self.h)
        self.ops: FacetOperators = facet_operators(self.frames)
        self.tri_rule = triangle_rule()
        self.edge_rule = edge_rule()

    @property
    def n_dofs(self) -> int:
        return self.dofmap.n_dofs

    @property
    def areas(self) -> np.ndarray:
        return self.adjacency.face_areas

    @cached_property
    def quad_points(self) -> np.ndarray:
        """Triangle-rule points on every face, ``(F, Q, 3)``."""
        return physical_points(self.mesh, self.tri_rule.points)

    @cached_property
    def quad_weights(self) -> np.ndarray:
        """Physical weights ``2 |K| w_q``, ``(F, Q)``."""
        return 2.0 * self.areas[:, None] * self.tri_rule.weights[None, :]

    @cached_property
    def edge_barycentric(self) -> np.ndarray:
        """Barycentric coordinates of the edge-rule points in ``K+`` and ``K-``, ``(E, 2, Q, 3)``."""
        adj = self.adjacency
        t = self.edge_rule.points
        ne = adj.n_edges
        lam = np.zeros((ne, 2, len(t), 3))
        rows = np.arange(ne)
        for s in range(2):
            f = adj.faces[:, s]
            i, j = OPPOSITE[adj.local[:, s]].T
            starts_at_i = self.mesh.faces[f, i] == adj.edges[:, 0]
            li = np.where(starts_at_i, 0, 1)
            # parameter t runs from edges[:, 0] to edges[:, 1] in both faces
            lam[rows, s, :, i] = np.where(li[:, None] == 0, 1.0 - t, t)
            lam[rows, s, :, j] = np.where(li[:, None] == 0, t, 1.0 - t)
        return lam

    @cached_property
    def edge_points(self) -> np.ndarray:
        adj = self.adjacency
        t = self.edge_rule.points
        va = self.mesh.vertices[adj.edges[:, 0]]
        vb = self.mesh.vertices[adj.edges[:, 1]]
        return va[:, None, :] + t[None, :, None] * (vb - va)[:, None, :]

    @cached_property
    def edge_dofs(self) -> np.ndarray:
        """Global dofs of ``K+`` followed by those of ``K-``, ``(E, 12)``."""
        f = self.adjacency.faces
        return np.hstack([self.dofmap.face_dofs[f[:, 0]], self.dofmap.face_dofs[f[:, 1]]])

    @cached_property
    def edge_jumps(self) -> np.ndarray:
        """Per-basis ``nu_E . [[grad phi]] = nu+ . grad phi+ + nu- . grad phi-`` at edge points, ``(E, Q, 12)``."""
        adj = self.adjacency
        parts = []
        for s in range(2):
            grads = self.ops.gradients(self.edge_barycentric[:, s], faces=adj.faces[:, s])
            parts.append(np.einsum("eqjk,ek->eqj", grads, adj.conormals[:, s]))
        return np.concatenate(parts, axis=2)

    @cached_property
    def edge_averages(self) -> np.ndarray:
        """Per-basis ``{Lap phi}``, constant along each edge, ``(E, 12)``."""
        f = self.adjacency.faces
        lap = self.ops.laplacians
        return 0.5 * np.hstack([lap[f[:, 0]], lap[f[:, 1]]])

    @cached_property
    def edge_weights(self) -> np.ndarray:
        """Physical edge-rule weights, ``(E, Q)``."""
        return self.adjacency.lengths[:, None] * self.edge_rule.weights[None, :]

    def penalty_lengths(self, h_mode: str = "global") -> np.ndarray:
        if h_mode == "global":
            return np.full(self.adjacency.n_edges, self.h)
        if h_mode == "per-edge":
            return self.adjacency.lengths.copy()
        raise ValueError(f"h_mode must be one of {H_MODES}, got {h_mode!r}")


@dataclass
class SparseSystem:
    A: sp.csr_matrix
    m: np.ndarray
    area: float
    beta: float
    h_used: float
    h_mode: str

    def saddle_matrix(self) -> sp.csr_matrix:
        m = sp.csr_matrix(self.m[None, :])
        return sp.bmat([[self.A, m.T], [m, None]], format="csc")


def element_matrices(disc: Discretization) -> np.ndarray:
    """``|K| L_i L_j`` for every face, where ``L`` are the facet Laplacians, ``(F, 6, 6)``."""
    L = disc.ops.laplacians
    return (L[:, :, None] * L[:, None, :]) * disc.areas[:, None, None]


def element_matrix(disc: Discretization, face: int) -> np.ndarray:
    L = disc.ops.laplacians[face]
    return np.outer(L, L) * disc.areas[face]


def edge_matrices(disc: Discretization, beta: float, h_penalty) -> np.ndarray:
    """Consistency, symmetry and penalty couplings for every edge, ``(E, 12, 12)``.

    Rows and columns follow :attr:`Discretization.edge_dofs`.
    """
    J = disc.edge_jumps
    W = disc.edge_weights
    D = disc.edge_averages
    h_penalty = np.broadcast_to(np.asarray(h_penalty, dtype=float), (len(J),))
    S = np.einsum("eq,eqi->ei", W, J)  # integrated jump of each basis function
    consistency = D[:, :, None] * S[:, None, :] + S[:, :, None] * D[:, None, :]
    WJ = W[:, :, None] * J
    penalty = np.einsum("eqi,eqj->eij", WJ, J)
    return -consistency + (beta / h_penalty)[:, None, None] * penalty


def edge_matrix(disc: Discretization, edge: int, beta: float, h_penalty: float) -> np.ndarray:
    J = disc.edge_jumps[edge]
    W = disc.edge_weights[edge]
    D = disc.edge_averages[edge]
    S = W @ J
    return -(np.outer(D, S) + np.outer(S, D)) + (beta / h_penalty) * (J.T * W) @ J


def _mirror_upper(A: sp.spmatrix) -> sp.csr_matrix:
    """Symmetric matrix built from the upper triangle, so ``A == A.T`` holds bit for bit."""
    upper = sp.triu(A, format="csr")
    strict = sp.triu(A, k=1, format="csr")
    out = (upper + strict.T).tocsr()
    out.sort_indices()
    return out


def mass_vector(disc: Discretization) -> np.ndarray:
    """``m_i = int_{Gamma_h} phi_i``."""
    values, _ = reference_p2(disc.tri_rule.points)
    local = disc.quad_weights @ values  # (F, 6)
    return np.bincount(disc.dofmap.face_dofs.ravel(), weights=local.ravel(), minlength=disc.n_dofs)


def assemble(disc: Discretization, beta: float = 10.0, h_mode: str = "global") -> SparseSystem:
    """Assemble the stiffness matrix of ``a_h`` and the mean-value vector.

    ``h_mode="global"`` scales the penalty with the largest edge length,
    ``"per-edge"`` with the length of each edge.
    """
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    h_pen = disc.penalty_lengths(h_mode)
    fd = disc.dofmap.face_dofs
    ed = disc.edge_dofs
    Ke = element_matrices(disc)
    Ee = edge_matrices(disc, beta, h_pen)
    rows = np.concatenate([np.repeat(fd, 6, axis=1).ravel(), np.repeat(ed, 12, axis=1).ravel()])
    cols = np.concatenate([np.tile(fd, (1, 6)).ravel(), np.tile(ed, (1, 12)).ravel()])
    data = np.concatenate([Ke.ravel(), Ee.ravel()])
    n = disc.n_dofs
    A = sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()
    A = _mirror_upper(A)
    m = mass_vector(disc)
    return SparseSystem(
        A=A,
        m=m,
        area=float(disc.areas.sum()),
        beta=float(beta),
        h_used=float(disc.h),
        h_mode=h_mode,
    )


def load_vector(disc: Discretization, f) -> tuple[np.ndarray, float]:
    """Right-hand side ``(f_h, phi_i)`` with ``f_h = f o p - mean``.

    ``f`` takes points on the exact surface (shape ``(N, 3)``) and is lifted
    to the facets through the closest-point map. Returns the vector and the
    subtracted mean ``|Gamma_h|^{-1} (f o p, 1)``.
    """
    pts = disc.quad_points
    fq = np.asarray(f(closest_point(disc.mesh.surface, pts.reshape(-1, 3))), dtype=float)
    fq = fq.reshape(pts.shape[:2])
    W = disc.quad_weights
    mean = float(np.sum(W * fq) / np.sum(W))
    values, _ = reference_p2(disc.tri_rule.points)
    local = (W * (fq - mean)) @ values
    b = np.bincount(disc.dofmap.face_dofs.ravel(), weights=local.ravel(), minlength=disc.n_dofs)
    return b, mean


_FACTORIZATIONS = (
    # symmetric ordering, diagonal pivots first; then threshold partial pivoting
    dict(permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0, options=dict(SymmetricMode=True)),
    dict(permc_spec="COLAMD"),
)


def _refine(K, lu, rhs, n, target):
    x = lu.solve(rhs)
    absK = abs(K)
    for _ in range(4):
        if not np.all(np.isfinite(x)):
            return None
        r = rhs - K @ x
        res = np.linalg.norm(r[:n])
        floor = 64.0 * np.finfo(float).eps * np.linalg.norm((absK @ np.abs(x))[:n])
        if res <= max(target, floor):
            return x
        x = x + lu.solve(r)
    return None


def solve(system: SparseSystem, b: np.ndarray, rtol: float = 1e-9) -> tuple[np.ndarray, float]:
    """Solve ``[[A, m], [m^T, 0]] [u; lam] = [b; 0]`` by sparse LU with iterative refinement.

    The solve succeeds when ``|A u + lam m - b| <= rtol |b|``, or when the
    residual has reached the floating-point floor ``~ eps |A| |u|`` that no
    double-precision vector can beat on very fine meshes.

    Raises
    ------
    SolverBreakdown
        If no factorization reaches either criterion.
    """
    b = np.asarray(b, dtype=float)
    n = len(b)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), 0.0
    K = system.saddle_matrix()
    rhs = np.concatenate([b, [0.0]])
    for kwargs in _FACTORIZATIONS:
        try:
            lu = spla.splu(K, **kwargs)
        except RuntimeError as exc:
            logger.debug("factorization %s failed: %s", kwargs["permc_spec"], exc)
            continue
        x = _refine(K, lu, rhs, n, rtol * bnorm)
        if x is not None:
            return x[:n], float(x[n])
    raise SolverBreakdown(f"saddle solve did not reach relative residual {rtol:.1e}")

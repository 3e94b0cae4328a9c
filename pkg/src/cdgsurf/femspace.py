"""Continuous piecewise-quadratic Lagrange space on a flat-faceted surface.

Local dof order on a face: the three vertices, then the midpoints of the
edges opposite vertex 0, 1 and 2. Global numbering puts all vertices first,
then all edges in the order of :class:`~cdgsurf.mesh.EdgeAdjacency`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateTriangle
from .mesh import OPPOSITE, EdgeAdjacency, TriangleMesh


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray


# 12-point symmetric rule of degree 6 (Dunavant); orbits (a, b, b) and (c, d, e)
_TRI6_ORBITS3 = [
    (0.11678627572642794, 0.24928674517088192),
    (0.05084490637021538, 0.06308901449150837),
]
_TRI6_ORBIT6 = (0.082851075618345, 0.05314504984479652, 0.3103524510338062)


def triangle_rule() -> QuadratureRule:
    """Degree-6 rule on the reference triangle; points are barycentric, weights sum to 1/2."""
    pts, wts = [], []
    for w, b in _TRI6_ORBITS3:
        a = 1.0 - 2.0 * b
        for lam in ((a, b, b), (b, a, b), (b, b, a)):
            pts.append(lam)
            wts.append(w)
    w, c, d = _TRI6_ORBIT6
    e = 1.0 - c - d
    for lam in ((c, d, e), (c, e, d), (d, c, e), (d, e, c), (e, c, d), (e, d, c)):
        pts.append(lam)
        wts.append(w)
    return QuadratureRule(np.array(pts), 0.5 * np.array(wts))


def edge_rule(n_points: int = 4) -> QuadratureRule:
    """Gauss-Legendre rule on ``[0, 1]``, exact to degree ``2 * n_points - 1``."""
    x, w = np.polynomial.legendre.leggauss(n_points)
    return QuadratureRule(0.5 * (x + 1.0), 0.5 * w)


_REF_LAMBDA_GRAD = np.array([[-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])


def reference_p2(barycentric):
    """Quadratic Lagrange basis on the reference triangle.

    Parameters
    ----------
    barycentric : array_like, shape (..., 3)

    Returns
    -------
    values : ndarray, shape (..., 6)
    gradients : ndarray, shape (..., 6, 2)
        Derivatives with respect to ``(xi1, xi2) = (lambda1, lambda2)``.
    """
    lam = np.asarray(barycentric, dtype=float)
    l0, l1, l2 = lam[..., 0], lam[..., 1], lam[..., 2]
    values = np.stack(
        [l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1), 4 * l1 * l2, 4 * l2 * l0, 4 * l0 * l1],
        axis=-1,
    )
    g = _REF_LAMBDA_GRAD.T  # (3, 2) gradient of each lambda
    grads = np.stack(
        [
            (4 * l0 - 1)[..., None] * g[0],
            (4 * l1 - 1)[..., None] * g[1],
            (4 * l2 - 1)[..., None] * g[2],
            4 * (l1[..., None] * g[2] + l2[..., None] * g[1]),
            4 * (l2[..., None] * g[0] + l0[..., None] * g[2]),
            4 * (l0[..., None] * g[1] + l1[..., None] * g[0]),
        ],
        axis=-2,
    )
    return values, grads


@dataclass(frozen=True)
class DofMap:
    n_dofs: int
    face_dofs: np.ndarray  # (F, 6)

    @property
    def n_faces(self) -> int:
        return len(self.face_dofs)


def build_dofmap(mesh: TriangleMesh, adjacency: EdgeAdjacency) -> DofMap:
    face_dofs = np.hstack([mesh.faces, mesh.n_vertices + adjacency.face_edges])
    return DofMap(mesh.n_vertices + adjacency.n_edges, face_dofs)


@dataclass(frozen=True)
class FacetFrame:
    """Orthonormal tangent frames, one per face (arrays over faces).

    ``jacobian[f]`` maps reference coordinates to in-plane coordinates
    ``(t1 . (x - origin), t2 . (x - origin))``.
    """

    origin: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    n_h: np.ndarray
    jacobian: np.ndarray
    jacobian_inv: np.ndarray

    @property
    def area(self) -> np.ndarray:
        return 0.5 * np.linalg.det(self.jacobian)

    def projector(self) -> np.ndarray:
        """Facet tangent projectors ``I - n_h n_h^T``, shape ``(F, 3, 3)``."""
        return np.eye(3) - self.n_h[:, :, None] * self.n_h[:, None, :]


def build_frames(mesh: TriangleMesh, h: float | None = None) -> FacetFrame:
    """Gram-Schmidt tangent frames, starting from each face's longest edge.

    Raises
    ------
    DegenerateTriangle
        If some face has area below ``1e-14 * h**2``.
    """
    x = mesh.corners()
    e1 = x[:, 1] - x[:, 0]
    e2 = x[:, 2] - x[:, 0]
    normal = np.cross(e1, e2)
    area = 0.5 * np.linalg.norm(normal, axis=1)
    if h is None:
        h = np.linalg.norm(x[:, OPPOSITE[:, 1]] - x[:, OPPOSITE[:, 0]], axis=2).max()
    if np.any(area < 1e-14 * h**2):
        bad = int(np.argmin(area))
        raise DegenerateTriangle(f"face {bad} has area {area[bad]:.3e}")
    n_h = normal / (2.0 * area[:, None])

    edge_vecs = x[:, OPPOSITE[:, 1]] - x[:, OPPOSITE[:, 0]]  # (F, 3, 3)
    lengths = np.linalg.norm(edge_vecs, axis=2)
    order = np.argsort(-lengths, axis=1, kind="stable")
    rows = np.arange(len(x))
    first = edge_vecs[rows, order[:, 0]]
    second = edge_vecs[rows, order[:, 1]]
    t1 = first / np.linalg.norm(first, axis=1, keepdims=True)
    t2 = second - np.einsum("ij,ij->i", second, t1)[:, None] * t1
    t2 /= np.linalg.norm(t2, axis=1, keepdims=True)
    flip = np.einsum("ij,ij->i", np.cross(t1, t2), n_h) < 0
    t2[flip] *= -1.0

    jac = np.empty((len(x), 2, 2))
    jac[:, 0, 0] = np.einsum("ij,ij->i", t1, e1)
    jac[:, 0, 1] = np.einsum("ij,ij->i", t1, e2)
    jac[:, 1, 0] = np.einsum("ij,ij->i", t2, e1)
    jac[:, 1, 1] = np.einsum("ij,ij->i", t2, e2)
    return FacetFrame(x[:, 0].copy(), t1, t2, n_h, jac, np.linalg.inv(jac))


@dataclass(frozen=True)
class FacetOperators:
    """Per-face tangential data of the P2 basis.

    ``lambda_grads[f, i]`` is the (constant, tangential) gradient of barycentric
    coordinate ``i``; ``laplacians[f, j]`` the constant facet Laplacian of basis
    function ``j``.
    """

    lambda_grads: np.ndarray
    laplacians: np.ndarray

    def gradients(self, barycentric, faces=None) -> np.ndarray:
        """Tangential gradients of the six basis functions.

        ``barycentric`` has shape ``(Q, 3)`` (same points on every face) or
        ``(F, Q, 3)``. Returns shape ``(F, Q, 6, 3)``.
        """
        g = self.lambda_grads if faces is None else self.lambda_grads[faces]
        lam = np.asarray(barycentric, dtype=float)
        if lam.ndim == 2:
            lam = np.broadcast_to(lam, (len(g),) + lam.shape)
        l = lam[..., :, None]  # (F, Q, 3, 1)
        G = g[:, None, :, :]  # (F, 1, 3, 3)
        out = np.empty(lam.shape[:2] + (6, 3))
        out[:, :, :3] = (4.0 * l - 1.0) * G
        for k, (i, j) in enumerate(OPPOSITE):
            out[:, :, 3 + k] = 4.0 * (l[:, :, i] * G[:, :, j] + l[:, :, j] * G[:, :, i])
        return out


def facet_operators(frames: FacetFrame) -> FacetOperators:
    # in-plane gradients of the barycentric coordinates: J^{-T} grad_ref
    G = np.einsum("fki,kl->fil", frames.jacobian_inv, _REF_LAMBDA_GRAD)  # (F, 2, 3)
    lambda_grads = G[:, 0, :, None] * frames.t1[:, None, :] + G[:, 1, :, None] * frames.t2[:, None, :]
    # Gram matrix of the barycentric gradients in 2-D coordinates (exactly tangential)
    gram = np.einsum("fai,faj->fij", G, G)
    lap = np.empty((len(G), 6))
    lap[:, :3] = 4.0 * np.einsum("fii->fi", gram)
    for k, (i, j) in enumerate(OPPOSITE):
        lap[:, 3 + k] = 8.0 * gram[:, i, j]
    return FacetOperators(lambda_grads, lap)


def physical_points(mesh: TriangleMesh, barycentric) -> np.ndarray:
    """Map barycentric points (shape ``(Q, 3)``) to every face; returns ``(F, Q, 3)``."""
    return np.einsum("qi,fij->fqj", np.asarray(barycentric, dtype=float), mesh.corners())


def evaluate(coeffs, dofmap: DofMap, barycentric) -> np.ndarray:
    """Values of a P2 function at barycentric points on every face, shape ``(F, Q)``."""
    values, _ = reference_p2(barycentric)
    return np.einsum("qj,fj->fq", values, np.asarray(coeffs)[dofmap.face_dofs])


def interpolate(mesh: TriangleMesh, adjacency: EdgeAdjacency, func) -> np.ndarray:
    """Nodal P2 interpolant of ``func`` evaluated at vertices and edge midpoints of ``Gamma_h``."""
    nodes = np.vstack([mesh.vertices, adjacency.midpoints])
    return np.asarray(func(nodes), dtype=float)

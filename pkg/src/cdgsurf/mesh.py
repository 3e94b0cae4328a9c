"""Triangulations of closed surfaces with all vertices on the surface."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateFace, NonManifoldEdge
from .geometry import ImplicitSurface, Sphere, Torus, closest_point, normal

# local vertex pairs of the edge opposite local vertex k
OPPOSITE = np.array([[1, 2], [2, 0], [0, 1]])


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Flat-faceted surface ``Gamma_h``.

    Faces are counter-clockwise seen from outside, so ``(v1 - v0) x (v2 - v0)``
    points along the exterior normal of the surface.
    """

    vertices: np.ndarray
    faces: np.ndarray
    surface: ImplicitSurface

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def corners(self) -> np.ndarray:
        """Vertex coordinates per face, shape ``(F, 3, 3)``."""
        return self.vertices[self.faces]

    def face_area_vectors(self) -> np.ndarray:
        x = self.corners()
        return 0.5 * np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0])


@dataclass(frozen=True, eq=False)
class EdgeAdjacency:
    """Edge-to-face incidence with conormals, stored as arrays over edges.

    ``faces[e] = (K+, K-)``; ``local[e, s]`` is the local index of the vertex
    opposite edge ``e`` in face ``faces[e, s]``. ``conormals[e, s]`` is the unit
    outward in-plane normal of that face along the edge and ``edge_normal`` the
    combination ``(nu+ - nu-) / (1 - nu+ . nu-)``.
    """

    edges: np.ndarray
    faces: np.ndarray
    local: np.ndarray
    face_edges: np.ndarray
    lengths: np.ndarray
    midpoints: np.ndarray
    conormals: np.ndarray
    edge_normal: np.ndarray
    face_normals: np.ndarray
    face_areas: np.ndarray
    face_origins: np.ndarray = field(repr=False)

    @property
    def n_edges(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class MeshStats:
    h: float
    ndof: int
    n_vertices: int
    n_edges: int
    n_faces: int

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_faces


def _icosahedron():
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
            (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
            (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
        ],
        dtype=float,
    )
    faces = np.array(
        [
            (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
            (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
            (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
            (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
        ]
    )
    return verts / np.linalg.norm(verts, axis=1, keepdims=True), faces


def _unique_edges(faces):
    """Sorted unique edges and, per face, the index of the edge opposite each local vertex."""
    pairs = faces[:, OPPOSITE].reshape(-1, 2)
    pairs = np.sort(pairs, axis=1)
    edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
    return edges, inverse.reshape(len(faces), 3)


def _subdivide(verts, faces):
    edges, face_edges = _unique_edges(faces)
    mids = 0.5 * (verts[edges[:, 0]] + verts[edges[:, 1]])
    mids /= np.linalg.norm(mids, axis=1, keepdims=True)
    m = len(verts) + face_edges  # m[:, k] is the midpoint opposite local vertex k
    v0, v1, v2 = faces.T
    m12, m20, m01 = m.T
    new_faces = np.concatenate(
        [
            np.column_stack([v0, m01, m20]),
            np.column_stack([v1, m12, m01]),
            np.column_stack([v2, m20, m12]),
            np.column_stack([m01, m12, m20]),
        ]
    )
    return np.vstack([verts, mids]), new_faces


def _sphere_mesh(surface: Sphere, resolution: int):
    verts, faces = _icosahedron()
    for _ in range(resolution):
        verts, faces = _subdivide(verts, faces)
    return surface.radius * verts, faces


def torus_grid_shape(resolution: int) -> tuple[int, int]:
    """Number of (tube, ring) subdivisions for a torus mesh of the given resolution."""
    return 3 * 2**resolution, 5 * 2**resolution


def _torus_mesh(surface: Torus, resolution: int):
    R, r = surface.major_radius, surface.minor_radius
    n_theta, n_phi = torus_grid_shape(resolution)
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    T, F = np.meshgrid(theta, phi, indexing="ij")
    w = R + r * np.cos(T)
    verts = np.column_stack(
        [(w * np.cos(F)).ravel(), (w * np.sin(F)).ravel(), (r * np.sin(T)).ravel()]
    )

    i, j = np.meshgrid(np.arange(n_theta), np.arange(n_phi), indexing="ij")
    i, j = i.ravel(), j.ravel()
    ip, jp = (i + 1) % n_theta, (j + 1) % n_phi
    a = i * n_phi + j
    b = ip * n_phi + j
    c = ip * n_phi + jp
    d = i * n_phi + jp
    diag_ac = np.linalg.norm(verts[a] - verts[c], axis=1)
    diag_bd = np.linalg.norm(verts[b] - verts[d], axis=1)
    use_ac = diag_ac <= diag_bd * (1.0 + 1e-12)
    faces = np.where(
        use_ac[:, None, None],
        np.stack([np.column_stack([a, b, c]), np.column_stack([a, c, d])], axis=1),
        np.stack([np.column_stack([a, b, d]), np.column_stack([b, c, d])], axis=1),
    ).reshape(-1, 3)
    return verts, faces


def _orient_outward(verts, faces, surface):
    x = verts[faces]
    area_vec = np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0])
    n_exact = normal(surface, x.mean(axis=1))
    flip = np.einsum("ij,ij->i", area_vec, n_exact) < 0
    faces = faces.copy()
    faces[flip] = faces[flip][:, [0, 2, 1]]
    return faces


def generate_mesh(surface: ImplicitSurface, resolution: int) -> TriangleMesh:
    """Structured mesh family.

    Sphere: icosahedron refined ``resolution`` times by midpoint subdivision,
    new vertices pushed radially onto the sphere. Torus: a ``3*2**k x 5*2**k``
    grid in (tube angle, ring angle), each quad cut along its shorter diagonal.
    """
    if resolution < 0:
        raise ValueError("resolution must be non-negative")
    if isinstance(surface, Sphere):
        verts, faces = _sphere_mesh(surface, resolution)
    elif isinstance(surface, Torus):
        verts, faces = _torus_mesh(surface, resolution)
    else:
        raise TypeError(f"unsupported surface {surface!r}")
    faces = _orient_outward(verts, faces, surface)
    return TriangleMesh(verts, faces.astype(np.int64), surface)


def edge_lengths(mesh: TriangleMesh) -> np.ndarray:
    edges, _ = _unique_edges(mesh.faces)
    return np.linalg.norm(mesh.vertices[edges[:, 0]] - mesh.vertices[edges[:, 1]], axis=1)


def perturb_vertices(mesh: TriangleMesh, amplitude: float = 0.2, seed: int = 0) -> TriangleMesh:
    """Move every vertex by a random tangential step, then project it back onto the surface.

    The step is uniform on a tangent disk of radius ``amplitude`` times the
    shortest edge at that vertex (never more than ``amplitude * h``), so
    graded meshes such as the torus grid keep their small faces valid.
    Randomness comes from numpy's PCG64 generator seeded with ``seed``.

    Raises
    ------
    DegenerateFace
        If a face ends up with area below ``1e-3 * h**2 / 2``.
    """
    if not 0.0 <= amplitude <= 0.3:
        raise ValueError(f"amplitude must lie in [0, 0.3], got {amplitude}")
    if amplitude == 0.0:
        return mesh
    edges, _ = _unique_edges(mesh.faces)
    lengths = np.linalg.norm(mesh.vertices[edges[:, 0]] - mesh.vertices[edges[:, 1]], axis=1)
    h = lengths.max()
    nv = mesh.n_vertices
    local_h = np.full(nv, np.inf)
    np.minimum.at(local_h, edges[:, 0], lengths)
    np.minimum.at(local_h, edges[:, 1], lengths)
    rng = np.random.Generator(np.random.PCG64(seed))
    radius = amplitude * local_h * np.sqrt(rng.random(nv))
    angle = 2.0 * np.pi * rng.random(nv)

    n = normal(mesh.surface, mesh.vertices)
    helper = np.where(np.abs(n[:, [0]]) < 0.9, [[1.0, 0.0, 0.0]], [[0.0, 1.0, 0.0]])
    t1 = helper - np.einsum("ij,ij->i", helper, n)[:, None] * n
    t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
    t2 = np.cross(n, t1)
    step = radius[:, None] * (np.cos(angle)[:, None] * t1 + np.sin(angle)[:, None] * t2)
    verts = closest_point(mesh.surface, mesh.vertices + step)

    moved = TriangleMesh(verts, mesh.faces, mesh.surface)
    area_vec = moved.face_area_vectors()
    n_exact = normal(mesh.surface, moved.corners().mean(axis=1))
    signed_area = np.einsum("ij,ij->i", area_vec, n_exact)
    if np.any(signed_area < 1e-3 * 0.5 * h**2):
        raise DegenerateFace(
            f"perturbation amplitude {amplitude} collapsed a face "
            f"(min signed area {signed_area.min():.3e})"
        )
    return moved


def build_adjacency(mesh: TriangleMesh) -> EdgeAdjacency:
    """Pair every edge with its two faces and compute facet normals and conormals.

    Raises
    ------
    NonManifoldEdge
        If some edge is not shared by exactly two faces.
    """
    faces = mesh.faces
    nf = len(faces)
    edges, face_edges = _unique_edges(faces)
    ne = len(edges)

    flat = face_edges.ravel()
    counts = np.bincount(flat, minlength=ne)
    if np.any(counts != 2):
        bad = int(np.flatnonzero(counts != 2)[0])
        raise NonManifoldEdge(
            f"edge {tuple(edges[bad])} has {counts[bad]} incident faces, expected 2"
        )
    order = np.argsort(flat, kind="stable")
    slot_face = order // 3
    slot_local = order % 3
    edge_faces = slot_face.reshape(ne, 2)
    edge_local = slot_local.reshape(ne, 2)

    x = mesh.corners()
    area_vec = 0.5 * np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0])
    areas = np.linalg.norm(area_vec, axis=1)
    face_normals = area_vec / areas[:, None]

    va = mesh.vertices[edges[:, 0]]
    vb = mesh.vertices[edges[:, 1]]
    tangent = vb - va
    lengths = np.linalg.norm(tangent, axis=1)
    tangent /= lengths[:, None]

    conormals = np.empty((ne, 2, 3))
    for s in range(2):
        f = edge_faces[:, s]
        nu = np.cross(tangent, face_normals[f])
        opposite_vertex = x[f, edge_local[:, s]]
        inward = np.einsum("ij,ij->i", nu, opposite_vertex - va) > 0
        nu[inward] *= -1.0
        conormals[:, s] = nu / np.linalg.norm(nu, axis=1, keepdims=True)

    nu_p, nu_m = conormals[:, 0], conormals[:, 1]
    denom = 1.0 - np.einsum("ij,ij->i", nu_p, nu_m)
    edge_normal = (nu_p - nu_m) / denom[:, None]

    return EdgeAdjacency(
        edges=edges,
        faces=edge_faces,
        local=edge_local,
        face_edges=face_edges,
        lengths=lengths,
        midpoints=0.5 * (va + vb),
        conormals=conormals,
        edge_normal=edge_normal,
        face_normals=face_normals,
        face_areas=areas,
        face_origins=x[:, 0].copy(),
    )


def mesh_size(mesh: TriangleMesh) -> MeshStats:
    edges, _ = _unique_edges(mesh.faces)
    lengths = np.linalg.norm(mesh.vertices[edges[:, 0]] - mesh.vertices[edges[:, 1]], axis=1)
    return MeshStats(
        h=float(lengths.max()),
        ndof=mesh.n_vertices + len(edges),
        n_vertices=mesh.n_vertices,
        n_edges=len(edges),
        n_faces=mesh.n_faces,
    )


def surface_area(mesh: TriangleMesh) -> float:
    return float(np.linalg.norm(mesh.face_area_vectors(), axis=1).sum())


def write_off(mesh: TriangleMesh, path) -> None:
    """Write the mesh as an ASCII OFF file."""
    stats = mesh_size(mesh)
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{stats.n_vertices} {stats.n_faces} {stats.n_edges}\n")
        for v in mesh.vertices:
            fh.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for f in mesh.faces:
            fh.write(f"3 {f[0]} {f[1]} {f[2]}\n")


import numpy as np
import pytest

from cdgsurf import (
    DegenerateFace,
    NonManifoldEdge,
    Sphere,
    Torus,
    TriangleMesh,
    build_adjacency,
    generate_mesh,
    mesh_size,
    perturb_vertices,
    write_off,
)
from cdgsurf.geometry import normal, signed_distance
from cdgsurf.mesh import surface_area, torus_grid_shape
from cdgsurf.verify import fitted_slope

from conftest import flat_pillow


def test_icosahedron_counts(sphere):
    s = mesh_size(generate_mesh(sphere, 0))
    assert (s.n_vertices, s.n_faces, s.n_edges) == (12, 20, 30)
    assert s.euler_characteristic == 2
    assert s.h == pytest.approx(4 / np.sqrt(10 + 2 * np.sqrt(5)), rel=1e-14)
    assert s.ndof == 42


def test_torus_counts(torus):
    assert torus_grid_shape(1) == (6, 10)
    s = mesh_size(generate_mesh(torus, 1))
    assert (s.n_vertices, s.n_faces, s.n_edges) == (60, 120, 180)
    assert s.euler_characteristic == 0


# the first step from the raw icosahedron gives 0.588: projection stretches the
# central subtriangle
@pytest.mark.parametrize("k", [2, 3, 4, 5])
def test_sphere_refinement_halves_h(sphere, k):
    ratio = mesh_size(generate_mesh(sphere, k)).h / mesh_size(generate_mesh(sphere, k - 1)).h
    assert 0.45 <= ratio <= 0.55


def test_sphere_face_orientation(sphere):
    mesh = generate_mesh(sphere, 3)
    assert mesh.n_faces == 1280
    n_h = mesh.face_area_vectors()
    assert np.all(np.einsum("ij,ij->i", n_h, normal(sphere, mesh.corners().mean(axis=1))) > 0)


def test_torus_face_orientation(torus):
    mesh = generate_mesh(torus, 3)
    n_h = mesh.face_area_vectors()
    assert np.all(np.einsum("ij,ij->i", n_h, normal(torus, mesh.corners().mean(axis=1))) > 0)


@pytest.mark.parametrize("k", [0, 2])
def test_vertices_on_surface(sphere, torus, k):
    for surf in (sphere, torus):
        mesh = generate_mesh(surf, k + 1)
        assert np.abs(signed_distance(surf, mesh.vertices)).max() < 1e-14


def test_negative_resolution_rejected(sphere):
    with pytest.raises(ValueError):
        generate_mesh(sphere, -1)


@pytest.mark.parametrize("surf_name, levels", [("sphere", (1, 2, 3, 4)), ("torus", (1, 2, 3, 4))])
def test_area_converges_quadratically(sphere, torus, surf_name, levels):
    surf = sphere if surf_name == "sphere" else torus
    meshes = [generate_mesh(surf, k) for k in levels]
    errs = [abs(surface_area(m) - surf.area) for m in meshes]
    hs = [mesh_size(m).h for m in meshes]
    assert fitted_slope(errs, hs) >= 1.9


def test_mesh_size_idempotent(torus):
    mesh = generate_mesh(torus, 1)
    assert mesh_size(mesh) == mesh_size(mesh)


def test_perturb_zero_amplitude_identity(sphere):
    mesh = generate_mesh(sphere, 2)
    assert perturb_vertices(mesh, 0.0, 3) is mesh


def test_perturb_deterministic(sphere):
    mesh = generate_mesh(sphere, 2)
    a = perturb_vertices(mesh, 0.2, 11)
    b = perturb_vertices(mesh, 0.2, 11)
    np.testing.assert_array_equal(a.vertices, b.vertices)
    c = perturb_vertices(mesh, 0.2, 12)
    assert not np.array_equal(a.vertices, c.vertices)


def test_perturbed_vertices_stay_on_surface(sphere, torus):
    for surf, k in ((sphere, 3), (torus, 3)):
        moved = perturb_vertices(generate_mesh(surf, k), 0.2, 7)
        assert np.abs(signed_distance(surf, moved.vertices)).max() <= 1e-10


def test_perturb_amplitude_range(sphere):
    mesh = generate_mesh(sphere, 1)
    with pytest.raises(ValueError):
        perturb_vertices(mesh, 0.5, 0)
    with pytest.raises(ValueError):
        perturb_vertices(mesh, -0.1, 0)


def test_degenerate_face_detected(sphere):
    mesh = generate_mesh(sphere, 1)
    v = mesh.vertices.copy()
    f = mesh.faces[0]
    v[f[2]] = v[f[0]]  # collapse a face
    with pytest.raises(DegenerateFace):
        perturb_vertices(TriangleMesh(v, mesh.faces, sphere), 0.01, 0)


def test_adjacency_pairs_each_edge(torus):
    mesh = generate_mesh(torus, 2)
    adj = build_adjacency(mesh)
    assert adj.n_edges == mesh_size(mesh).n_edges
    for e in (0, 17, adj.n_edges - 1):
        for s in range(2):
            assert set(adj.edges[e]) <= set(mesh.faces[adj.faces[e, s]])
            assert mesh.faces[adj.faces[e, s], adj.local[e, s]] not in adj.edges[e]


def test_conormals_point_out_of_their_face(sphere):
    mesh = generate_mesh(sphere, 1)
    adj = build_adjacency(mesh)
    for s in range(2):
        centroid = mesh.corners()[adj.faces[:, s]].mean(axis=1)
        out = np.einsum("ij,ij->i", adj.conormals[:, s], adj.midpoints - centroid)
        assert np.all(out > 0)
        np.testing.assert_allclose(np.einsum("ij,ij->i", adj.conormals[:, s], adj.face_normals[adj.faces[:, s]]), 0, atol=1e-14)


def test_coplanar_edge_normal():
    with np.errstate(all="ignore"):
        adj = build_adjacency(flat_pillow())
    e = 1  # diagonal (0, 2)
    nu_p, nu_m = adj.conormals[e]
    assert nu_p @ nu_m == pytest.approx(-1.0)
    np.testing.assert_allclose(adj.edge_normal[e], nu_p, atol=1e-15)


def test_open_mesh_is_rejected():
    v = np.array([[0.0, 0, 1], [1, 0, 1], [0, 1, 1]])
    with pytest.raises(NonManifoldEdge):
        build_adjacency(TriangleMesh(v, np.array([[0, 1, 2]]), Sphere()))


def test_write_off(tmp_path, sphere):
    mesh = generate_mesh(sphere, 0)
    path = tmp_path / "ico.off"
    write_off(mesh, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "OFF"
    assert lines[1] == "12 20 30"
    np.testing.assert_array_equal(np.loadtxt(lines[2:14]), mesh.vertices)
    faces = np.loadtxt(lines[14:], dtype=int)
    assert np.all(faces[:, 0] == 3)
    np.testing.assert_array_equal(faces[:, 1:], mesh.faces)

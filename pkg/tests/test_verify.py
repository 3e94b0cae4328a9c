import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdgsurf import (
    ConvergenceReport,
    Discretization,
    NonPositive,
    Sphere,
    Torus,
    energy_error,
    eoc,
    generate_mesh,
    geometry_rates,
    l2_quotient_error,
    lift,
    lifting_diagnostic,
    perturb_vertices,
)
from cdgsurf.femspace import interpolate
from cdgsurf.geometry import normal
from cdgsurf.verify import (
    GEOMETRY_COLUMNS,
    ConvergenceRow,
    energy_norm,
    fitted_slope,
    lifted_energy_error,
)


def zfun(x):
    return x[:, 2]


def test_lift_projects_along_normal():
    assert lift(Sphere(), zfun, np.array([[0.0, 0.0, 2.0]]))[0] == pytest.approx(1.0)
    x = np.array([[1.0, 0.0, 0.0], [0.3, 0.4, np.sqrt(0.75)]])
    np.testing.assert_allclose(lift(Sphere(), zfun, x), x[:, 2])
    np.testing.assert_allclose(lift(Torus(), lambda y: np.full(len(y), 2.5), np.array([[1.7, 0.1, 0.2]])), 2.5)


def test_l2_error_of_exact_interpolant_is_small(sphere_disc2):
    disc = sphere_disc2
    c = interpolate(disc.mesh, disc.adjacency, lambda x: lift(disc.mesh.surface, zfun, x))
    assert l2_quotient_error(disc, c, zfun) < 1e-2


def test_l2_error_of_z_against_zero():
    disc = Discretization(generate_mesh(Sphere(), 4))
    err = l2_quotient_error(disc, np.zeros(disc.n_dofs), zfun)
    assert err == pytest.approx(math.sqrt(4 * math.pi / 3), rel=2e-3)


_SMALL = Discretization(generate_mesh(Sphere(), 1))


@settings(max_examples=25, deadline=None)
@given(st.floats(-1e3, 1e3, allow_nan=False))
def test_quotient_invariance(shift):
    disc = _SMALL
    c = interpolate(disc.mesh, disc.adjacency, lambda x: x[:, 0] * x[:, 1])
    base = l2_quotient_error(disc, c, zfun)
    assert l2_quotient_error(disc, c + shift, zfun) == pytest.approx(base, rel=1e-9, abs=1e-12)


def test_energy_error_of_interpolant_is_zero(sphere_disc2):
    disc = sphere_disc2
    pi_u = interpolate(disc.mesh, disc.adjacency, lambda x: lift(disc.mesh.surface, zfun, x))
    assert energy_error(disc, pi_u, zfun) == pytest.approx(0.0, abs=1e-14)


def test_energy_norm_kernel(sphere_disc2):
    assert energy_norm(sphere_disc2, np.full(sphere_disc2.n_dofs, 4.0)) < 1e-9


def test_lifted_energy_error_of_interpolant_is_order_h():
    errs, hs = [], []
    for k in (2, 3, 4):
        disc = Discretization(generate_mesh(Sphere(), k))
        c = interpolate(disc.mesh, disc.adjacency, lambda x: lift(disc.mesh.surface, zfun, x))
        errs.append(lifted_energy_error(disc, c, zfun))
        hs.append(disc.h)
    assert 0.8 <= fitted_slope(errs, hs) <= 1.3


@pytest.mark.parametrize(
    "errors, hs, expected",
    [((4e-2, 1e-2), (0.2, 0.1), 2.0), ((1e-1, 5e-2), (0.2, 0.1), 1.0), ((3e-3, 3e-3), (0.2, 0.1), 0.0)],
)
def test_eoc_examples(errors, hs, expected):
    assert eoc(errors, hs)[0] == pytest.approx(expected, abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.5, 4.0), st.floats(1e-3, 1e3))
def test_eoc_recovers_power(p, C):
    hs = [0.4, 0.21, 0.1, 0.052]
    errs = [C * h**p for h in hs]
    np.testing.assert_allclose(eoc(errs, hs), p, atol=1e-12)
    assert fitted_slope(errs, hs) == pytest.approx(p, abs=1e-12)


def test_eoc_rejects_nonpositive():
    with pytest.raises(NonPositive):
        eoc([1e-2, 0.0], [0.2, 0.1])
    with pytest.raises(NonPositive):
        fitted_slope([1e-2, -1.0], [0.2, 0.1])
    with pytest.raises(ValueError):
        eoc([1e-2], [0.2])


@pytest.mark.parametrize("surface", [Sphere(), Torus()])
@pytest.mark.parametrize("perturbed", [False, True])
def test_geometry_rates(surface, perturbed):
    meshes = [generate_mesh(surface, k) for k in (1, 2, 3, 4)]
    if perturbed:
        meshes = [perturb_vertices(m, 0.2, 7) for m in meshes]
    s = geometry_rates(meshes).slopes
    assert s["max_d"] >= 1.9
    assert 0.9 <= s["max_n_diff"] <= 1.5
    assert s["max_one_ndot"] >= 1.9
    assert s["max_mu"] >= 1.9
    assert s["max_conormal"] >= 1.9


def test_geometry_rates_single_level_has_no_slopes():
    rates = geometry_rates([generate_mesh(Sphere(), 1)])
    assert rates.slopes is None
    lines = rates.to_csv().splitlines()
    assert lines[0] == "h," + ",".join(GEOMETRY_COLUMNS)
    assert len(lines) == 2


def _sphere_grad_z(p):
    n = normal(Sphere(), p)
    return np.array([0.0, 0.0, 1.0]) - n[:, 2:3] * n


def _torus_grad_sinphi(p):
    s = np.hypot(p[:, 0], p[:, 1])
    e_phi = np.column_stack([-p[:, 1] / s, p[:, 0] / s, np.zeros(len(p))])
    return (p[:, 0] / s / s)[:, None] * e_phi


def test_lifting_diagnostic_constant(sphere_disc2):
    assert lifting_diagnostic(sphere_disc2, lambda y: np.ones(len(y)), lambda y: np.zeros_like(y)) < 1e-12


def test_lifting_diagnostic_sphere(sphere_disc2):
    assert lifting_diagnostic(sphere_disc2, zfun, _sphere_grad_z) <= 1e-8


def test_lifting_diagnostic_torus(torus_disc2):
    sinphi = lambda y: y[:, 1] / np.hypot(y[:, 0], y[:, 1])
    assert lifting_diagnostic(torus_disc2, sinphi, _torus_grad_sinphi) <= 1e-7


def test_report_csv_and_order():
    rep = ConvergenceReport()
    rep.add(ConvergenceRow(1, 0.4, 100, 4e-2, 1.0))
    rep.add(ConvergenceRow(2, 0.2, 400, 1e-2, 0.5))
    lines = rep.to_csv().splitlines()
    assert lines[0] == "level,h,ndof,l2_error,energy_error,eoc_l2,eoc_energy"
    assert lines[1].endswith(",nan,nan")
    assert lines[2].split(",")[5] == "2.0000000000e+00"
    assert rep.slope() == pytest.approx(2.0)
    with pytest.raises(ValueError):
        rep.add(ConvergenceRow(3, 0.3, 900, 1e-3, 0.1))

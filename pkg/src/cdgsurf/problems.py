"""Model problems on the unit sphere and on the (R=1, r=0.6) torus."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import ImplicitSurface, Sphere, Torus, closest_point

LOAD_SOURCES = ("oracle", "paper")


@dataclass(frozen=True)
class ModelProblem:
    """Exact solution and load; both callables take points of shape ``(N, 3)``."""

    name: str
    surface: ImplicitSurface
    u_exact: Callable[[np.ndarray], np.ndarray]
    f_load: Callable[[np.ndarray], np.ndarray]
    load_source: str


def sphere_angles(surface: Sphere, x):
    """Polar angle ``theta`` (from +z) and azimuth ``phi`` of the projection of ``x``."""
    y = closest_point(surface, np.atleast_2d(x)) / surface.radius
    theta = np.arccos(np.clip(y[:, 2], -1.0, 1.0))
    phi = np.arctan2(y[:, 1], y[:, 0])
    return theta, phi


def torus_angles(surface: Torus, x):
    """Tube angle ``theta`` and ring angle ``phi`` with ``z = r sin(theta)``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    s = np.hypot(x[:, 0], x[:, 1])
    theta = np.arctan2(x[:, 2], s - surface.major_radius)
    phi = np.arctan2(x[:, 1], x[:, 0])
    return theta, phi


def torus_point(surface: Torus, theta, phi):
    R, r = surface.major_radius, surface.minor_radius
    w = R + r * np.cos(theta)
    return np.stack([w * np.cos(phi), w * np.sin(phi), r * np.sin(theta) * np.ones_like(phi)], axis=-1)


def sphere_point(surface: Sphere, theta, phi):
    rho = surface.radius
    return rho * np.stack(
        [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta) * np.ones_like(phi)],
        axis=-1,
    )


def paper_sphere_load(r, phi, theta):
    """Sphere load exactly as printed with the model problem."""
    return -12.0 * r**-2 * np.sin(phi) * np.sin(theta) ** 3 * (4.0 * np.sin(phi) ** 2 - 3.0)


def loadfcn(r, phi, th, R=1.0):
    """Port of the published torus load routine; ``R`` is the ring radius it leaves unbound."""
    sin, cos = np.sin, np.cos
    f = (9*r**4*sin(2*phi + th) + 491*r**4*sin(4*phi + th) + 324*R**4*sin(2*phi - 3*th) +
         324*R**4*sin(4*phi + 3*th) + 179*r**4*sin(2*phi - th) + 313*r**4*sin(2*phi - 3*th) +
         9*r**4*sin(4*phi - th) + 179*r**4*sin(2*phi - 5*th) + 1561*r**4*sin(4*phi + 3*th) +
         36*r**4*sin(2*phi - 7*th) + 347*r**4*sin(4*phi + 5*th) + 36*r**4*sin(4*phi + 7*th) +
         366*R**2*r**2*sin(2*phi - th) + 1386*R**2*r**2*sin(2*phi - 3*th) +
         696*R**2*r**2*sin(2*phi - 5*th) + 2250*R**2*r**2*sin(4*phi + 3*th) +
         696*R**2*r**2*sin(4*phi + 5*th) + 99*R*r**3*sin(2*phi) + 821*R*r**3*sin(2*phi - 2*th) +
         570*R**3*r*sin(2*phi - 2*th) + 875*R*r**3*sin(2*phi - 4*th) +
         1781*R*r**3*sin(4*phi + 2*th) + 798*R**3*r*sin(2*phi - 4*th) +
         570*R**3*r*sin(4*phi + 2*th) + 261*R*r**3*sin(2*phi - 6*th) +
         1547*R*r**3*sin(4*phi + 4*th) + 798*R**3*r*sin(4*phi + 4*th) +
         261*R*r**3*sin(4*phi + 6*th) + 366*R**2*r**2*sin(4*phi + th) +
         198*R*r**3*cos(2*phi)*sin(2*phi))/(8*R**4*r**4 + 32*R**3*r**5*cos(th) +
         48*R**2*r**6*cos(th)**2 + 32*R*r**7*cos(th)**3 + 8*r**8*cos(th)**4)  # fmt: skip
    return f


# --- finite-difference Laplace-Beltrami in surface parameters ------------------

# fourth-order central stencils (offsets -2..2)
_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
_OFFSETS = np.arange(-2, 3)


def _fd_partials(g, a, b, step):
    """``(g_a, g_aa, g_b, g_bb)`` by 4th-order central differences."""
    ga = sum(c * g(a + k * step, b) for c, k in zip(_D1, _OFFSETS) if c != 0.0) / step
    gaa = sum(c * g(a + k * step, b) for c, k in zip(_D2, _OFFSETS)) / step**2
    gb = sum(c * g(a, b + k * step) for c, k in zip(_D1, _OFFSETS) if c != 0.0) / step
    gbb = sum(c * g(a, b + k * step) for c, k in zip(_D2, _OFFSETS)) / step**2
    return ga, gaa, gb, gbb


def _lb_from_partials(surface, a, partials):
    ga, gaa, gb, gbb = partials
    if isinstance(surface, Torus):
        R, r = surface.major_radius, surface.minor_radius
        w = R + r * np.cos(a)
        return gaa / r**2 - np.sin(a) / (r * w) * ga + gbb / w**2
    rho = surface.radius
    return (gaa + np.cos(a) / np.sin(a) * ga + gbb / np.sin(a) ** 2) / rho**2


def fd_laplace_beltrami(surface: ImplicitSurface, g, step: float = 2e-2):
    """Return ``(a, b) -> Delta_Gamma g`` in surface parameters by finite differences.

    Parameters are (tube angle, ring angle) on the torus and (polar angle,
    azimuth) on the sphere. Fourth-order stencils at ``step`` and ``step / 2``
    are combined by Richardson extrapolation. Nesting two of these amplifies
    rounding by ``step**-4``, so steps much below ``1e-2`` lose accuracy.
    """

    def lap(a, b):
        coarse = _lb_from_partials(surface, a, _fd_partials(g, a, b, step))
        fine = _lb_from_partials(surface, a, _fd_partials(g, a, b, 0.5 * step))
        return (16.0 * fine - coarse) / 15.0

    return lap


def fd_bilaplacian(surface: ImplicitSurface, g, step: float = 2e-2):
    return fd_laplace_beltrami(surface, fd_laplace_beltrami(surface, g, step), step)


# --- the two model problems ----------------------------------------------------


def sphere_problem(load_source: str = "oracle", radius: float = 1.0) -> ModelProblem:
    """Sphere with ``u = r^-3 (3 x^2 y - y^3)``, a degree-3 spherical harmonic.

    ``load_source="oracle"`` uses ``Delta^2 u = 144 r^-4 u``; ``"paper"`` uses
    the formula printed with the model problem, which equals ``-Delta u``
    and therefore does not produce this ``u``.
    """
    surface = Sphere(radius)

    def u_exact(x):
        y = closest_point(surface, np.atleast_2d(x))
        return (3.0 * y[:, 0] ** 2 * y[:, 1] - y[:, 1] ** 3) / radius**3

    if load_source == "oracle":

        def f_load(x):
            return 144.0 / radius**4 * u_exact(x)

    elif load_source == "paper":

        def f_load(x):
            theta, phi = sphere_angles(surface, x)
            return paper_sphere_load(radius, phi, theta)

    else:
        raise ValueError(f"load_source must be one of {LOAD_SOURCES}, got {load_source!r}")
    return ModelProblem("sphere", surface, u_exact, f_load, load_source)


def torus_u(theta, phi):
    return np.sin(3.0 * phi) * np.cos(3.0 * theta + phi)


def torus_problem(load_source: str = "oracle", major_radius: float = 1.0, minor_radius: float = 0.6) -> ModelProblem:
    """Torus with ``u = sin(3 phi) cos(3 theta + phi)``.

    ``"paper"`` evaluates the ported load routine; ``"oracle"`` applies the
    finite-difference Laplace-Beltrami operator twice to ``u``.
    """
    surface = Torus(major_radius, minor_radius)
    R, r = major_radius, minor_radius

    def u_exact(x):
        theta, phi = torus_angles(surface, x)
        return torus_u(theta, phi)

    if load_source == "paper":

        def f_load(x):
            theta, phi = torus_angles(surface, x)
            return loadfcn(r, phi, theta, R=R)

    elif load_source == "oracle":
        bilap = fd_bilaplacian(surface, torus_u)

        def f_load(x):
            theta, phi = torus_angles(surface, x)
            return bilap(theta, phi)

    else:
        raise ValueError(f"load_source must be one of {LOAD_SOURCES}, got {load_source!r}")
    return ModelProblem("torus", surface, u_exact, f_load, load_source)


PROBLEMS = {"sphere": sphere_problem, "torus": torus_problem}


def get_problem(name: str, load_source: str = "oracle") -> ModelProblem:
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
    return factory(load_source)

"""Analytic implicit surfaces: signed distance, normal, Weingarten map, closest point.

All functions accept a single point of shape ``(3,)`` or a batch of shape
``(N, 3)`` and return arrays with the matching leading shape.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .exceptions import AxisPoint, NonPositiveMeasure, OutsideNeighborhood

# fraction of the tube (sphere) radius admitted as |d| inside U
NEIGHBORHOOD_MARGIN = 0.99


@dataclass(frozen=True)
class Sphere:
    radius: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"sphere radius must be positive, got {self.radius}")

    @property
    def area(self) -> float:
        return 4.0 * np.pi * self.radius**2

    @property
    def genus(self) -> int:
        return 0


@dataclass(frozen=True)
class Torus:
    major_radius: float = 1.0
    minor_radius: float = 0.6

    def __post_init__(self):
        if not 0 < self.minor_radius < self.major_radius:
            raise ValueError(
                "torus radii must satisfy 0 < minor < major, got "
                f"R={self.major_radius}, r={self.minor_radius}"
            )

    @property
    def area(self) -> float:
        return 4.0 * np.pi**2 * self.major_radius * self.minor_radius

    @property
    def genus(self) -> int:
        return 1


ImplicitSurface = Union[Sphere, Torus]


@dataclass(frozen=True)
class SurfaceJet:
    """Signed distance ``d``, normal ``n = grad d``, Hessian ``H`` and closest point ``p``."""

    d: np.ndarray
    n: np.ndarray
    H: np.ndarray
    p: np.ndarray

    @property
    def P(self) -> np.ndarray:
        """Tangential projector ``I - n n^T``."""
        return np.eye(3) - self.n[..., :, None] * self.n[..., None, :]


def _as_points(x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    return np.atleast_2d(x), single


def _unbatch(single, *arrays):
    if single:
        arrays = tuple(a[0] for a in arrays)
    return arrays if len(arrays) > 1 else arrays[0]


def _sphere_parts(surface: Sphere, x):
    rad = np.linalg.norm(x, axis=1)
    d = rad - surface.radius
    # the projection is unique everywhere except the center
    if np.any(d <= -NEIGHBORHOOD_MARGIN * surface.radius):
        raise OutsideNeighborhood("point too close to the sphere center")
    n = x / rad[:, None]
    return rad, d, n


def _torus_parts(surface: Torus, x):
    R, r = surface.major_radius, surface.minor_radius
    s = np.hypot(x[:, 0], x[:, 1])
    if np.any(s <= 1e-14 * R):
        raise AxisPoint("point lies on the torus symmetry axis")
    e_s = np.column_stack([x[:, 0] / s, x[:, 1] / s, np.zeros_like(s)])
    q_s = s - R
    q_z = x[:, 2]
    rho = np.hypot(q_s, q_z)
    d = rho - r
    if np.any(np.abs(d) >= NEIGHBORHOOD_MARGIN * r):
        raise OutsideNeighborhood("point too far from the torus tube")
    cos_a = q_s / rho
    sin_a = q_z / rho
    n = cos_a[:, None] * e_s
    n[:, 2] += sin_a
    return s, e_s, rho, d, n, cos_a, sin_a


def surface_jet(surface: ImplicitSurface, x) -> SurfaceJet:
    """Evaluate ``d``, ``grad d``, ``hess d`` and the closest point at ``x``.

    Raises
    ------
    OutsideNeighborhood
        Sphere: if ``x`` lies within ``0.01 * radius`` of the center.
        Torus: if ``|d(x)| >= 0.99 * minor_radius`` or ``x`` sits on the
        symmetry axis.
    """
    x, single = _as_points(x)
    if isinstance(surface, Sphere):
        rad, d, n = _sphere_parts(surface, x)
        H = (np.eye(3) - n[:, :, None] * n[:, None, :]) / rad[:, None, None]
        p = surface.radius * n
    elif isinstance(surface, Torus):
        R, r = surface.major_radius, surface.minor_radius
        s, e_s, rho, d, n, cos_a, sin_a = _torus_parts(surface, x)
        # tube-meridian tangent and toroidal direction
        m = -sin_a[:, None] * e_s
        m[:, 2] += cos_a
        e_phi = np.column_stack([-e_s[:, 1], e_s[:, 0], np.zeros_like(s)])
        H = (m[:, :, None] * m[:, None, :]) / rho[:, None, None] + (
            e_phi[:, :, None] * e_phi[:, None, :]
        ) * (cos_a / s)[:, None, None]
        ring = R * e_s
        p = ring + r * n
    else:
        raise TypeError(f"unsupported surface {surface!r}")
    return SurfaceJet(*_unbatch(single, d, n, H, p)) if single else SurfaceJet(d, n, H, p)


def signed_distance(surface: ImplicitSurface, x):
    return surface_jet(surface, x).d


def closest_point(surface: ImplicitSurface, x):
    return surface_jet(surface, x).p


def normal(surface: ImplicitSurface, x):
    return surface_jet(surface, x).n


def principal_curvatures(surface: ImplicitSurface, y):
    """Principal curvatures at points ``y`` on the surface (the nonzero eigenvalues of ``H``)."""
    y, single = _as_points(y)
    if isinstance(surface, Sphere):
        k = np.full(len(y), 1.0 / surface.radius)
        out = (k, k.copy())
    else:
        R, r = surface.major_radius, surface.minor_radius
        _, _, _, _, _, cos_a, _ = _torus_parts(surface, y)
        out = (np.full(len(y), 1.0 / r), cos_a / (R + r * cos_a))
    return _unbatch(single, *out)


def extended_curvatures(surface: ImplicitSurface, x):
    """Curvatures extended off the surface: ``k(p) / (1 + d k(p))`` for each principal direction."""
    x, single = _as_points(x)
    jet = surface_jet(surface, x)
    k1, k2 = principal_curvatures(surface, jet.p)
    k1 = k1 / (1.0 + jet.d * k1)
    k2 = k2 / (1.0 + jet.d * k2)
    return _unbatch(single, k1, k2)


def measure_ratio(surface: ImplicitSurface, x, n_h, check: bool = True):
    """Ratio ``mu_h`` with ``mu_h ds_h = ds o p`` for points ``x`` on a facet with unit normal ``n_h``.

    Raises
    ------
    NonPositiveMeasure
        If any ratio is ``<= 0`` and ``check`` is set.
    """
    x, single = _as_points(x)
    n_h = np.broadcast_to(np.asarray(n_h, dtype=float), x.shape)
    jet = surface_jet(surface, x)
    k1, k2 = extended_curvatures(surface, x)
    mu = np.einsum("ij,ij->i", jet.n, n_h) * (1.0 - jet.d * k1) * (1.0 - jet.d * k2)
    if check and np.any(mu <= 0):
        raise NonPositiveMeasure(
            f"surface measure ratio {mu.min():.3e} <= 0; mesh too coarse for the surface"
        )
    return _unbatch(single, mu)

"""Error norms, convergence rates and numerical checks of the geometric estimates."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .assembly import Discretization
from .exceptions import NonPositive
from .femspace import evaluate, interpolate
from .geometry import ImplicitSurface, closest_point, measure_ratio, surface_jet
from .mesh import TriangleMesh

FD_STEP = 1e-6


def lift(surface: ImplicitSurface, g, x):
    """Extension of a surface function constant along normals: ``g(p(x))``."""
    return g(closest_point(surface, x))


def _lifted_at_quadrature(disc: Discretization, func) -> np.ndarray:
    pts = disc.quad_points
    vals = lift(disc.mesh.surface, func, pts.reshape(-1, 3))
    return np.asarray(vals, dtype=float).reshape(pts.shape[:2])


def l2_quotient_error(disc: Discretization, u_coeffs, u_exact) -> float:
    """``|| u o p - u_h ||`` in ``L2(Gamma_h)`` modulo constants."""
    e = _lifted_at_quadrature(disc, u_exact) - evaluate(u_coeffs, disc.dofmap, disc.tri_rule.points)
    W = disc.quad_weights
    e_mean = np.sum(W * e) / np.sum(W)
    return float(np.sqrt(np.sum(W * (e - e_mean) ** 2)))


def energy_norm(disc: Discretization, coeffs) -> float:
    """Discrete energy norm with the global mesh size ``h``.

    Edge terms are integrated over every element boundary, so each interior
    edge contributes once from each side.
    """
    c = np.asarray(coeffs, dtype=float)
    h = disc.h
    lap = np.einsum("fj,fj->f", disc.ops.laplacians, c[disc.dofmap.face_dofs])
    face_term = np.sum(disc.areas * lap**2)
    ce = c[disc.edge_dofs]
    avg = np.einsum("ej,ej->e", disc.edge_averages, ce)
    jump = np.einsum("eqj,ej->eq", disc.edge_jumps, ce)
    W = disc.edge_weights
    avg_term = np.sum(W * avg[:, None] ** 2)
    jump_term = np.sum(W * jump**2)
    return float(np.sqrt(face_term + 2.0 * (h * avg_term + jump_term / h)))


def energy_error(disc: Discretization, u_coeffs, u_exact) -> float:
    """Energy norm of ``pi u - u_h`` with ``pi`` the nodal P2 interpolant of ``u o p``."""
    pi_u = interpolate(disc.mesh, disc.adjacency, lambda x: lift(disc.mesh.surface, u_exact, x))
    return energy_norm(disc, pi_u - np.asarray(u_coeffs))


def _facet_derivatives(surface, w, points, t1, t2, grad_step=FD_STEP, lap_step=1e-4):
    """Facet gradient and facet Laplacian of ``w o p`` at ``points`` for frames ``(t1, t2)``."""
    grad = np.zeros_like(points)
    lap = np.zeros(points.shape[:-1])
    center = lift(surface, w, points.reshape(-1, 3)).reshape(lap.shape)
    for t in (t1, t2):
        g_f = lift(surface, w, (points + grad_step * t).reshape(-1, 3)).reshape(lap.shape)
        g_b = lift(surface, w, (points - grad_step * t).reshape(-1, 3)).reshape(lap.shape)
        grad += ((g_f - g_b) / (2.0 * grad_step))[..., None] * t
        l_f = lift(surface, w, (points + lap_step * t).reshape(-1, 3)).reshape(lap.shape)
        l_b = lift(surface, w, (points - lap_step * t).reshape(-1, 3)).reshape(lap.shape)
        lap += (l_f - 2.0 * center + l_b) / lap_step**2
    return grad, lap


def lifted_energy_error(disc: Discretization, u_coeffs, u_exact) -> float:
    """Energy norm of ``u o p - u_h``; derivatives of the lifted solution by finite differences.

    Unlike :func:`energy_error` this measures against the exact solution, so it
    carries the ``O(h)`` interpolation error of quadratics on flat facets.
    """
    surface = disc.mesh.surface
    c = np.asarray(u_coeffs, dtype=float)
    h = disc.h
    frames = disc.frames
    _, lap_u = _facet_derivatives(
        surface, u_exact, disc.quad_points, frames.t1[:, None, :], frames.t2[:, None, :]
    )
    lap_h = np.einsum("fj,fj->f", disc.ops.laplacians, c[disc.dofmap.face_dofs])
    face_term = np.sum(disc.quad_weights * (lap_u - lap_h[:, None]) ** 2)

    adj = disc.adjacency
    pts = disc.edge_points
    ce = c[disc.edge_dofs]
    avg = -np.einsum("ej,ej->e", disc.edge_averages, ce)[:, None]
    jump = -np.einsum("eqj,ej->eq", disc.edge_jumps, ce)
    for s in range(2):
        f = adj.faces[:, s]
        grad_u, lap_u = _facet_derivatives(
            surface, u_exact, pts, frames.t1[f][:, None, :], frames.t2[f][:, None, :]
        )
        avg = avg + 0.5 * lap_u
        jump = jump + np.einsum("eqi,ei->eq", grad_u, adj.conormals[:, s])
    W = disc.edge_weights
    edge_term = h * np.sum(W * avg**2) + np.sum(W * jump**2) / h
    return float(np.sqrt(face_term + 2.0 * edge_term))


def eoc(errors, hs) -> list[float]:
    """Pairwise orders ``log(e_{k-1}/e_k) / log(h_{k-1}/h_k)``."""
    e = np.asarray(errors, dtype=float)
    h = np.asarray(hs, dtype=float)
    if e.shape != h.shape or len(e) < 2:
        raise ValueError("need matching error and mesh-size sequences of length >= 2")
    if np.any(e <= 0) or np.any(h <= 0):
        raise NonPositive("errors and mesh sizes must be strictly positive")
    return list(np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:]))


def fitted_slope(errors, hs) -> float:
    """Least-squares slope of ``log e`` against ``log h``."""
    e = np.asarray(errors, dtype=float)
    h = np.asarray(hs, dtype=float)
    if np.any(e <= 0) or np.any(h <= 0):
        raise NonPositive("errors and mesh sizes must be strictly positive")
    return float(np.polyfit(np.log(h), np.log(e), 1)[0])


# --- geometry --------------------------------------------------------------------

GEOMETRY_COLUMNS = ("max_d", "max_n_diff", "max_one_ndot", "max_mu", "max_conormal")


def curved_conormals(surface: ImplicitSurface, points, tangent, reference, step: float = FD_STEP):
    """Conormals of the lifted triangles at lifted edge points.

    ``tangent`` is the unit direction of the flat edge; the lifted tangent is
    taken by central differences of the closest-point map along it, and the
    result is oriented to agree with ``reference`` (the flat conormal).
    """
    fwd = closest_point(surface, points + step * tangent)
    bwd = closest_point(surface, points - step * tangent)
    t_lift = (fwd - bwd) / (2.0 * step)
    n = surface_jet(surface, points).n
    nu = np.cross(n, t_lift)
    nu /= np.linalg.norm(nu, axis=-1, keepdims=True)
    sign = np.sign(np.einsum("...i,...i->...", nu, reference))
    return nu * sign[..., None]


def geometry_errors(disc: Discretization) -> dict:
    """Maxima of the geometric approximation errors over facet and edge quadrature points."""
    surface = disc.mesh.surface
    pts = disc.quad_points
    F, Q, _ = pts.shape
    flat = pts.reshape(-1, 3)
    jet = surface_jet(surface, flat)
    n_h = np.repeat(disc.frames.n_h, Q, axis=0)
    mu = measure_ratio(surface, flat, n_h)
    ndot = np.einsum("ij,ij->i", jet.n, n_h)

    adj = disc.adjacency
    ep = disc.edge_points  # (E, Qe, 3)
    Qe = ep.shape[1]
    tangent = disc.mesh.vertices[adj.edges[:, 1]] - disc.mesh.vertices[adj.edges[:, 0]]
    tangent /= np.linalg.norm(tangent, axis=1, keepdims=True)
    eflat = ep.reshape(-1, 3)
    tflat = np.repeat(tangent, Qe, axis=0)
    Pe = surface_jet(surface, eflat).P
    gap = 0.0
    for s in range(2):
        nu_h = np.repeat(adj.conormals[:, s], Qe, axis=0)
        nu_curved = curved_conormals(surface, eflat, tflat, nu_h)
        diff = nu_curved - np.einsum("nij,nj->ni", Pe, nu_h)
        gap = max(gap, float(np.linalg.norm(diff, axis=1).max()))

    return {
        "max_d": float(np.abs(jet.d).max()),
        "max_n_diff": float(np.linalg.norm(jet.n - n_h, axis=1).max()),
        "max_one_ndot": float(np.abs(1.0 - ndot).max()),
        "max_mu": float(np.abs(1.0 - mu).max()),
        "max_conormal": gap,
    }


@dataclass
class GeometryRates:
    hs: list
    table: list  # one dict per level
    slopes: dict | None

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("h",) + GEOMETRY_COLUMNS)
        for h, row in zip(self.hs, self.table):
            writer.writerow([_fmt(h)] + [_fmt(row[c]) for c in GEOMETRY_COLUMNS])
        if self.slopes is not None:
            writer.writerow(["slope"] + [_fmt(self.slopes[c]) for c in GEOMETRY_COLUMNS])
        return buf.getvalue()


def geometry_rates(meshes) -> GeometryRates:
    """Geometric errors on a mesh family plus least-squares log-log slopes (needs 2+ levels)."""
    hs, table = [], []
    for mesh in meshes:
        disc = mesh if isinstance(mesh, Discretization) else Discretization(mesh)
        hs.append(disc.h)
        table.append(geometry_errors(disc))
    slopes = None
    if len(hs) >= 2:
        slopes = {}
        for c in GEOMETRY_COLUMNS:
            vals = np.array([row[c] for row in table])
            slopes[c] = fitted_slope(vals, hs) if np.all(vals > 0) else math.nan
    return GeometryRates(hs, table, slopes)


def facet_fd_gradient(disc: Discretization, w, step: float = FD_STEP) -> np.ndarray:
    """Facet gradient of ``w o p`` at the triangle quadrature points by central differences."""
    surface = disc.mesh.surface
    pts = disc.quad_points
    grad = np.zeros_like(pts)
    for t in (disc.frames.t1, disc.frames.t2):
        t = t[:, None, :]
        fwd = lift(surface, w, (pts + step * t).reshape(-1, 3)).reshape(pts.shape[:2])
        bwd = lift(surface, w, (pts - step * t).reshape(-1, 3)).reshape(pts.shape[:2])
        grad += ((fwd - bwd) / (2.0 * step))[..., None] * t
    return grad


def lifting_diagnostic(disc: Discretization, w, grad_w, step: float = FD_STEP) -> float:
    """Max deviation between the facet gradient of ``w o p`` and ``P_h (P - d H) grad_Gamma w``."""
    surface = disc.mesh.surface
    pts = disc.quad_points
    flat = pts.reshape(-1, 3)
    jet = surface_jet(surface, flat)
    B = jet.P - jet.d[:, None, None] * jet.H
    g = np.einsum("nij,nj->ni", B, np.asarray(grad_w(jet.p), dtype=float))
    Ph = np.repeat(disc.frames.projector(), pts.shape[1], axis=0)
    predicted = np.einsum("nij,nj->ni", Ph, g)
    measured = facet_fd_gradient(disc, w, step).reshape(-1, 3)
    return float(np.abs(measured - predicted).max())


# --- convergence reports -------------------------------------------------------------

REPORT_COLUMNS = ("level", "h", "ndof", "l2_error", "energy_error", "eoc_l2", "eoc_energy")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return f"{float(x):.10e}"


@dataclass
class ConvergenceRow:
    level: int
    h: float
    ndof: int
    l2_error: float
    energy_error: float
    eoc_l2: float = math.nan
    eoc_energy: float = math.nan


@dataclass
class ConvergenceReport:
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, row: ConvergenceRow) -> None:
        if self.rows:
            prev = self.rows[-1]
            if not row.h < prev.h:
                raise ValueError("rows must be added in order of decreasing h")
            row.eoc_l2 = eoc([prev.l2_error, row.l2_error], [prev.h, row.h])[0]
            row.eoc_energy = eoc([prev.energy_error, row.energy_error], [prev.h, row.h])[0]
        self.rows.append(row)

    @property
    def hs(self):
        return [r.h for r in self.rows]

    def slope(self, column: str = "l2_error") -> float:
        return fitted_slope([getattr(r, column) for r in self.rows], self.hs)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for row in self.rows:
            d = asdict(row)
            writer.writerow([_fmt(d[c]) for c in REPORT_COLUMNS])
        return buf.getvalue()

"""Input checks shared by the estimator and the CLI."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .geometry import Sphere, Torus
from .mesh import TriangleMesh


def check_points(X, name: str = "X") -> np.ndarray:
    """Return ``X`` as a finite float array of shape ``(N, 3)``."""
    X = check_array(np.atleast_2d(np.asarray(X, dtype=float)), dtype=np.float64, input_name=name)
    if X.shape[1] != 3:
        raise ValueError(f"{name} must have 3 columns, got shape {X.shape}")
    return X


def check_mesh(mesh) -> TriangleMesh:
    if not isinstance(mesh, TriangleMesh):
        raise TypeError(f"expected a TriangleMesh, got {type(mesh).__name__}")
    if not isinstance(mesh.surface, (Sphere, Torus)):
        raise TypeError(f"unsupported surface {mesh.surface!r}")
    check_points(mesh.vertices, "mesh.vertices")
    faces = np.asarray(mesh.faces)
    if faces.ndim != 2 or faces.shape[1] != 3 or not np.issubdtype(faces.dtype, np.integer):
        raise ValueError(f"mesh.faces must be an integer array of shape (F, 3), got {faces.shape}")
    if faces.min() < 0 or faces.max() >= mesh.n_vertices:
        raise ValueError("mesh.faces references vertices out of range")
    return mesh


def check_positive(value, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive finite number, got {value}")
    return value

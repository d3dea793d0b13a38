"""Small 3D helpers: unit vectors, frames, plane fits and direction sequences."""

from __future__ import annotations

import math

import numpy as np

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))
GOLDEN_RATIO = (1.0 + math.sqrt(5.0)) / 2.0

UNIT_TOL = 1e-9


def unit(v):
    """Return v normalized to unit length."""
    v = np.asarray(v, dtype=float)
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return v / n


def is_unit(v, tol=UNIT_TOL) -> bool:
    return abs(float(np.linalg.norm(np.asarray(v, dtype=float))) - 1.0) <= tol


def tangent_basis(normal):
    """Deterministic orthonormal (u, v) spanning the plane perpendicular to `normal`.

    The reference axis is the world axis least aligned with the normal, so the
    result is stable under small perturbations of near-axis normals.
    """
    n = unit(normal)
    ref = np.zeros(3)
    ref[int(np.argmin(np.abs(n)))] = 1.0
    u = np.cross(ref, n)
    u /= np.linalg.norm(u)
    v = np.cross(n, u)
    return u, v


def rotation_from_axis(axis, azimuth0=None):
    """3x3 local-to-world rotation whose local +Z maps to `axis`.

    `azimuth0`, when given, fixes local +X as the in-plane projection of that
    world direction; otherwise a deterministic reference axis is used.
    """
    z = unit(axis)
    if azimuth0 is None:
        ref = np.array([1.0, 0.0, 0.0])
        if abs(float(np.dot(z, ref))) > 0.9:
            ref = np.array([0.0, 1.0, 0.0])
    else:
        ref = np.asarray(azimuth0, dtype=float)
    x = ref - np.dot(ref, z) * z
    nx = float(np.linalg.norm(x))
    if nx < 1e-12:
        raise ValueError("azimuth0 is parallel to axis")
    x /= nx
    y = np.cross(z, x)
    return np.column_stack([x, y, z])


def rotation_z_to(direction):
    """Rotation matrix mapping +Z onto `direction` (minimal-angle, deterministic)."""
    f = unit(direction)
    c = float(f[2])
    if c > 1.0 - 1e-12:
        return np.eye(3)
    if c < -1.0 + 1e-12:
        # 180 degrees about X
        return np.diag([1.0, -1.0, -1.0])
    a = np.cross(np.array([0.0, 0.0, 1.0]), f)
    s = float(np.linalg.norm(a))
    a /= s
    k = np.array([[0.0, -a[2], a[1]], [a[2], 0.0, -a[0]], [-a[1], a[0], 0.0]])
    return np.eye(3) + s * k + (1.0 - c) * (k @ k)


def fibonacci_sphere(n: int, seq_id: int = 0) -> np.ndarray:
    """n deterministic, near-uniform directions on the unit sphere.

    Golden-angle spiral lattice; `seq_id` rotates the azimuth start so distinct
    ids yield distinct (still deterministic) sequences.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    i = np.arange(n, dtype=float)
    z = 1.0 - (2.0 * i + 1.0) / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = i * GOLDEN_ANGLE + 2.0 * math.pi * math.modf(seq_id * GOLDEN_RATIO)[0]
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def hemisphere_directions(n: int, facing, seq_id: int = 0):
    """n deterministic directions in the hemisphere around `facing`.

    Returns (directions, cos_theta) where cos_theta is the cosine of the angle
    to `facing`, computed in the canonical frame before rotation so it is exact
    regardless of the facing vector.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    full = fibonacci_sphere(2 * n, seq_id=seq_id)
    local = full[full[:, 2] > 0.0]
    # by construction of the lattice exactly the first n points have z > 0
    cos_theta = local[:, 2].copy()
    rot = rotation_z_to(facing)
    return local @ rot.T, cos_theta


def fit_plane(points: np.ndarray):
    """Least-squares plane through `points` (N,3): returns (centroid, normal)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 3:
        raise ValueError("need at least 3 points of dimension 3")
    centroid = pts.mean(axis=0)
    _, _, vt = np.linalg.svd(pts - centroid, full_matrices=False)
    normal = vt[-1]
    return centroid, normal / np.linalg.norm(normal)

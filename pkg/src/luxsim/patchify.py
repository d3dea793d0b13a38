"""Depth image -> oriented rectangular patches.

Valid pixels are back-projected to world points, binned into a 3D grid of
``patch_size`` cells, and each sufficiently populated cell is summarized by a
least-squares plane carrying one rectangular patch.  Normals are oriented
toward the camera so emitted patches face the sensor that saw them.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import EmptyGeometryError, ValidationError
from .geometry import fit_plane, tangent_basis
from .model import CameraModel, DepthImage, Patch

DEFAULT_PATCH_SIZE = 0.25
DEFAULT_MIN_PIXELS = 8

_MIN_EXTENT = 1e-6  # cells whose points are collinear make no usable rectangle


def patchify_depth(depth: DepthImage, camera: CameraModel,
                   patch_size: float = DEFAULT_PATCH_SIZE,
                   min_pixels: int = DEFAULT_MIN_PIXELS,
                   albedo: float = 0.5, id_start: int = 0) -> list[Patch]:
    """Convert a depth image into world-space patches.

    Raises EmptyGeometryError when no grid cell collects ``min_pixels``
    valid measurements.
    """
    if patch_size <= 0:
        raise ValidationError("patch_size must be positive")
    if min_pixels < 3:
        raise ValidationError("min_pixels must be at least 3 to fit a plane")

    d = depth.depth
    vs, us = np.nonzero(d > 0.0)
    if us.size == 0:
        raise EmptyGeometryError("depth image has no valid measurements")
    world = camera.backproject(us.astype(float), vs.astype(float), d[vs, us])

    keys = np.floor(world / patch_size).astype(np.int64)
    # group points by cell, in deterministic sorted-key order
    order = np.lexsort((keys[:, 2], keys[:, 1], keys[:, 0]))
    keys = keys[order]
    world = world[order]
    boundaries = np.nonzero(np.any(np.diff(keys, axis=0) != 0, axis=1))[0] + 1
    starts = np.concatenate([[0], boundaries])
    stops = np.concatenate([boundaries, [keys.shape[0]]])

    cam_pos = camera.position
    patches = []
    next_id = id_start
    for lo, hi in zip(starts, stops):
        if hi - lo < min_pixels:
            continue
        pts = world[lo:hi]
        centroid, normal = fit_plane(pts)
        if float(np.dot(normal, cam_pos - centroid)) < 0.0:
            normal = -normal
        u, v = tangent_basis(normal)
        a = (pts - centroid) @ u
        b = (pts - centroid) @ v
        he_u = 0.5 * float(a.max() - a.min())
        he_v = 0.5 * float(b.max() - b.min())
        if he_u < _MIN_EXTENT or he_v < _MIN_EXTENT:
            continue
        center = centroid + u * 0.5 * float(a.max() + a.min()) + v * 0.5 * float(b.max() + b.min())
        patches.append(Patch(
            id=next_id,
            center=center,
            normal=normal,
            tangent_u=u,
            tangent_v=v,
            half_extents=(he_u, he_v),
            albedo=albedo,
        ))
        next_id += 1
    if not patches:
        raise EmptyGeometryError(
            f"no grid cell collected {min_pixels} valid pixels spanning a plane"
        )
    return patches


class DepthPatchifier(BaseEstimator, TransformerMixin):
    """Stateless transformer wrapping patchify_depth for pipeline use."""

    def __init__(self, camera=None, patch_size=DEFAULT_PATCH_SIZE,
                 min_pixels=DEFAULT_MIN_PIXELS, albedo=0.5, id_start=0):
        self.camera = camera
        self.patch_size = patch_size
        self.min_pixels = min_pixels
        self.albedo = albedo
        self.id_start = id_start

    def fit(self, X=None, y=None):
        if self.camera is None:
            raise ValidationError("DepthPatchifier needs a camera model")
        return self

    def transform(self, X: DepthImage) -> list[Patch]:
        if self.camera is None:
            raise ValidationError("DepthPatchifier needs a camera model")
        return patchify_depth(X, self.camera, patch_size=self.patch_size,
                              min_pixels=self.min_pixels, albedo=self.albedo,
                              id_start=self.id_start)

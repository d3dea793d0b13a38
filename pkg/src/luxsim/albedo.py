"""Per-patch reflectance from images taken under known luminaire activations.

For a Lambertian patch the observed radiance is L = rho * E / pi, so each
(image, activation) pair votes rho = pi * L / E_pred with E_pred the predicted
direct illuminance under that activation.  The median over images rejects
votes corrupted by shadows or specular highlights; patches with no usable
vote at all raise rather than guess.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .accel import AccelIndex, build_accel
from .errors import NoObservationError, ValidationError
from .model import Scene
from .radiosity import emission_vector

MAX_RHO = 1.0 - 1e-3  # strict diagonal dominance for the downstream solve
DEFAULT_FLOOR_LUX = 1.0


def _radiance_per_patch(observation, scene: Scene, accel: AccelIndex) -> np.ndarray:
    """One observation -> per-patch radiance, NaN where the patch is unseen.

    A 1-d vector is taken as already per-patch; a 2-d array is treated as a
    camera image sampled at each patch center's projection, skipping patches
    outside the frame or hidden from the camera.
    """
    obs = np.asarray(observation, dtype=np.float64)
    n = len(scene.patches)
    if obs.ndim == 1:
        if obs.shape != (n,):
            raise ValidationError(
                f"per-patch observation has {obs.shape[0]} entries for {n} patches"
            )
        return obs
    if obs.ndim != 2:
        raise ValidationError("observation must be a per-patch vector or a 2-d image")
    if scene.camera is None:
        raise ValidationError("image observations need a scene camera")
    cam = scene.camera
    h, w = obs.shape
    out = np.full(n, np.nan)
    centers = np.stack([p.center for p in scene.patches])
    u, v, z = cam.project(centers)
    for i, p in enumerate(scene.patches):
        if not z[i] > 0.0:
            continue
        iu, iv = int(round(float(u[i]))), int(round(float(v[i])))
        if not (0 <= iu < w and 0 <= iv < h):
            continue
        if not accel.visible(cam.position, p.center, ignore=(p.id,)):
            continue
        out[i] = obs[iv, iu]
    return out


def estimate_albedo(observations, activations, scene: Scene,
                    accel: AccelIndex | None = None,
                    floor_lux: float = DEFAULT_FLOOR_LUX,
                    occlusion: bool = True) -> np.ndarray:
    """Median-vote reflectance for every scene patch, clamped below 1."""
    observations = list(observations)
    activations = list(activations)
    if not observations:
        raise ValidationError("need at least one observation")
    if len(observations) != len(activations):
        raise ValidationError(
            f"{len(observations)} observations but {len(activations)} activations"
        )
    if accel is None:
        accel = build_accel(scene.patches)

    n = len(scene.patches)
    votes = [[] for _ in range(n)]
    for obs, dims in zip(observations, activations):
        radiance = _radiance_per_patch(obs, scene, accel)
        e_pred = emission_vector(scene, dims, accel, occlusion=occlusion).E
        usable = (e_pred >= floor_lux) & np.isfinite(radiance)
        ratio = np.pi * radiance[usable] / e_pred[usable]
        for i, r in zip(np.nonzero(usable)[0], ratio):
            votes[i].append(r)

    out = np.empty(n)
    for i, v in enumerate(votes):
        if not v:
            raise NoObservationError(
                f"patch {scene.patches[i].id}: no image with predicted "
                f"illuminance above {floor_lux} lux"
            )
        out[i] = min(MAX_RHO, max(0.0, float(np.median(v))))
    return out


class AlbedoEstimator(BaseEstimator):
    """Estimator wrapper: fit() learns albedo_, apply() rebuilds the scene."""

    def __init__(self, floor_lux=DEFAULT_FLOOR_LUX, occlusion=True):
        self.floor_lux = floor_lux
        self.occlusion = occlusion

    def fit(self, observations, activations, scene: Scene,
            accel: AccelIndex | None = None):
        self.albedo_ = estimate_albedo(observations, activations, scene,
                                       accel=accel, floor_lux=self.floor_lux,
                                       occlusion=self.occlusion)
        return self

    def apply(self, scene: Scene) -> Scene:
        """Return `scene` with every patch reflectance replaced by the fit."""
        if not hasattr(self, "albedo_"):
            raise NotFittedError("call fit() before apply()")
        return scene.replace_albedo(self.albedo_)

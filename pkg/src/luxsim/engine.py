"""Fitted front-end for the interreflection pipeline.

``RadiosityEngine.fit`` does the expensive, scene-dependent work exactly once
(ray index, form factors, one solve per luminaire); everything after that is a
cheap linear recombination per dim vector.  Form factors can be cached on disk
keyed by the geometry they were computed from, so repeated runs on the same
scene skip the O(N^2) build.
"""

from __future__ import annotations

import hashlib
import os
import tempfile

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .accel import EPS_T, build_accel
from .errors import EmptyGeometryError
from .model import Scene
from .radiosity import (
    DEFAULT_FF_SAMPLES,
    FormFactorMatrix,
    RadiositySolution,
    build_basis,
    form_factor_matrix,
)

_CACHE_TAG = b"luxsim-ff-v1"


class RadiosityEngine(BaseEstimator):
    """Scene -> ray index, form factors and a per-luminaire solution basis.

    Parameters mirror the underlying operations: ``n_samples`` is the
    per-patch quadrature budget for form factors, ``occlusion`` toggles
    visibility tests, ``method`` picks the linear solver, ``eps_t`` is the
    ray self-intersection offset and ``cache_dir`` (optional) enables the
    on-disk form-factor cache.
    """

    def __init__(self, n_samples=DEFAULT_FF_SAMPLES, occlusion=True,
                 method="auto", eps_t=EPS_T, cache_dir=None):
        self.n_samples = n_samples
        self.occlusion = occlusion
        self.method = method
        self.eps_t = eps_t
        self.cache_dir = cache_dir

    def fit(self, scene: Scene, y=None):
        """Build the index, the form-factor matrix and the luminaire basis."""
        if not scene.patches:
            raise EmptyGeometryError("scene has no patches to solve over")
        accel = build_accel(scene.patches, eps_t=self.eps_t)
        ff = self._load_cached(accel)
        if ff is None:
            ff = form_factor_matrix(scene.patches, accel, n_samples=self.n_samples,
                                    occlusion=self.occlusion)
            self._store_cached(accel, ff)
        self.scene_ = scene
        self.accel_ = accel
        self.form_factors_ = ff
        self.basis_ = build_basis(scene, accel, n_samples=self.n_samples,
                                  occlusion=self.occlusion, form_factors=ff,
                                  method=self.method)
        return self

    def _require_fit(self):
        if not hasattr(self, "basis_"):
            raise NotFittedError("call fit(scene) before querying the engine")

    def predict(self, dims) -> np.ndarray:
        """Per-patch exitance for one dim vector (L,) or a batch (M, L)."""
        self._require_fit()
        dims = np.asarray(dims, dtype=np.float64)
        if dims.ndim == 1:
            return self.basis_.exitance(dims)
        return np.stack([self.basis_.exitance(row) for row in dims])

    def exitance(self, dims) -> np.ndarray:
        return self.predict(dims)

    def incident(self, dims) -> np.ndarray:
        """Total arriving lux per patch (direct + interreflected)."""
        self._require_fit()
        return self.basis_.incident(dims)

    def emission(self, dims) -> np.ndarray:
        self._require_fit()
        return self.basis_.emission(dims)

    def solution(self, dims) -> RadiositySolution:
        """Recombined field for `dims` with its freshly computed residual."""
        self._require_fit()
        B = self.basis_.exitance(dims)
        E = self.basis_.emission(dims)
        rho = self.basis_.albedo
        rhs = rho * E
        diff = (B - rho * (self.form_factors_.F @ B)) - rhs
        nr = float(np.linalg.norm(rhs))
        nd = float(np.linalg.norm(diff))
        if nr > 0.0:
            residual = nd / nr
        else:
            residual = 0.0 if nd == 0.0 else float("inf")
        return RadiositySolution(B=B, residual=residual)

    # ------------------------------------------------------------------
    # on-disk form-factor cache

    def _cache_path(self, accel):
        if self.cache_dir is None:
            return None
        h = hashlib.sha256(_CACHE_TAG)
        for arr in (accel.centers, accel.tus, accel.tvs, accel.hes):
            h.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
        h.update(f"{int(self.n_samples)}|{float(self.eps_t)!r}|{bool(self.occlusion)}".encode())
        return os.path.join(self.cache_dir, f"ff-{h.hexdigest()[:24]}.npz")

    def _load_cached(self, accel):
        path = self._cache_path(accel)
        if path is None or not os.path.exists(path):
            return None
        try:
            with np.load(path) as data:
                return FormFactorMatrix(F=data["F"], areas=data["areas"],
                                        n_samples=int(data["n_samples"]))
        except Exception:
            return None  # unreadable cache entries are rebuilt, not fatal

    def _store_cached(self, accel, ff: FormFactorMatrix):
        path = self._cache_path(accel)
        if path is None:
            return
        os.makedirs(self.cache_dir, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=self.cache_dir, suffix=".npz.part")
        try:
            with os.fdopen(fd, "wb") as fh:
                np.savez(fh, F=ff.F, areas=ff.areas, n_samples=ff.n_samples)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

"""Reflectance recovery from (observation, activation) pairs."""

import numpy as np
import pytest
from sklearn.exceptions import NotFittedError

from luxsim.accel import build_accel
from luxsim.albedo import MAX_RHO, AlbedoEstimator, estimate_albedo
from luxsim.errors import NoObservationError, ValidationError
from luxsim.model import (
    CameraModel,
    Luminaire,
    Patch,
    Scene,
    constant_intensity_curve,
)
from luxsim.radiosity import emission_vector


def one_patch_scene(camera=None):
    """A 0.2 m patch at the origin lit head-on: E = 1600 / 2^2 = 400 lux."""
    patch = Patch.from_normal(0, center=[0.0, 0.0, 0.0], normal=[0.0, 0.0, 1.0],
                              half_extents=(0.1, 0.1), albedo=0.5)
    lamp = Luminaire(id=0, position=np.array([0.0, 0.0, 2.0]), rotation=np.eye(3),
                     ldc=constant_intensity_curve(1600.0), power_watts=50.0)
    return Scene(patches=[patch], luminaires=[lamp], camera=camera)


class TestRatios:
    def test_ratio_definition(self):
        scene = one_patch_scene()
        rho = estimate_albedo([np.array([200.0 / np.pi])], [[1.0]], scene)
        assert rho[0] == pytest.approx(0.5, rel=1e-12)

    def test_clamped_below_one(self):
        scene = one_patch_scene()
        rho = estimate_albedo([np.array([1.3 * 400.0 / np.pi])], [[1.0]], scene)
        assert rho[0] == MAX_RHO

    def test_median_across_images(self):
        scene = one_patch_scene()
        obs = [np.array([r * 400.0 / np.pi]) for r in (0.4, 0.5, 0.9)]
        rho = estimate_albedo(obs, [[1.0]] * 3, scene)
        assert rho[0] == pytest.approx(0.5, rel=1e-12)

    def test_negative_votes_floor_at_zero(self):
        scene = one_patch_scene()
        rho = estimate_albedo([np.array([-3.0])], [[1.0]], scene)
        assert rho[0] == 0.0

    def test_scale_consistency(self):
        scene = one_patch_scene()
        base = estimate_albedo([np.array([120.0])], [[1.0]], scene,
                               floor_lux=0.01)
        half = estimate_albedo([np.array([60.0])], [[0.5]], scene,
                               floor_lux=0.01)
        assert half[0] == pytest.approx(base[0], rel=1e-12)


class TestSkipsAndErrors:
    def test_dark_activation_skipped_entirely(self):
        scene = one_patch_scene()
        with pytest.raises(NoObservationError, match="patch 0"):
            estimate_albedo([np.array([10.0])], [[0.0]], scene)

    def test_dark_image_ignored_in_median(self):
        scene = one_patch_scene()
        obs = [np.array([10.0]), np.array([0.7 * 400.0 / np.pi])]
        rho = estimate_albedo(obs, [[0.0], [1.0]], scene)
        assert rho[0] == pytest.approx(0.7, rel=1e-12)

    def test_empty_inputs_rejected(self):
        scene = one_patch_scene()
        with pytest.raises(ValidationError):
            estimate_albedo([], [], scene)
        with pytest.raises(ValidationError):
            estimate_albedo([np.zeros(1)], [], scene)

    def test_wrong_length_vector_rejected(self):
        scene = one_patch_scene()
        with pytest.raises(ValidationError):
            estimate_albedo([np.zeros(3)], [[1.0]], scene)


class TestImageObservations:
    CAM = CameraModel(fx=96.0, fy=96.0, cx=31.5, cy=31.5,
                      rotation=np.diag([1.0, -1.0, -1.0]),
                      translation=np.array([0.0, 0.0, 2.0]))

    def test_image_sampling_matches_vector_path(self):
        scene = one_patch_scene(camera=self.CAM)
        level = 150.0 / np.pi
        image = np.full((64, 64), level)
        accel = build_accel(scene.patches)
        rho_img = estimate_albedo([image], [[1.0]], scene, accel=accel)
        rho_vec = estimate_albedo([np.array([level])], [[1.0]], scene, accel=accel)
        assert rho_img[0] == rho_vec[0]

    def test_patch_outside_frame_has_no_vote(self):
        patch_far = Patch.from_normal(1, center=[50.0, 0.0, 0.0],
                                      normal=[0.0, 0.0, 1.0],
                                      half_extents=(0.1, 0.1), albedo=0.5)
        base = one_patch_scene(camera=self.CAM)
        scene = Scene(patches=list(base.patches) + [patch_far],
                      luminaires=base.luminaires, camera=self.CAM)
        with pytest.raises(NoObservationError, match="patch 1"):
            estimate_albedo([np.full((64, 64), 10.0)], [[1.0]], scene)

    def test_occluded_patch_has_no_vote(self):
        target = Patch.from_normal(0, center=[0.0, 0.0, 0.0], normal=[0, 0, 1.0],
                                   half_extents=(0.1, 0.1), albedo=0.5)
        blocker = Patch.from_normal(1, center=[0.0, 0.0, 1.0], normal=[0, 0, 1.0],
                                    half_extents=(0.3, 0.3), albedo=0.5)
        lamp = Luminaire(id=0, position=np.array([0.0, 0.0, 0.5]),
                         rotation=np.eye(3), ldc=constant_intensity_curve(1600.0),
                         power_watts=50.0)
        scene = Scene(patches=[target, blocker], luminaires=[lamp], camera=self.CAM)
        # the blocker hides patch 0 from the camera; patch 0 still gets light
        assert emission_vector(scene, [1.0], build_accel(scene.patches)).E[0] > 0
        with pytest.raises(NoObservationError, match="patch 0"):
            estimate_albedo([np.full((64, 64), 10.0)], [[1.0]], scene)

    def test_image_without_camera_rejected(self):
        scene = one_patch_scene()
        with pytest.raises(ValidationError):
            estimate_albedo([np.zeros((8, 8))], [[1.0]], scene)


class TestEstimator:
    def test_fit_and_apply(self):
        scene = one_patch_scene()
        est = AlbedoEstimator().fit([np.array([200.0 / np.pi])], [[1.0]], scene)
        assert est.albedo_[0] == pytest.approx(0.5, rel=1e-12)
        updated = est.apply(scene)
        assert updated.patches[0].albedo == pytest.approx(0.5, rel=1e-12)

    def test_apply_before_fit_raises(self):
        with pytest.raises(NotFittedError):
            AlbedoEstimator().apply(one_patch_scene())

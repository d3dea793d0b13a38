"""Detection ingestion, head lifting, gaze mapping and the virtual luxmeter."""

import json
import math

import numpy as np
import pytest

from luxsim.accel import build_accel
from luxsim.errors import NoDepthError, SceneFormatError, ValidationError
from luxsim.fixtures import build_closed_cube
from luxsim.model import (
    CameraModel,
    DepthImage,
    Luminaire,
    Occupant,
    Patch,
    Scene,
    constant_intensity_curve,
    cosine_sensitivity,
)
from luxsim.perception import (
    DetectionRecord,
    PerceivedLux,
    VFOA,
    gaze_from_class,
    head_to_3d,
    ingest_detections,
    make_probe,
    probe_reading,
    vfoa_visible_luminaires,
    virtual_luxmeter,
)
from luxsim.photometry import eval_lsc
from luxsim.radiosity import build_basis, solve_radiosity

from .oracles import lsc_weighted_quadrature

# analytic identity: inside a closed uniform-exitance enclosure the
# illuminance on any interior surface equals the exitance itself
UNIFORM_ENCLOSURE_B = 500.0


def record_line(frame=0, person=1, bbox=(10, 20, 30, 40), head=(25.0, 30.0),
                pose=1, k=4):
    return json.dumps({
        "frame_id": frame, "person_id": person, "bbox": list(bbox),
        "head_px": list(head), "pose_class": pose, "n_classes": k,
    })


def lamp(lid, pos, candela=1000.0, power=96.8):
    return Luminaire(id=lid, position=np.asarray(pos, float), rotation=np.eye(3),
                     ldc=constant_intensity_curve(candela), power_watts=power)


class TestIngest:
    def test_empty_stream(self):
        assert ingest_detections("") == []

    def test_single_record_echo(self):
        recs = ingest_detections(record_line())
        assert len(recs) == 1
        r = recs[0]
        assert r.frame_id == 0 and r.person_id == 1
        assert r.bbox == (10.0, 20.0, 30.0, 40.0)
        assert r.head_px == (25.0, 30.0)
        assert r.pose_class == 1 and r.n_classes == 4

    def test_pose_class_at_limit_rejected(self):
        with pytest.raises(SceneFormatError, match="line 1"):
            ingest_detections(record_line(pose=4, k=4))

    def test_bad_json_names_line(self):
        text = record_line() + "\n{not json\n"
        with pytest.raises(SceneFormatError, match="line 2"):
            ingest_detections(text)

    def test_missing_field_names_line(self):
        bad = json.dumps({"frame_id": 0, "person_id": 1})
        with pytest.raises(SceneFormatError, match="line 1"):
            ingest_detections(bad)

    def test_records_sorted_by_frame(self):
        text = "\n".join([
            record_line(frame=3, person=7),
            record_line(frame=1, person=5),
            record_line(frame=3, person=8),
            record_line(frame=2, person=6),
        ])
        recs = ingest_detections(text)
        assert [r.frame_id for r in recs] == [1, 2, 3, 3]
        # stable within a frame
        assert [r.person_id for r in recs] == [5, 6, 7, 8]

    def test_blank_lines_skipped(self):
        assert len(ingest_detections("\n" + record_line() + "\n\n")) == 1

    def test_degenerate_bbox_rejected(self):
        with pytest.raises(SceneFormatError, match="line 1"):
            ingest_detections(record_line(bbox=(5, 5, 0, 10)))

    def test_bad_class_count_rejected(self):
        with pytest.raises(ValidationError):
            DetectionRecord(0, 0, (0, 0, 1, 1), (0, 0), pose_class=0, n_classes=5)


class TestHeadTo3d:
    CAM = CameraModel(fx=500.0, fy=500.0, cx=32.0, cy=24.0)

    def depth_with(self, values):
        d = np.zeros((48, 64))
        for (v, u), z in values.items():
            d[v, u] = z
        return DepthImage(d)

    def rec_at(self, u, v):
        return DetectionRecord(0, 0, (0, 0, 4, 4), (u, v), 0, 4)

    def test_principal_point_identity_pose(self):
        depth = self.depth_with({(24, 32): 2.5})
        p = head_to_3d(self.rec_at(32.0, 24.0), depth, self.CAM)
        np.testing.assert_allclose(p, [0.0, 0.0, 2.5], atol=1e-12)

    def test_median_ignores_invalid(self):
        depth = self.depth_with({(24, 31): 2.4, (24, 32): 2.5, (23, 32): 2.6})
        p = head_to_3d(self.rec_at(32.0, 24.0), depth, self.CAM)
        assert p[2] == pytest.approx(2.5, abs=1e-12)

    def test_all_invalid_window_raises(self):
        depth = DepthImage(np.zeros((48, 64)))
        with pytest.raises(NoDepthError):
            head_to_3d(self.rec_at(32.0, 24.0), depth, self.CAM)

    def test_head_outside_image_raises(self):
        depth = DepthImage(np.ones((48, 64)))
        with pytest.raises(ValidationError):
            head_to_3d(self.rec_at(200.0, 24.0), depth, self.CAM)

    def test_posed_camera(self):
        rot = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        cam = CameraModel(fx=500.0, fy=500.0, cx=32.0, cy=24.0,
                          rotation=rot, translation=np.array([1.0, 2.0, 3.0]))
        depth = self.depth_with({(24, 32): 2.0})
        p = head_to_3d(self.rec_at(32.0, 24.0), depth, cam)
        np.testing.assert_allclose(p, rot @ [0, 0, 2.0] + [1, 2, 3], atol=1e-12)


class TestGazeFromClass:
    def test_class_zero_is_plus_x(self):
        np.testing.assert_allclose(gaze_from_class(0, 4), [1, 0, 0], atol=1e-15)

    def test_quarter_turn(self):
        np.testing.assert_allclose(gaze_from_class(1, 4), [0, 1, 0], atol=1e-15)

    def test_eighth_turns(self):
        g = gaze_from_class(3, 8)  # 135 degrees
        s = math.sqrt(0.5)
        np.testing.assert_allclose(g, [-s, s, 0], atol=1e-12)

    def test_invalid_class_count(self):
        with pytest.raises(ValidationError):
            gaze_from_class(0, 5)

    def test_out_of_range_class(self):
        with pytest.raises(ValidationError):
            gaze_from_class(4, 4)

    def test_flat_against_generic_up(self):
        up = np.array([0.2, -0.1, 0.97])
        up = up / np.linalg.norm(up)
        for k in range(8):
            g = gaze_from_class(k, 8, world_up=up)
            assert abs(np.linalg.norm(g) - 1.0) < 1e-12
            assert abs(float(np.dot(g, up))) < 1e-12


class TestVFOA:
    def test_on_axis_included(self):
        cone = VFOA(apex=np.zeros(3), axis=np.array([1.0, 0, 0]), aperture_deg=30.0)
        assert cone.contains([5.0, 0.0, 0.0])

    def test_past_half_aperture_excluded(self):
        cone = VFOA(apex=np.zeros(3), axis=np.array([1.0, 0, 0]), aperture_deg=30.0)
        a = math.radians(20.0)
        assert not cone.contains([math.cos(a), math.sin(a), 0.0])

    def test_apex_inside(self):
        cone = VFOA(apex=np.ones(3), axis=np.array([0, 0, 1.0]), aperture_deg=30.0)
        assert cone.contains([1.0, 1.0, 1.0])

    def test_visible_luminaires_filters_angle_and_occlusion(self):
        occ = Occupant(id=1, head_position=np.zeros(3), gaze=np.array([1.0, 0, 0]),
                       lsc=cosine_sensitivity())
        lums = [
            lamp(0, [4.0, 0.0, 0.0]),  # on-axis
            lamp(1, [1.0, 1.0, 0.0]),  # 45 degrees off: outside 15-degree half cone
            lamp(2, [8.0, 0.0, 0.0]),  # on-axis but behind the occluder
        ]
        blocker = Patch.from_normal(99, center=[6.0, 0.0, 0.0], normal=[1.0, 0, 0],
                                    half_extents=(1.0, 1.0), albedo=0.5)
        scene = Scene(patches=[blocker], luminaires=lums, sensors=[], occupants=[occ])
        accel = build_accel(scene.patches)
        assert vfoa_visible_luminaires(occ, scene, accel) == {0}

    def test_no_accel_means_no_occlusion(self):
        occ = Occupant(id=1, head_position=np.zeros(3), gaze=np.array([1.0, 0, 0]),
                       lsc=cosine_sensitivity())
        scene = Scene(luminaires=[lamp(0, [4.0, 0, 0])], occupants=[occ])
        assert vfoa_visible_luminaires(occ, scene, None) == {0}


@pytest.fixture(scope="module")
def cube_basis():
    patches = build_closed_cube(side=1.0, patch_size=0.25, albedo=0.5)
    accel = build_accel(patches)
    lums = [lamp(0, [0.3, 0.5, 0.6], candela=600.0),
            lamp(1, [0.7, 0.4, 0.5], candela=300.0)]
    scene = Scene(patches=patches, luminaires=lums, sensors=[], occupants=[])
    basis = build_basis(scene, accel)
    return scene, accel, basis


class TestVirtualLuxmeter:
    COS = cosine_sensitivity()

    def test_zero_dims_zero_total(self, cube_basis):
        scene, accel, basis = cube_basis
        r = virtual_luxmeter(scene, basis, [0.5, 0.5, 0.5], [0, 0, 1.0],
                             self.COS, np.zeros(2), accel, n_rays=512)
        assert r.total == 0.0

    def test_direct_inverse_square_on_axis(self):
        scene = Scene(luminaires=[lamp(0, [0.0, 0.0, 2.0])])
        r = virtual_luxmeter(scene, None, [0.0, 0.0, 0.0], [0, 0, 1.0],
                             self.COS, [1.0], accel=None, n_rays=64)
        assert r.patch_term == 0.0
        assert abs(r.direct_term - 250.0) < 1e-9
        assert abs(r.total - 250.0) < 1e-9

    def test_uniform_enclosure_reads_exitance(self):
        patches = build_closed_cube(side=1.0, patch_size=0.25, albedo=0.5)
        accel = build_accel(patches)
        scene = Scene(patches=patches)
        B = np.full(len(patches), UNIFORM_ENCLOSURE_B)
        r = virtual_luxmeter(scene, B, [0.5, 0.5, 0.5], [0.0, 0.0, 1.0],
                             self.COS, np.zeros(0), accel, n_rays=100_000)
        assert abs(r.total - UNIFORM_ENCLOSURE_B) <= 0.02 * UNIFORM_ENCLOSURE_B
        # cross-check against direct 2D quadrature of the same integrand
        oracle = lsc_weighted_quadrature(
            lambda deg: float(eval_lsc(self.COS, deg)),
            lambda t, p: UNIFORM_ENCLOSURE_B / math.pi,
        )
        assert abs(oracle - UNIFORM_ENCLOSURE_B) <= 0.005 * UNIFORM_ENCLOSURE_B
        assert abs(r.total - oracle) <= 0.005 * UNIFORM_ENCLOSURE_B

    def test_linearity_with_shared_probe(self, cube_basis):
        scene, accel, basis = cube_basis
        probe = make_probe(scene, [0.4, 0.5, 0.5], [0.0, 0.0, 1.0], self.COS,
                           accel, n_rays=4096)
        d1 = np.array([0.3, 0.2])
        d2 = np.array([0.4, 0.5])
        r12 = probe_reading(probe, basis.exitance(d1 + d2), d1 + d2)
        r1 = probe_reading(probe, basis.exitance(d1), d1)
        r2 = probe_reading(probe, basis.exitance(d2), d2)
        assert r12.total == pytest.approx(r1.total + r2.total, rel=1e-12)

    def test_lsc_weighting_of_direct_term(self):
        scene = Scene(luminaires=[lamp(0, [0.0, 0.0, 2.0])])
        r0 = virtual_luxmeter(scene, None, [0, 0, 0.0], [0, 0, 1.0],
                              self.COS, [1.0], None, n_rays=16)
        for deg in (25.0, 40.0, 60.0, 85.0):
            a = math.radians(deg)
            facing = np.array([math.sin(a), 0.0, math.cos(a)])
            r = virtual_luxmeter(scene, None, [0, 0, 0.0], facing,
                                 self.COS, [1.0], None, n_rays=16)
            expect = r0.total * float(eval_lsc(self.COS, deg))
            assert abs(r.direct_term - expect) < 1e-9

    def test_source_behind_sensor_ignored(self):
        scene = Scene(luminaires=[lamp(0, [0.0, 0.0, -2.0])])
        r = virtual_luxmeter(scene, None, [0, 0, 0.0], [0, 0, 1.0],
                             self.COS, [1.0], None, n_rays=16)
        assert r.total == 0.0

    def test_occluded_source_contributes_nothing(self):
        blocker = Patch.from_normal(5, center=[0.0, 0.0, 1.0], normal=[0, 0, 1.0],
                                    half_extents=(0.5, 0.5), albedo=0.3)
        scene = Scene(patches=[blocker], luminaires=[lamp(0, [0.0, 0.0, 2.0])])
        accel = build_accel(scene.patches)
        r = virtual_luxmeter(scene, np.zeros(1), [0, 0, 0.0], [0, 0, 1.0],
                             self.COS, [1.0], accel, n_rays=64)
        assert r.direct_term == 0.0

    def test_include_direct_off(self):
        scene = Scene(luminaires=[lamp(0, [0.0, 0.0, 2.0])])
        r = virtual_luxmeter(scene, None, [0, 0, 0.0], [0, 0, 1.0],
                             self.COS, [1.0], None, n_rays=16, include_direct=False)
        assert r.total == 0.0

    def test_deterministic_repetition(self, cube_basis):
        scene, accel, basis = cube_basis
        args = (scene, basis, [0.45, 0.5, 0.5], [0.0, 0.0, 1.0], self.COS,
                np.array([0.8, 0.6]), accel)
        a = virtual_luxmeter(*args, n_rays=2048, seq_id=3)
        b = virtual_luxmeter(*args, n_rays=2048, seq_id=3)
        assert a.total == b.total and a.patch_term == b.patch_term

    def test_distinct_sequences_differ(self, cube_basis):
        scene, accel, basis = cube_basis
        args = (scene, basis, [0.45, 0.5, 0.5], [0.0, 0.0, 1.0], self.COS,
                np.array([0.8, 0.6]), accel)
        a = virtual_luxmeter(*args, n_rays=512, seq_id=0)
        b = virtual_luxmeter(*args, n_rays=512, seq_id=1)
        assert a.patch_term != b.patch_term

    def test_solution_and_raw_vector_agree(self, cube_basis):
        scene, accel, basis = cube_basis
        dims = np.array([1.0, 0.5])
        B = basis.exitance(dims)
        sol = solve_radiosity(basis.form_factors, basis.albedo, basis.emission(dims))
        r_raw = virtual_luxmeter(scene, B, [0.5, 0.5, 0.5], [0, 0, 1.0],
                                 self.COS, dims, accel, n_rays=256)
        r_sol = virtual_luxmeter(scene, sol, [0.5, 0.5, 0.5], [0, 0, 1.0],
                                 self.COS, dims, accel, n_rays=256)
        assert r_raw.total == pytest.approx(r_sol.total, rel=1e-8)

    def test_dims_validation(self, cube_basis):
        scene, accel, basis = cube_basis
        with pytest.raises(ValidationError):
            virtual_luxmeter(scene, basis, [0.5, 0.5, 0.5], [0, 0, 1.0],
                             self.COS, [1.0], accel, n_rays=16)
        with pytest.raises(ValidationError):
            virtual_luxmeter(scene, basis, [0.5, 0.5, 0.5], [0, 0, 1.0],
                             self.COS, [1.2, 0.0], accel, n_rays=16)

    def test_zero_rays_rejected(self, cube_basis):
        scene, accel, basis = cube_basis
        with pytest.raises(ValidationError):
            virtual_luxmeter(scene, basis, [0.5, 0.5, 0.5], [0, 0, 1.0],
                             self.COS, np.ones(2), accel, n_rays=0)

    def test_record_invariants(self):
        with pytest.raises(ValidationError):
            PerceivedLux(total=1.0, patch_term=-0.5, direct_term=1.5, n_rays=8)
        with pytest.raises(ValidationError):
            PerceivedLux(total=3.0, patch_term=1.0, direct_term=1.0, n_rays=8)

import numpy as np
import pytest

from luxsim.accel import AccelIndex, build_accel, occupant_body_patches
from luxsim.errors import EmptyGeometryError, ValidationError
from luxsim.model import Occupant, Patch, cosine_sensitivity

from .oracles import LinearScanIndex


def square(pid, center, normal, half=1.0, albedo=0.5):
    return Patch.from_normal(
        id=pid,
        center=np.asarray(center, float),
        normal=np.asarray(normal, float),
        half_extents=(half, half),
        albedo=albedo,
    )


class TestCastBasics:
    def test_straight_hit(self):
        acc = build_accel([square(0, [0, 0, 0], [0, 0, 1])])
        hit = acc.cast([0.2, -0.3, 2.0], [0.0, 0.0, -1.0])
        assert hit is not None
        assert hit.patch_id == 0
        assert hit.t == pytest.approx(2.0, abs=1e-12)

    def test_boundary_counts_as_hit(self):
        acc = build_accel([square(0, [0, 0, 0], [0, 0, 1], half=1.0)])
        assert acc.cast([1.0, 0.0, 2.0], [0.0, 0.0, -1.0]) is not None
        assert acc.cast([1.0 + 1e-9, 0.0, 2.0], [0.0, 0.0, -1.0]) is None

    def test_two_sided(self):
        acc = build_accel([square(0, [0, 0, 0], [0, 0, 1])])
        assert acc.cast([0, 0, -2.0], [0.0, 0.0, 1.0]) is not None

    def test_origin_epsilon_guard(self):
        # a ray starting on the surface does not hit its own patch
        acc = build_accel([square(0, [0, 0, 0], [0, 0, 1])])
        assert acc.cast([0.0, 0.0, 0.0], [1.0, 0.0, 0.0]) is None
        assert acc.cast([0.0, 0.0, 0.0], [0.0, 0.0, 1.0]) is None

    def test_parallel_ray_misses(self):
        acc = build_accel([square(0, [0, 0, 0], [0, 0, 1])])
        assert acc.cast([0.0, 0.0, 1.0], [1.0, 0.0, 0.0]) is None

    def test_zero_direction_rejected(self):
        acc = build_accel([square(0, [0, 0, 0], [0, 0, 1])])
        with pytest.raises(ValidationError):
            acc.cast([0, 0, 1], [0, 0, 0])

    def test_coplanar_tie_takes_lowest_id(self):
        a = square(7, [0, 0, 0], [0, 0, 1])
        b = square(3, [0.5, 0.0, 0.0], [0, 0, 1])
        for order in ([a, b], [b, a]):
            acc = build_accel(order)
            hit = acc.cast([0.6, 0.0, 1.0], [0.0, 0.0, -1.0])
            assert hit.patch_id == 3


class TestEmpty:
    def test_build_accel_rejects_empty(self):
        with pytest.raises(EmptyGeometryError):
            build_accel([])

    def test_internal_empty_index(self):
        acc = AccelIndex([])
        assert acc.cast([0, 0, 0], [0, 0, 1]) is None
        assert acc.visible([0, 0, 0], [1, 1, 1])
        t, idx = acc.cast_batch(np.zeros((4, 3)), np.tile([0.0, 0.0, 1.0], (4, 1)))
        assert np.all(np.isinf(t))
        assert np.all(idx == -1)


class TestVisibility:
    def setup_method(self):
        self.blocker = square(5, [0, 0, 1.0], [0, 0, 1], half=0.5)
        self.acc = build_accel([self.blocker])

    def test_blocked(self):
        assert not self.acc.visible([0, 0, 0], [0, 0, 2.0])

    def test_clear_path(self):
        assert self.acc.visible([2, 0, 0], [2, 0, 2.0])

    def test_ignored_blocker(self):
        assert self.acc.visible([0, 0, 0], [0, 0, 2.0], ignore=(5,))

    def test_endpoint_on_surface_not_blocking(self):
        # segment ends exactly on the blocker plane: endpoint epsilon excludes it
        assert self.acc.visible([0, 0, 0], [0, 0, 1.0])
        assert self.acc.visible([0, 0, 1.0], [0, 0, 0])

    def test_just_inside_blocks(self):
        assert not self.acc.visible([0, 0, 0], [0, 0, 1.0 + 5e-4])

    def test_matches_oracle(self, patch_soup):
        acc = build_accel(patch_soup)
        ora = LinearScanIndex(patch_soup)
        rng = np.random.default_rng(77)
        for _ in range(500):
            p0 = rng.uniform(-1, 5, size=3)
            p1 = rng.uniform(-1, 5, size=3)
            assert acc.visible(p0, p1) == ora.visible(p0, p1)


class TestOracleEquivalence:
    def test_random_rays_match_linear_scan(self, patch_soup):
        acc = build_accel(patch_soup)
        ora = LinearScanIndex(patch_soup)
        rng = np.random.default_rng(123)
        n = 2000
        origins = rng.uniform(-1.0, 5.0, size=(n, 3))
        dirs = rng.normal(size=(n, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        ts, idxs = acc.cast_batch(origins, dirs)
        misses = 0
        for r in range(n):
            ref = ora.cast(origins[r], dirs[r])
            if ref is None:
                assert idxs[r] == -1
                misses += 1
            else:
                assert idxs[r] >= 0
                assert acc.ids[idxs[r]] == ref[1]
                assert abs(ts[r] - ref[0]) < 1e-9
        assert misses < n  # scene dense enough that most rays hit

    def test_batch_matches_scalar(self, patch_soup):
        acc = build_accel(patch_soup)
        rng = np.random.default_rng(5)
        origins = rng.uniform(0, 4, size=(64, 3))
        dirs = rng.normal(size=(64, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        ts, idxs = acc.cast_batch(origins, dirs)
        for r in range(64):
            hit = acc.cast(origins[r], dirs[r])
            if hit is None:
                assert idxs[r] == -1
            else:
                assert idxs[r] == hit.index
                assert ts[r] == hit.t

    def test_thread_count_invariance(self, patch_soup):
        import numba

        acc = build_accel(patch_soup)
        rng = np.random.default_rng(6)
        origins = rng.uniform(0, 4, size=(256, 3))
        dirs = rng.normal(size=(256, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        old = numba.get_num_threads()
        try:
            numba.set_num_threads(1)
            t1, i1 = acc.cast_batch(origins, dirs)
            numba.set_num_threads(min(8, numba.config.NUMBA_NUM_THREADS))
            t8, i8 = acc.cast_batch(origins, dirs)
        finally:
            numba.set_num_threads(old)
        np.testing.assert_array_equal(t1, t8)
        np.testing.assert_array_equal(i1, i8)


class TestBodyPatches:
    def make_occupant(self):
        return Occupant(
            id=1,
            head_position=np.array([1.0, 2.0, 1.2]),
            gaze=np.array([1.0, 0.0, 0.0]),
            lsc=cosine_sensitivity(),
        )

    def test_prism_shape(self):
        occ = self.make_occupant()
        body = occupant_body_patches(occ, id_start=100)
        assert len(body) == 6
        assert [p.id for p in body] == list(range(100, 106))
        for p in body:
            # outward-facing vertical walls below the head
            radial = p.center - np.array([1.0, 2.0, p.center[2]])
            assert np.dot(radial, p.normal) > 0
            assert p.normal[2] == 0.0
            assert p.center[2] + p.half_extents[1] <= 1.2 - 0.15 + 1e-12

    def test_blocks_sideways_light(self):
        occ = self.make_occupant()
        acc = build_accel(occupant_body_patches(occ, id_start=0))
        # a segment through the torso at mid height
        assert not acc.visible([-2, 2.0, 0.6], [4, 2.0, 0.6])
        # but a segment above the head clears
        assert acc.visible([-2, 2.0, 1.5], [4, 2.0, 1.5])

    def test_head_too_low(self):
        occ = Occupant(
            id=2,
            head_position=np.array([0.0, 0.0, 0.1]),
            gaze=np.array([1.0, 0.0, 0.0]),
            lsc=cosine_sensitivity(),
        )
        with pytest.raises(ValidationError):
            occupant_body_patches(occ, id_start=0)

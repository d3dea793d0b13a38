import numpy as np
import pytest

from luxsim.geometry import rotation_from_axis
from luxsim.model import (
    LightDistributionCurve,
    Luminaire,
    LuxmeterSensitivityCurve,
    cosine_sensitivity,
    isotropic_curve,
)
from luxsim.photometry import eval_ldc, eval_ldc_angles, eval_lsc, intensity_toward


@pytest.fixture
def quad_ldc():
    """Four azimuth planes, three polar nodes, hand-checkable values."""
    return LightDistributionCurve(
        polar_deg=np.array([0.0, 60.0, 120.0]),
        azimuth_deg=np.array([0.0, 90.0, 180.0, 270.0]),
        candela=np.array(
            [
                [100.0, 80.0, 20.0],
                [100.0, 60.0, 10.0],
                [100.0, 40.0, 0.0],
                [100.0, 20.0, 5.0],
            ]
        ),
    )


@pytest.fixture
def downlight_ldc():
    # single azimuth plane, 1000 cd on axis falling to 400 cd at 60 deg
    return LightDistributionCurve(
        polar_deg=np.array([0.0, 60.0, 90.0]),
        azimuth_deg=np.array([0.0]),
        candela=np.array([[1000.0, 400.0, 0.0]]),
    )


class TestLdcInterpolation:
    def test_node_identity(self, quad_ldc):
        for j, az in enumerate(quad_ldc.azimuth_deg):
            for k, pol in enumerate(quad_ldc.polar_deg):
                assert eval_ldc_angles(quad_ldc, az, pol) == quad_ldc.candela[j, k]

    def test_bilinear_center(self, quad_ldc):
        # midway between az 0/90 and pol 0/60:
        # 0.5*(0.5*100+0.5*80) + 0.5*(0.5*100+0.5*60) = 85
        assert eval_ldc_angles(quad_ldc, 45.0, 30.0) == pytest.approx(85.0, rel=1e-12)

    def test_wraps_through_seam(self, quad_ldc):
        # 315 deg sits between the 270 plane and the 0 plane copied to 360
        # 0.5*(0.5*20+0.5*5) + 0.5*(0.5*80+0.5*20) = 31.25
        assert eval_ldc_angles(quad_ldc, 315.0, 90.0) == pytest.approx(31.25, rel=1e-12)

    def test_negative_azimuth_aliases(self, quad_ldc):
        assert eval_ldc_angles(quad_ldc, -45.0, 90.0) == eval_ldc_angles(quad_ldc, 315.0, 90.0)

    def test_polar_only_interp(self, downlight_ldc):
        assert eval_ldc_angles(downlight_ldc, 0.0, 30.0) == pytest.approx(700.0, rel=1e-12)
        assert eval_ldc_angles(downlight_ldc, 123.0, 30.0) == pytest.approx(700.0, rel=1e-12)

    def test_zero_beyond_last_polar_node(self, quad_ldc, downlight_ldc):
        assert eval_ldc_angles(quad_ldc, 10.0, 130.0) == 0.0
        assert eval_ldc_angles(downlight_ldc, 0.0, 90.0001) == 0.0
        # the last node itself still reads from the table
        assert eval_ldc_angles(quad_ldc, 0.0, 120.0) == 20.0

    def test_partial_polar_interp(self, quad_ldc):
        # az=200 between planes 180/270 (t=2/9), exactly on polar node 60
        expected = (1 - 2 / 9) * 40.0 + (2 / 9) * 20.0
        assert eval_ldc_angles(quad_ldc, 200.0, 60.0) == pytest.approx(expected, rel=1e-12)

    def test_periodic_in_azimuth(self, quad_ldc):
        # quarter-degree grid keeps az+360 exactly representable
        az = np.arange(-720.0, 720.0, 0.25)
        pol = np.full_like(az, 45.0)
        a = eval_ldc_angles(quad_ldc, az, pol)
        b = eval_ldc_angles(quad_ldc, az + 360.0, pol)
        np.testing.assert_array_equal(a, b)

    def test_vectorized_matches_scalar(self, quad_ldc):
        rng = np.random.default_rng(2)
        az = rng.uniform(-400, 400, size=64)
        pol = rng.uniform(0, 140, size=64)
        vec = eval_ldc_angles(quad_ldc, az, pol)
        loop = np.array([eval_ldc_angles(quad_ldc, a, p) for a, p in zip(az, pol)])
        np.testing.assert_array_equal(vec, loop)

    def test_values_bounded_by_nodes(self, quad_ldc):
        rng = np.random.default_rng(4)
        az = rng.uniform(0, 360, size=500)
        pol = rng.uniform(0, 120, size=500)
        vals = eval_ldc_angles(quad_ldc, az, pol)
        assert np.all(vals >= quad_ldc.candela.min() - 1e-12)
        assert np.all(vals <= quad_ldc.candela.max() + 1e-12)


class TestLdcDirections:
    def test_isotropic_everywhere(self):
        ldc = isotropic_curve(1000.0)
        expected = 1000.0 / (4.0 * np.pi)
        rng = np.random.default_rng(9)
        for _ in range(20):
            d = rng.normal(size=3)
            d /= np.linalg.norm(d)
            assert eval_ldc(ldc, d) == pytest.approx(expected, rel=1e-12)

    def test_on_axis(self, downlight_ldc):
        assert eval_ldc(downlight_ldc, np.array([0.0, 0.0, 1.0])) == 1000.0

    def test_sixty_degrees_off_axis(self, downlight_ldc):
        d = np.array([np.sin(np.radians(60.0)), 0.0, np.cos(np.radians(60.0))])
        assert eval_ldc(downlight_ldc, d) == pytest.approx(400.0, rel=1e-9)

    def test_batch_directions(self, downlight_ldc):
        dirs = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 0.0, -1.0]])
        vals = eval_ldc(downlight_ldc, dirs)
        np.testing.assert_allclose(vals, [1000.0, 0.0, 0.0], atol=1e-9)


class TestIntensityToward:
    def test_downlight_straight_down(self, downlight_ldc):
        lum = Luminaire(
            id=0,
            position=np.array([0.0, 0.0, 3.0]),
            rotation=rotation_from_axis(np.array([0.0, 0.0, -1.0])),
            ldc=downlight_ldc,
            power_watts=50.0,
        )
        assert intensity_toward(lum, np.array([0.0, 0.0, 0.0])) == pytest.approx(1000.0)
        # sideways is 90 deg off the emission axis -> table reads 0 there
        assert intensity_toward(lum, np.array([5.0, 0.0, 3.0])) == pytest.approx(0.0, abs=1e-9)

    def test_at_luminaire_position(self, downlight_ldc):
        lum = Luminaire(
            id=0,
            position=np.zeros(3),
            rotation=np.eye(3),
            ldc=downlight_ldc,
            power_watts=50.0,
        )
        assert intensity_toward(lum, np.zeros(3)) == 0.0


class TestLsc:
    def test_cosine_nodes(self):
        lsc = cosine_sensitivity(step_deg=5.0)
        assert eval_lsc(lsc, 0.0) == 1.0
        assert eval_lsc(lsc, 60.0) == pytest.approx(0.5, rel=1e-12)
        assert eval_lsc(lsc, 90.0) == 0.0
        assert eval_lsc(lsc, 95.0) == 0.0

    def test_linear_between_nodes(self):
        lsc = LuxmeterSensitivityCurve(np.array([0.0, 40.0, 80.0]), np.array([1.0, 0.6, 0.1]))
        assert eval_lsc(lsc, 20.0) == pytest.approx(0.8, rel=1e-12)
        assert eval_lsc(lsc, 60.0) == pytest.approx(0.35, rel=1e-12)

    def test_zero_beyond_last_node(self):
        lsc = LuxmeterSensitivityCurve(np.array([0.0, 45.0]), np.array([1.0, 0.5]))
        assert eval_lsc(lsc, 45.0) == 0.5
        assert eval_lsc(lsc, 50.0) == 0.0

    def test_vectorized(self):
        lsc = cosine_sensitivity()
        theta = np.array([0.0, 30.0, 89.0, 90.0, 120.0])
        out = eval_lsc(lsc, theta)
        assert out.shape == (5,)
        assert out[0] == 1.0
        assert out[-2:] == pytest.approx([0.0, 0.0])

    def test_bracketed_by_nodes(self):
        lsc = cosine_sensitivity()
        rng = np.random.default_rng(1)
        theta = rng.uniform(0, 90, size=200)
        w = eval_lsc(lsc, theta)
        assert np.all(w <= 1.0)
        assert np.all(w >= 0.0)

import numpy as np
import pytest

from luxsim.model import Patch


def random_patch_soup(rng, n, lo=0.0, hi=4.0, he_lo=0.05, he_hi=0.3):
    """Disjointly-ided random rectangles filling a box, for stress tests."""
    patches = []
    for i in range(n):
        normal = rng.normal(size=3)
        normal /= np.linalg.norm(normal)
        patches.append(
            Patch.from_normal(
                id=i,
                center=rng.uniform(lo, hi, size=3),
                normal=normal,
                half_extents=tuple(rng.uniform(he_lo, he_hi, size=2)),
                albedo=rng.uniform(0.1, 0.9),
            )
        )
    return patches


@pytest.fixture(scope="session")
def patch_soup():
    return random_patch_soup(np.random.default_rng(20240601), 300)

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from covbasis import (Breathing2D, GaugedFamily, GaussianChain, OverlapPair, Rotating2D,
                      SmoothGauge, TwoLevelSphere)


def small_families():
    """Every family kind at reduced grid sizes, keyed by a readable id."""
    rng = np.random.default_rng(3)
    chain = GaussianChain(n_grid=512)
    sphere = TwoLevelSphere()
    return {
        "rotating": (Rotating2D(theta=(0.1, 1.0, 0.3), ambient_dim=3), [0.4]),
        "breathing": (Breathing2D(alpha1=(1.0, 0.3), alpha2=(1.2, -0.1, 0.05)), [0.6]),
        "pair_symmetric": (OverlapPair((0.5, 0.1), motion="symmetric", n_grid=512), [0.3]),
        "pair_pinned": (OverlapPair((0.4, 0.2), motion="pinned", n_grid=512), [0.5]),
        "chain": (chain, [0.15]),
        "sphere": (sphere, [1.1, 0.7]),
        "gauged_sphere": (GaugedFamily(sphere, SmoothGauge.random(1, 2, rng)), [0.9, 2.0]),
        "gauged_chain": (GaugedFamily(chain, SmoothGauge.random(2, 1, rng)), [-0.1]),
    }


FAMILIES = small_families()


@pytest.fixture(params=sorted(FAMILIES), ids=sorted(FAMILIES))
def family_point(request):
    fam, r = FAMILIES[request.param]
    return fam, np.asarray(r, dtype=float)


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from chanmetric import channels as ch

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "data"
SCHEMAS = ROOT / "docs" / "schemas"

settings.register_profile(
    "chanmetric", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("chanmetric")


def random_pairs(count, seed, dim=2, kraus=(1, 2, 3)):
    """Seeded random channel pairs with a mix of Kraus counts."""
    rng = np.random.default_rng(seed)
    pairs = []
    for i in range(count):
        q1, q2 = kraus[i % len(kraus)], kraus[(i + 1) % len(kraus)]
        pairs.append(
            ch.ChannelPair(ch.random_channel(dim, num_kraus=q1, rng=rng), ch.random_channel(dim, num_kraus=q2, rng=rng))
        )
    return pairs


def random_hermitian(d, rng):
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (z + z.conj().T) / 2


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def paper_pair():
    return ch.ChannelPair(ch.rotation_x(0.3), ch.dephasing(0.5))

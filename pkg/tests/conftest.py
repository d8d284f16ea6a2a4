import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def gf2_rank_bruteforce(a: np.ndarray) -> int:
    """Rank as log2 of the size of the row span, by enumerating combinations."""
    a = np.asarray(a, dtype=np.int64) % 2
    m = a.shape[0]
    if m == 0:
        return 0
    combos = ((np.arange(2**m)[:, None] >> np.arange(m)) & 1)
    span = combos @ a % 2
    size = len({row.tobytes() for row in span.astype(np.uint8)})
    return int(np.log2(size))

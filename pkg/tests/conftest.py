import numpy as np
import pytest

from alem.backend import available_backends

BACKENDS = available_backends()


@pytest.fixture(params=BACKENDS)
def backend(request):
    """Run the test once per kernel backend importable in this process."""
    return request.param


def rand_feats(seed, n=30, d=4):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, d))

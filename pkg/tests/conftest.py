import numpy as np
import pytest

from fracneumann.mesh import build_mesh
from fracneumann.operators import assemble

_CACHE = {}


def operator_for(s, h=0.05, R=2.0, domain=(0.0, 1.0), q=8):
    key = (s, h, R, domain, q)
    if key not in _CACHE:
        _CACHE[key] = assemble(build_mesh(domain, h, R), s, q)
    return _CACHE[key]


@pytest.fixture(params=[0.3, 0.5, 0.75])
def op(request):
    return operator_for(request.param)


@pytest.fixture
def op_half():
    return operator_for(0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)

import numpy as np
import pytest
from hypothesis import strategies as st

from gmmpef.bench import load_golden
from gmmpef.gmm import Gmm


@pytest.fixture(scope="session")
def golden():
    return load_golden()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def small_gmm(rng, k, spread=3.0):
    """Random mixture with moderate means and widths, used by many property checks."""
    w = rng.uniform(0.2, 1.0, k)
    return Gmm(w / w.sum(), rng.uniform(-spread, spread, k), rng.uniform(0.5, 1.5, k))


@st.composite
def gmms(draw, max_k=4):
    k = draw(st.integers(1, max_k))
    w = np.array(draw(st.lists(st.floats(0.1, 1.0), min_size=k, max_size=k)))
    mus = draw(st.lists(st.floats(-4.0, 4.0), min_size=k, max_size=k))
    sigmas = draw(st.lists(st.floats(0.4, 2.0), min_size=k, max_size=k))
    return Gmm(w / w.sum(), mus, sigmas)

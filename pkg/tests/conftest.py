import warnings

import numpy as np
import pytest


@pytest.fixture(autouse=True)
def _quiet_low_dim_warning():
    # Low-dimension grids are used all over the tests for speed; the
    # theory-out-of-range warning they emit is asserted explicitly in
    # test_spectral and silenced everywhere else.
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="theory-out-of-range")
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(20260817)

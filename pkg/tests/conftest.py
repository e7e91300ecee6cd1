"""Shared fixtures."""

import numpy as np
import pytest

from lattice_spde.mollifier import build_psi


@pytest.fixture(scope="session")
def mollifier():
    return build_psi()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)

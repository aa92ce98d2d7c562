import numpy as np
import pytest

from sectorsum.fadle_spectra import find_roots, spectral_constants


@pytest.fixture(scope="session")
def table():
    return find_roots(10)


@pytest.fixture(scope="session")
def consts_half():
    return spectral_constants(np.pi / 2)


def clamped_bump(omega):
    """``theta^2 (omega - theta)^2`` and its second derivative."""
    f = lambda x: x ** 2 * (omega - x) ** 2
    f_dd = lambda x: 2 * (omega - x) ** 2 - 8 * x * (omega - x) + 2 * x ** 2
    return f, f_dd

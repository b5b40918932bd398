import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from orbitgeom import core  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def qubit_mixed():
    return core.density_from_frame(np.eye(2), core.make_spectrum([0.7, 0.3]))


def ket0():
    return core.pure_state([1, 0])


def ket_plus():
    return core.pure_state([1, 1])

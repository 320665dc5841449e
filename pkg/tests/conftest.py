import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from structpop import pbe, sinko
from structpop.grid import Grid
from structpop.model import ParamPoint, pbe_canonical, sinko_canonical
from structpop.solve import find_steady_state

PBE_REF = ParamPoint(1.0, 0.5, 1.0)
SINKO_CANON = ParamPoint(1.0 / math.log(2.0), 1.0, 1.0)


@pytest.fixture(scope="session")
def pbe_ref_op():
    return pbe.assemble(Grid(100), pbe_canonical(PBE_REF))


@pytest.fixture(scope="session")
def pbe_ref_state(pbe_ref_op):
    ss = find_steady_state(pbe_ref_op)
    assert ss is not None
    return ss


@pytest.fixture(scope="session")
def sinko_op100():
    return sinko.assemble(Grid(100), sinko_canonical(SINKO_CANON))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)

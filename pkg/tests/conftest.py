import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fosll.model import make_lshape_problem, make_table61_problem


@pytest.fixture(scope="session")
def table61():
    return make_table61_problem()


@pytest.fixture(scope="session")
def lshape():
    return make_lshape_problem()

import pytest

from apucosim.gasgen import GasGenDesignSpec, design_point_size


@pytest.fixture(scope="session")
def sized():
    """Default-spec sizing shared across the suite: (params, design solution)."""
    return design_point_size(GasGenDesignSpec())


@pytest.fixture(scope="session")
def gg_params(sized):
    return sized[0]


@pytest.fixture(scope="session")
def design_solution(sized):
    return sized[1]

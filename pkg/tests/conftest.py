import pytest

from corpus import line_instance


@pytest.fixture
def t1():
    """Line 0,1,4,5 with facilities at 0 and 5, a single group."""
    return line_instance([0, 1, 4, 5], [0, 0, 0, 0], [0, 5], 2, [1], [0])


@pytest.fixture
def t2():
    """Line 0,1,4,5; group 0 at 0 and 4, group 1 at 1 and 5; every cluster half and half."""
    return line_instance([0, 1, 4, 5], [0, 1, 0, 1], [0, 5], 2, ["1/2", "1/2"], ["1/2", "1/2"])

import pytest

from tcprate import TABLE1


@pytest.fixture(scope="session")
def table1():
    return TABLE1

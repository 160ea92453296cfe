import pytest

from cachestat import Catalog, zipf_catalog


@pytest.fixture
def small():
    return Catalog((2.0, 1.0, 1.0))


@pytest.fixture
def zipf5():
    return zipf_catalog(5, 0.75)


@pytest.fixture(scope="session")
def zipf12():
    return zipf_catalog(12, 0.75)

import pytest

from lrfhss_alloc import AllocationDistribution, NetworkConfig, default_catalog


@pytest.fixture
def catalog():
    return default_catalog()


@pytest.fixture
def dr8(catalog):
    return AllocationDistribution.dr8(catalog)


@pytest.fixture
def dr9(catalog):
    return AllocationDistribution.dr9(catalog)


@pytest.fixture
def cfg():
    return NetworkConfig()


ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")

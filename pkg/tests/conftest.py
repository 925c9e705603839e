import numpy as np
import pytest

from pcwlab.conversion import TrueConversionModel, fit_conversion
from pcwlab.datagen import GenConfig, build_training_pool, generate_customers


@pytest.fixture(scope="session")
def small_config():
    return GenConfig(n_customers=2000, n_train=1600, n_test=400, n_resamples=200_000, seed=11)


@pytest.fixture(scope="session")
def market(small_config):
    return generate_customers(small_config)


@pytest.fixture(scope="session")
def train_set(market):
    return market[0]


@pytest.fixture(scope="session")
def test_set(market):
    return market[1]


@pytest.fixture(scope="session")
def pool(train_set, small_config):
    return build_training_pool(train_set, TrueConversionModel(), small_config)


@pytest.fixture(scope="session")
def fitted(pool):
    return fit_conversion(pool)


@pytest.fixture
def np_rng():
    return np.random.default_rng(20240611)


CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line per acceptance criterion for the run summary."""

    def report(number: int, detail: str = ""):
        request.node._criterion = (number, detail)

    yield report
    number, detail = getattr(request.node, "_criterion", (None, ""))
    if number is not None:
        failed = getattr(request.node, "rep_call", None)
        status = "FAIL" if failed is None or failed.failed else "PASS"
        CRITERIA[number] = f"criterion {number}: {status}  {detail}".rstrip()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[k])

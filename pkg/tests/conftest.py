"""Shared fixtures. Expensive constructions are session-scoped."""
import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bergman_lab.analytic import kappa_symbol, lens_symbol
from bergman_lab.measures import Resolution, pullback

settings.register_profile("lab", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lab")


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def nu_kappa():
    """nu = pull-back of dA by kappa_{1/2}, w = 1, alpha = 0."""
    return pullback(kappa_symbol(0.5), None, 0.0, Resolution())


@pytest.fixture(scope="session")
def nu_lens():
    return pullback(lens_symbol(), None, 0.0, Resolution())


@pytest.fixture(scope="session")
def v_outputs(nu_kappa):
    from bergman_lab.constructions import build_v
    return {(b, e): build_v(nu_kappa, b, e) for b, e in [(1.0, 1 / 8), (0.25, 1 / 16)]}


@pytest.fixture(scope="session")
def decompact_timed():
    from bergman_lab.constructions import decompactify
    t0 = time.perf_counter()
    dw = decompactify(kappa_symbol(0.5), 0.0, 4)
    return dw, time.perf_counter() - t0


@pytest.fixture(scope="session")
def decompact(decompact_timed):
    return decompact_timed[0]


# --- acceptance report ---------------------------------------------------------------

ACCEPTANCE = {}


@pytest.fixture
def record():
    """record(number, ok, detail) stores one acceptance line and returns ok."""
    def _record(number, ok, detail=""):
        ACCEPTANCE[number] = (bool(ok), detail)
        print(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")

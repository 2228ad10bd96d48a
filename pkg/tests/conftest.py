import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from scalekit import Coefficient, DiffusionModel, ExponentialJumps, FixedJumps, SNLPModel

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def bm():
    return SNLPModel(drift=0.0, gaussian=1.0)


@pytest.fixture
def cl():
    return SNLPModel(drift=1.5, jump_rate=1.0, jump_law=ExponentialJumps(1.0))


@pytest.fixture
def fixed_jumps():
    return SNLPModel(drift=1.0, gaussian=0.5, jump_rate=1.0, jump_law=FixedJumps(0.5))


@pytest.fixture
def bm_diffusion():
    return DiffusionModel(Coefficient.constant(0.0), Coefficient.constant(1.0))


@pytest.fixture
def drifted_diffusion():
    return DiffusionModel(Coefficient.constant(-1.0), Coefficient.constant(1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# -- acceptance summary --------------------------------------------------------

_CRITERIA = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        detail = dict(item.user_properties).get("detail", "")
        _CRITERIA.append((marker.args[0], marker.args[1], rep.outcome, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, outcome, detail in sorted(_CRITERIA, key=lambda c: c[0]):
        verdict = "PASS" if outcome == "passed" else outcome.upper()
        line = f"criterion {number:>2}  {verdict:<7} {title}"
        terminalreporter.write_line(f"{line}  [{detail}]" if detail else line)

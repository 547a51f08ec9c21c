import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from datesso.model import ComponentService, ServiceRepository, SlaConstraints

settings.register_profile(
    "default",
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def make_repo(groups):
    """``groups[x]`` is a list of (T, L) or (T, L, O) tuples; ids are ``c{x}_{y}``."""
    services = []
    for x, group in enumerate(groups):
        for y, entry in enumerate(group):
            t_req, lat, *rest = entry
            services.append(ComponentService(f"c{x}_{y}", x, t_req, lat, rest[0] if rest else 0.0))
    return ServiceRepository.from_services(services)


def sat(w_opt, cl=0.09, t_req=100):
    """(T, L) of a candidate whose utilization hits 1 exactly at workload ``w_opt``."""
    return (t_req, cl * t_req / w_opt)


@pytest.fixture
def sla1():
    return SlaConstraints.uniform(1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --- acceptance reporting -----------------------------------------------------

_VERDICTS = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when != "call":
        return
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    _VERDICTS.append((mark.args[0], rep.passed, mark.args[1], detail))


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid, ok, text, detail in _VERDICTS:
        line = f"{'PASS' if ok else 'FAIL'}  [{cid}] {text}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))

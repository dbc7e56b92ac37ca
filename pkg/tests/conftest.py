import pytest
from hypothesis import HealthCheck, settings

from robustalloc.io import load_builtin

settings.register_profile(
    "default",
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def support_only():
    """Types [2,8] x [0,10], unit costs."""
    return load_builtin("support_only_example")


@pytest.fixture
def markov():
    """Types [1,6] x [0,10], costs 2, means [4,5] x [3,7]."""
    return load_builtin("markov_example")


@pytest.fixture
def independent():
    return load_builtin("independent_example")


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        terminalreporter.write_line(results[k][1])

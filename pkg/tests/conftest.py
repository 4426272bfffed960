import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from loglab.solver import SolveConfig, minimize

settings.register_profile(
    "loglab",
    max_examples=25,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("loglab")

# log-obstacle instances with an interior free boundary
SOLVED_INSTANCES = {
    "ball": dict(n=257, boundary_datum=0.05, domain_shape="ball", ball_radius=0.95),
    "expr": dict(n=257, boundary_datum={"type": "expression", "expr": "0.01+0.2*(x+1)**2*(1+0.5*y)"}),
    "corner": dict(n=257, boundary_datum={"type": "expression", "expr": "0.3*(x**2+y**2)**2"}),
}

_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per criterion; printed in the terminal summary."""
    lines = request.config.stash[_ACCEPTANCE_KEY]

    def record(name: str, passed: bool, detail: str = "") -> bool:
        line = f"{'PASS' if passed else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
        lines.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def solved_instances():
    """Solved log-obstacle fields, computed once per session."""
    return {name: minimize(SolveConfig(**cfg)) for name, cfg in SOLVED_INSTANCES.items()}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

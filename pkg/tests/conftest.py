import numpy as np
import pytest

from jointcongestion import Instance, random_instance

ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20260101)


@pytest.fixture
def inst53(rng):
    return random_instance(rng)


def random_routing(inst, rng, spread=0.9):
    """Strictly feasible routing drawn around the proportional start."""
    from jointcongestion.central import initial_feasible, project_feasible

    x0 = initial_feasible(inst)
    for _ in range(100):
        y = project_feasible(inst, x0 + spread * rng.normal(size=x0.shape) * x0.mean())
        if y is not None and np.all(y < inst.path_caps) and np.all(y.sum(0) < inst.node_caps):
            return y
    return x0


def asym_1x2():
    return Instance.mm1([1.0], [[3.0, 3.0]], [2.0, 4.0])

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mazeattack import EvalSet, TargetSpec, make_dataset, train_target

settings.register_profile(
    "default", deadline=None, max_examples=50, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def small_task():
    """A quick blobs task with a trained target, shared by the attack tests."""
    ds = make_dataset(n_train=800, n_test=400, d=8, k=3, seed=1)
    target, acc = train_target(TargetSpec(hidden=(16,), epochs=15), ds)
    return ds, target, EvalSet.from_dataset(ds, acc)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def record(criterion, ok, detail):
    line = f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

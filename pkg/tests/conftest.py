import numpy as np
import pytest

from wavelab.trainer import TrainConfig, train_pair

# (criterion, verdict, detail) rows collected by the acceptance suite
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(ACCEPTANCE, key=lambda r: int(r[0].split()[0].lstrip("AC"))):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line and echo it immediately."""
    def record(name, ok, detail):
        ACCEPTANCE.append((name, bool(ok), detail))
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        return ok
    return record


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture(scope="session")
def small_pair():
    """Trained 76 -> 64 pair on N = 128 (the smallest published configuration)."""
    pair, _ = train_pair(76, 64, 128, TrainConfig())
    return pair


@pytest.fixture(scope="session")
def mid_pair():
    pair, _ = train_pair(150, 125, 256, TrainConfig())
    return pair


@pytest.fixture(scope="session")
def large_pair():
    pair, _ = train_pair(600, 492, 1024, TrainConfig())
    return pair

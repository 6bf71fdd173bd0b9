import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

EXP1_SOURCES = np.array([[0.3, 0.78, 0.8], [0.8, 0.13, 0.8], [0.7, 0.7, 0.1], [0.2, 0.2, 0.2]])
EXP2_SOURCES = np.array([[0.29, 0.32, 0.33], [0.67, 0.32, 0.33], [0.67, 0.67, 0.33],
                   [0.67, 0.67, 0.76]])


@pytest.fixture(scope="session")
def exp1_dataset():
    from hugmodel.data import SyntheticSpec, generate_synthetic, normalize

    ds, _ = normalize(generate_synthetic(SyntheticSpec(EXP1_SOURCES, 200, seed=1)))
    return ds


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    def _report(label: str, ok: bool, detail: str) -> bool:
        ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

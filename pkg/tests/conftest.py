import json
from pathlib import Path

import numpy as np
import pytest

from sprayholonomy.examples import builtin_examples

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def examples():
    return {ex.id: ex for ex in builtin_examples()}


@pytest.fixture(scope="session")
def oracles():
    return json.loads((DATA / "oracles.json").read_text())


def sample_points(model, count, seed):
    rng = np.random.default_rng(seed)
    return [model.domain.sample(rng) for _ in range(count)]


P0 = np.array([0.0, 1.0, 1.0, 1.0])


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        status, line = results[k]
        terminalreporter.write_line(f"criterion {k}: {status}  {line}")

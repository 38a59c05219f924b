import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from socfeas.cli import expand_suite, run_experiment  # noqa: E402

# Shared suite: 15 primal runs (five instances at three gammas) and 15 dual
# runs (five shapes at three seeds), with m <= 8, r <= 4 and n_i <= 4.
SUITE = {
    "samples": 200,
    "entries": [
        {"kind": "primal", "m": 1, "cone": [2], "seeds": [1], "gamma": [0.5, 0.1, 0.01]},
        {"kind": "primal", "m": 2, "cone": [3, 1], "seeds": [2], "gamma": [0.5, 0.1, 0.01]},
        {"kind": "primal", "m": 3, "cone": [2, 2, 1], "seeds": [3], "gamma": [0.5, 0.1, 0.01]},
        {"kind": "primal", "m": 4, "cone": [2, 1, 2, 1], "seeds": [4], "gamma": [0.5, 0.1, 0.01]},
        {"kind": "primal", "m": 6, "cone": [3, 2, 3, 2], "seeds": [5], "gamma": [0.5, 0.1, 0.01]},
        {"kind": "dual", "m": 2, "cone": [2], "seeds": [1, 2, 3]},
        {"kind": "dual", "m": 3, "cone": [2, 2], "seeds": [1, 2, 3]},
        {"kind": "dual", "m": 4, "cone": [1, 3, 2], "seeds": [1, 2, 3]},
        {"kind": "dual", "m": 4, "cone": [2, 1, 2, 1], "seeds": [1, 2, 3]},
        {"kind": "dual", "m": 6, "cone": [3, 2, 3, 3], "seeds": [1, 2, 3]},
    ],
}


@pytest.fixture(scope="session")
def suite_runs():
    """``(entry, row, outcome)`` for every suite instance, iterates kept."""
    t = time.perf_counter()
    entries = expand_suite(SUITE)
    results = run_experiment(entries, SUITE["samples"], keep_iterates=True)
    SUITE_SECONDS.append(time.perf_counter() - t)
    return [(e, row, out) for e, (row, out) in zip(entries, results)]


# Wall-clock seconds spent building the shared suite.
SUITE_SECONDS: list[float] = []


# One summary line per acceptance criterion, filled in by test_acceptance.py.
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")

import time

import pytest

from open_oven.const import DEFAULT_MAX_CONCURRENT_SOLVES, THREADS_ENV
from open_oven.solve_executor import (
    SolveExecutor,
    SolveJob,
    max_concurrent_solves,
)


def slow_solver(medium, freq):
    time.sleep(0.01 * medium)
    return (freq, medium)


def test_results_keep_job_order():
    jobs = [SolveJob(freq=f, medium=m) for f, m in [(1, 3), (2, 1), (3, 2)]]
    executor = SolveExecutor(slow_solver, max_concurrent=3)
    assert executor.solve_all(jobs) == [(1, 3), (2, 1), (3, 2)]
    serial = SolveExecutor(slow_solver, max_concurrent=1)
    assert serial.solve_all(jobs) == [(1, 3), (2, 1), (3, 2)]
    assert executor.solve_all([]) == []


def test_errors_propagate():
    def failing(medium, freq):
        if freq == 2:
            raise RuntimeError("solve failed")
        return freq

    executor = SolveExecutor(failing, max_concurrent=2)
    with pytest.raises(RuntimeError):
        executor.solve_all([SolveJob(1, None), SolveJob(2, None)])


@pytest.mark.parametrize(
    "raw, expected",
    [
        (None, DEFAULT_MAX_CONCURRENT_SOLVES),
        ("", DEFAULT_MAX_CONCURRENT_SOLVES),
        ("4", 4),
        ("0", 1),
        ("many", DEFAULT_MAX_CONCURRENT_SOLVES),
    ],
)
def test_concurrency_from_environment(monkeypatch, raw, expected):
    if raw is None:
        monkeypatch.delenv(THREADS_ENV, raising=False)
    else:
        monkeypatch.setenv(THREADS_ENV, raw)
    assert max_concurrent_solves() == expected
    assert SolveExecutor(slow_solver).max_concurrent == expected

import asyncio
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import partial
import logging
import os

from .const import DEFAULT_MAX_CONCURRENT_SOLVES, THREADS_ENV

_LOGGER = logging.getLogger(__name__)


def max_concurrent_solves() -> int:
    """Concurrency limit from OPEN_OVEN_THREADS, falling back to default."""
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return DEFAULT_MAX_CONCURRENT_SOLVES
    try:
        value = int(raw)
    except ValueError:
        _LOGGER.warning(
            "Ignoring %s=%r, expected an integer", THREADS_ENV, raw
        )
        return DEFAULT_MAX_CONCURRENT_SOLVES
    return max(value, 1)


@dataclass(frozen=True)
class SolveJob:
    """One harmonic EM solve request."""

    freq: float
    medium: object


class SolveExecutor:
    """Runs independent EM solves with bounded concurrency."""

    def __init__(self, solver, max_concurrent=None) -> None:
        """Initialize the executor.

        :param solver: callable (medium, freq) -> PowerMap.
        :param max_concurrent: max num of solves running at once.
        """
        self.solver = solver
        self.max_concurrent = max_concurrent or max_concurrent_solves()

    def solve_all(self, jobs: list[SolveJob]) -> list:
        """Solve every job; results come back in job order."""
        if len(jobs) <= 1 or self.max_concurrent == 1:
            return [self._solve(job) for job in jobs]
        return asyncio.run(self._solve_all(jobs))

    def _solve(self, job: SolveJob):
        _LOGGER.info("EM solve at %.6g Hz", job.freq)
        try:
            return self.solver(job.medium, job.freq)
        except Exception as e:
            _LOGGER.error("EM solve at %.6g Hz failed: %s", job.freq, e)
            raise

    async def _solve_all(self, jobs: list[SolveJob]) -> list:
        semaphore = asyncio.Semaphore(self.max_concurrent)
        loop = asyncio.get_running_loop()
        with ThreadPoolExecutor(max_workers=self.max_concurrent) as pool:

            async def run_one(job):
                async with semaphore:
                    return await loop.run_in_executor(
                        pool, partial(self._solve, job)
                    )

            return await asyncio.gather(*(run_one(job) for job in jobs))

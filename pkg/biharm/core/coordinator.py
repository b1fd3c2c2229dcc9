"""Fans ladder entries out to worker processes and collects them in task order."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

from .observability import StudyEventLog

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class LadderTask:
    """One refinement level of a study. Primitive fields only, so it pickles."""

    index: int
    n: int
    m: int
    case: str
    scheme: str
    tol: float
    maxit: Optional[int] = None
    preconditioner: str = "none"
    degree: int = 2


@dataclass
class LadderResult:
    """Result of one ladder entry; ``error_message`` is set when ``success`` is false."""

    index: int
    m: int
    h: float
    success: bool
    error_h2h: Optional[float] = None
    cg_iters: int = 0
    residual: float = 0.0
    solution_l2: Optional[float] = None
    error_message: str = ""
    diverged: bool = False


Worker = Callable[[LadderTask], LadderResult]


class LadderCoordinator:
    """Runs ladder tasks sequentially (``jobs == 1``) or on a process pool."""

    def __init__(
        self,
        worker: Worker,
        *,
        jobs: int = 1,
        events: Optional[StudyEventLog] = None,
        stop_on_failure: bool = True,
    ) -> None:
        if jobs < 1:
            raise ValueError(f"jobs must be >= 1, got {jobs}")
        self._worker = worker
        self._jobs = jobs
        self._events = events
        self._stop_on_failure = stop_on_failure

    @property
    def jobs(self) -> int:
        return self._jobs

    def execute_tasks(self, tasks: Sequence[LadderTask]) -> List[LadderResult]:
        """Execute tasks and return results in task order.

        With ``stop_on_failure`` the list ends at the first failed entry.
        """
        if self._jobs == 1 or len(tasks) <= 1:
            results = self._run_sequential(tasks)
        else:
            results = self._run_pool(tasks)
        if self._stop_on_failure:
            for position, result in enumerate(results):
                if not result.success:
                    results = results[: position + 1]
                    break
        for result in results:
            self._report(result)
        return results

    def _run_sequential(self, tasks: Sequence[LadderTask]) -> List[LadderResult]:
        results: List[LadderResult] = []
        for task in tasks:
            LOGGER.info("Running ladder entry %d (n=%d, m=%d)", task.index, task.n, task.m)
            result = self._worker(task)
            results.append(result)
            if not result.success and self._stop_on_failure:
                LOGGER.warning("Ladder entry m=%d failed: %s", task.m, result.error_message)
                break
        return results

    def _run_pool(self, tasks: Sequence[LadderTask]) -> List[LadderResult]:
        LOGGER.info("Running %d ladder entries on %d worker processes", len(tasks), self._jobs)
        collected: Dict[int, LadderResult] = {}
        with ProcessPoolExecutor(max_workers=self._jobs) as pool:
            futures = {pool.submit(self._worker, task): position for position, task in enumerate(tasks)}
            for future, position in futures.items():
                collected[position] = future.result()
        return [collected[position] for position in range(len(tasks))]

    def _report(self, result: LadderResult) -> None:
        if self._events is None:
            return
        self._events.ladder_entry(
            result.m,
            result.error_h2h,
            success=result.success,
            cg_iters=result.cg_iters,
            residual=result.residual,
        )


__all__ = ["LadderCoordinator", "LadderResult", "LadderTask", "Worker"]

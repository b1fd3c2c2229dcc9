"""Tests for the ladder coordinator."""

from __future__ import annotations

import pytest

from biharm.analysis.studies import solve_ladder_entry
from biharm.core.coordinator import LadderCoordinator, LadderResult, LadderTask
from biharm.core.observability import StudyEventLog


def _task(index: int, m: int, case: str = "zero") -> LadderTask:
    return LadderTask(index=index, n=2, m=m, case=case, scheme="centered", tol=1e-10)


def _echo(task: LadderTask) -> LadderResult:
    return LadderResult(task.index, task.m, 1.0 / task.m, True, error_h2h=float(task.m))


@pytest.mark.unit
def test_sequential_results_keep_task_order():
    """Test sequential execution returns results in task order."""
    results = LadderCoordinator(_echo).execute_tasks([_task(0, 4), _task(1, 8), _task(2, 16)])
    assert [r.m for r in results] == [4, 8, 16]
    assert all(r.success for r in results)


@pytest.mark.unit
def test_stop_on_failure_truncates_the_ladder():
    """Test a failed rung stops the remaining rungs."""
    calls = []

    def worker(task):
        calls.append(task.m)
        return LadderResult(task.index, task.m, 1.0 / task.m, task.m != 8, error_message="boom")

    tasks = [_task(0, 4), _task(1, 8), _task(2, 16)]
    results = LadderCoordinator(worker).execute_tasks(tasks)
    assert [r.m for r in results] == [4, 8]
    assert calls == [4, 8]
    calls.clear()
    results = LadderCoordinator(worker, stop_on_failure=False).execute_tasks(tasks)
    assert [r.success for r in results] == [True, False, True]


@pytest.mark.unit
def test_jobs_must_be_positive():
    with pytest.raises(ValueError):
        LadderCoordinator(_echo, jobs=0)


@pytest.mark.unit
def test_entries_are_reported_as_events(mocker):
    """Test every finished rung is sent to the event log."""
    events = mocker.Mock(spec=StudyEventLog)
    LadderCoordinator(_echo, events=events).execute_tasks([_task(0, 4), _task(1, 8)])
    assert events.ladder_entry.call_count == 2
    first = events.ladder_entry.call_args_list[0]
    assert first.args == (4, 4.0)
    assert first.kwargs["success"] is True


@pytest.mark.unit
def test_process_pool_matches_sequential():
    """Test pooled execution matches sequential execution."""
    tasks = [_task(0, 4, "sine4"), _task(1, 6, "sine4"), _task(2, 8, "sine4")]
    sequential = LadderCoordinator(solve_ladder_entry).execute_tasks(tasks)
    pooled = LadderCoordinator(solve_ladder_entry, jobs=2).execute_tasks(tasks)
    assert [r.m for r in pooled] == [4, 6, 8]
    assert [r.error_h2h for r in pooled] == [r.error_h2h for r in sequential]
    assert [r.cg_iters for r in pooled] == [r.cg_iters for r in sequential]

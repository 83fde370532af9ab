import numpy as np
import pytest

import fibration.monodromy as mono
import pipeline.planner as planner
from fibration.errors import DomainError, NoConvergence, RoundingAmbiguous
from fibration.phase_space import IntegralValue, PhasePoint, SystemParams
from pipeline.langgraph_workflow import run_langgraph_agent, should_retry
from pipeline.state import MonodromyState

WAYPOINTS = [IntegralValue(2.0, 1.0, 1.8), IntegralValue(2.2, 1.0, 1.8), IntegralValue(2.1, 1.2, 1.8)]
T2 = np.array([1.0, 0.0, 0.5])
T3 = np.array([0.0, 1.0, 0.2])


def _fiber(target, *args, **kwargs):
    return mono.FiberPoint(PhasePoint(0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0), target, 1e-13)


def _basis(fp, guess2, guess3, params=None, **kwargs):
    return mono.PeriodBasis(mono.T1_VECTOR.copy(), T2.copy(), T3.copy(), fp)


def _twisted(basis, loop, params=None, log=None, **kwargs):
    log.steps += len(loop.waypoints) * loop.steps_per_segment
    return mono.PeriodBasis(basis.T1.copy(), basis.T2 + basis.T3, basis.T3.copy(), basis.fiber)


@pytest.fixture
def fake_solvers(monkeypatch):
    monkeypatch.setattr(mono, "solve_fiber_point_retry", _fiber)
    monkeypatch.setattr(mono, "recurrence_guesses", lambda fp, params=None: (T2, T3))
    monkeypatch.setattr(mono, "solve_period_basis", _basis)
    monkeypatch.setattr(mono, "continue_basis", _twisted)
    monkeypatch.setattr(mono, "closure_defect", lambda T, P, params=None: 0.0)
    monkeypatch.setattr(planner, "check_regular", lambda loop, guard=None: None)
    return monkeypatch


def _tools(state):
    return [c["tool"] for c in state.tool_calls]


def test_custom_loop_verified(fake_solvers):
    state = run_langgraph_agent("custom", waypoints=WAYPOINTS)
    assert state.verified
    assert state.attempts == 1
    assert np.array_equal(state.raw.entries, [[1, 0, 0], [0, 1, 1], [0, 0, 1]])
    assert state.loop.waypoints[-1] == WAYPOINTS[0]
    assert _tools(state) == ["solve_fiber_point", "solve_period_basis", "continue_basis"]
    assert all(c["result_status"] == "success" for c in state.tool_calls)


def test_rounding_failure_retries_with_finer_steps(fake_solvers):
    calls = []

    def flaky(basis, loop, params=None, log=None, **kwargs):
        calls.append(loop.steps_per_segment)
        out = _twisted(basis, loop, params, log)
        if len(calls) == 1:
            out.T2 = out.T2 + np.array([0.3, 0.0, 0.0])
        return out

    fake_solvers.setattr(mono, "continue_basis", flaky)
    state = run_langgraph_agent("custom", waypoints=WAYPOINTS)
    assert calls == [1, 2]
    assert state.verified
    assert state.attempts == 2
    assert _tools(state) == ["solve_fiber_point", "solve_period_basis", "continue_basis", "continue_basis"]


def test_fiber_failure_raises_after_retries(fake_solvers):
    def never(target, *args, **kwargs):
        raise NoConvergence("no seed converged")

    fake_solvers.setattr(mono, "solve_fiber_point_retry", never)
    with pytest.raises(NoConvergence):
        run_langgraph_agent("custom", waypoints=WAYPOINTS)


def test_default_loop_needs_stc():
    with pytest.raises(DomainError):
        run_langgraph_agent("gamma1", params=SystemParams(0.5, 1.5, 1.0, 2.0))


def test_custom_loop_needs_waypoints():
    with pytest.raises(DomainError):
        run_langgraph_agent("custom", waypoints=None)


def test_should_retry_stops_at_max_attempts():
    state = MonodromyState(loop_name="custom", attempts=2, max_attempts=2)
    assert should_retry({"agent": state}) == "end"
    state = MonodromyState(loop_name="custom", attempts=1, max_attempts=2)
    assert should_retry({"agent": state}) == "retry"
    assert state.steps_per_segment == 2


def test_should_retry_skips_non_retryable():
    state = MonodromyState(loop_name="custom", attempts=1, failure=DomainError("bad loop"))
    assert should_retry({"agent": state}) == "end"


@pytest.mark.slow
def test_gamma1_end_to_end():
    state = run_langgraph_agent("gamma1")
    assert state.verified
    assert np.array_equal(state.conjugated.entries, [[1, 0, 0], [0, 1, 1], [0, 0, 1]])
    assert np.array_equal(state.reduced, [[1, 1], [0, 1]])


def test_tolerances_reach_the_solvers(fake_solvers):
    seen = {}

    def fiber(target, *args, **kwargs):
        seen["fiber"] = kwargs.get("tol")
        return _fiber(target)

    def basis(fp, guess2, guess3, params=None, **kwargs):
        seen["period"] = kwargs.get("tol")
        return _basis(fp, guess2, guess3)

    def twisted(basis, loop, params=None, log=None, **kwargs):
        seen["transport"] = (kwargs.get("fiber_tol"), kwargs.get("period_tol"))
        return _twisted(basis, loop, params, log)

    fake_solvers.setattr(mono, "solve_fiber_point_retry", fiber)
    fake_solvers.setattr(mono, "solve_period_basis", basis)
    fake_solvers.setattr(mono, "continue_basis", twisted)
    state = run_langgraph_agent("custom", waypoints=WAYPOINTS, tolerances={"fiber": 1e-9, "period": 1e-6})
    assert seen == {"fiber": 1e-9, "period": 1e-6, "transport": (1e-9, 1e-6)}
    assert state.verified


def test_rounding_tolerance_is_honored(fake_solvers):
    def noisy(basis, loop, params=None, log=None, **kwargs):
        out = _twisted(basis, loop, params, log)
        out.T2 = out.T2 + np.array([1e-4, 0.0, 0.0])
        return out

    fake_solvers.setattr(mono, "continue_basis", noisy)
    state = run_langgraph_agent("custom", waypoints=WAYPOINTS)
    assert np.array_equal(state.raw.entries, [[1, 0, 0], [0, 1, 1], [0, 0, 1]])

    with pytest.raises(RoundingAmbiguous):
        run_langgraph_agent("custom", waypoints=WAYPOINTS, tolerances={"rounding": 1e-6})


def test_planner_places_loop_at_base_and_radius():
    base = IntegralValue(2.0, 1.2, 1.8)
    state = planner.plan_task(MonodromyState(loop_name="gamma1", base=base, radius=0.3))
    assert state.failure is None
    assert state.loop.base == base
    assert state.loop.waypoints[0] == base and state.loop.waypoints[-1] == base
    circle = [w for w in state.loop.waypoints if abs(w.k - 1.8) < 1e-12]
    assert circle


@pytest.mark.parametrize("radius", [0.01, 0.04])
def test_planner_rejects_loop_through_critical_value(radius):
    state = planner.plan_task(MonodromyState(loop_name="gamma1", radius=radius))
    assert isinstance(state.failure, DomainError)
    assert state.plan == []


def test_planner_rejects_base_near_critical_value():
    ff = sorted(mono.focus_focus_values(1.8), key=lambda v: -v.h1)[0]
    state = planner.plan_task(MonodromyState(loop_name="gamma1", base=IntegralValue(ff.h1 + 0.01, ff.h2, ff.k)))
    assert isinstance(state.failure, DomainError)


def test_custom_loop_rejects_placement():
    state = planner.plan_task(MonodromyState(loop_name="custom", custom_waypoints=WAYPOINTS, radius=0.3))
    assert isinstance(state.failure, DomainError)

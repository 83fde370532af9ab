"""
Planner node: builds the loop of regular values and the execution plan.
In LangGraph, this is the entry node that sets up the workflow.
"""
from __future__ import annotations

from fibration.errors import DomainError, FibrationError
from fibration.monodromy import LOOP_LEVELS, LOOP_RADIUS, R0, LoopSpec, check_regular, default_loop
from fibration.phase_space import STC
from pipeline.state import MonodromyState


def _build_loop(state: MonodromyState) -> LoopSpec:
    if state.loop_name in LOOP_LEVELS:
        if state.params != STC:
            raise DomainError(f"loop '{state.loop_name}' is defined for the STC parameters only")
        base = state.base if state.base is not None else R0
        radius = state.radius if state.radius is not None else LOOP_RADIUS
        return default_loop(state.loop_name, base=base, radius=radius, steps_per_segment=state.steps_per_segment)
    if state.base is not None or state.radius is not None:
        raise DomainError("base and radius place the default loops only; a custom loop takes waypoints")
    if not state.custom_waypoints:
        raise DomainError(f"loop '{state.loop_name}' needs waypoints")
    way = list(state.custom_waypoints)
    if way[-1].distance(way[0]) > 1e-12:
        way.append(way[0])
    return LoopSpec(base=way[0], waypoints=way, steps_per_segment=state.steps_per_segment, name=state.loop_name)


def plan_task(state: MonodromyState) -> MonodromyState:
    """Create the loop and the execution plan."""
    print("PLANNER: building loop waypoints")

    try:
        state.loop = _build_loop(state)
        if state.params == STC:
            check_regular(state.loop)
    except FibrationError as e:
        print(f"   !! loop rejected: {e}")
        state.failure = e
        state.plan = []
        return state

    print(f"   -> {len(state.loop.waypoints)} waypoints, {state.steps_per_segment} step(s) per segment")
    state.plan = [
        "Solve base fiber point",
        "Solve initial period basis",
        "Transport basis around loop",
    ]
    return state

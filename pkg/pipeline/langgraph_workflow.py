"""
LangGraph workflow for transporting a period basis around a loop of regular values.

Graph structure:
    [START] → plan → route_after_plan → execute → analyze → route_after_analyze
                  ↓                                      ↓                 ↓
             handle_error                             verify         handle_error
                                                     ↓      ↓
                                                  retry    END

A retry re-runs the transport with twice as many steps per segment, keeping the
base fiber point and the initial basis, until the audits pass or max_attempts
is reached.
"""
from __future__ import annotations

from typing import Dict, List, Optional, TypedDict

from langgraph.graph import StateGraph, END

from fibration.errors import FibrationError
from fibration.phase_space import STC, IntegralValue, SystemParams
from pipeline.analyzer import analyze_evidence, is_retryable
from pipeline.executor import execute_plan
from pipeline.planner import plan_task
from pipeline.state import MonodromyState
from pipeline.verifier import verify_output


# ----------------------------
# LangGraph State Container
# ----------------------------
class GraphState(TypedDict):
    agent: MonodromyState


# ----------------------------
# Graph Nodes
# ----------------------------
def node_plan(gs: GraphState) -> GraphState:
    """Plan node: build the loop and the step list."""
    state = gs["agent"]
    state = plan_task(state)
    return {"agent": state}


def node_execute(gs: GraphState) -> GraphState:
    """Execute node: fiber point, period basis, transport."""
    state = gs["agent"]
    print(f" - Transport attempt {state.attempts + 1}/{state.max_attempts}")
    state = execute_plan(state)
    return {"agent": state}


def node_analyze(gs: GraphState) -> GraphState:
    """Analyze node: round the monodromy matrix, decide routing."""
    state = gs["agent"]
    state = analyze_evidence(state)
    return {"agent": state}


def node_verify(gs: GraphState) -> GraphState:
    """Verify node: audit residuals and reference data."""
    state = gs["agent"]
    state = verify_output(state)
    return {"agent": state}


def node_handle_error(gs: GraphState) -> GraphState:
    """Error node: failure that a finer transport cannot fix."""
    state = gs["agent"]
    print(" - Handle error")
    state.verified = False
    state.errors = [f"{type(state.failure).__name__}: {state.failure}"]
    print(f"VERIFIER: skipped ({state.errors[0]})")
    return {"agent": state}


# ----------------------------
# Routing Functions
# ----------------------------
def route_after_plan(gs: GraphState) -> str:
    state = gs["agent"]
    return "handle_error" if state.failure is not None else "execute"


def route_after_analyze(gs: GraphState) -> str:
    state = gs["agent"]
    return "handle_error" if state.route_decision == "error" else "verify"


def should_retry(gs: GraphState) -> str:
    """Conditional edge after verify: retry or finish."""
    state = gs["agent"]

    if state.verified:
        return "end"

    if state.attempts >= state.max_attempts:
        return "end"

    if state.failure is not None and not is_retryable(state.failure):
        return "end"

    state.steps_per_segment *= 2
    if state.loop is not None:
        state.loop.steps_per_segment = state.steps_per_segment
    print(f"\n--- RETRY: audits failed, refining to {state.steps_per_segment} steps per segment "
          f"(attempt {state.attempts + 1}/{state.max_attempts}) ---\n")

    state.audits = []
    state.errors = []
    return "retry"


# ----------------------------
# Graph Builder
# ----------------------------
def build_graph():
    """Build and compile the LangGraph state graph."""
    g = StateGraph(GraphState)

    g.add_node("plan", node_plan)
    g.add_node("execute", node_execute)
    g.add_node("analyze", node_analyze)
    g.add_node("verify", node_verify)
    g.add_node("handle_error", node_handle_error)

    g.set_entry_point("plan")
    g.add_conditional_edges(
        "plan",
        route_after_plan,
        {"execute": "execute", "handle_error": "handle_error"},
    )
    g.add_edge("execute", "analyze")
    g.add_conditional_edges(
        "analyze",
        route_after_analyze,
        {"verify": "verify", "handle_error": "handle_error"},
    )
    g.add_conditional_edges(
        "verify",
        should_retry,
        {"retry": "execute", "end": END},
    )
    g.add_edge("handle_error", END)

    return g.compile()


# ----------------------------
# Public API
# ----------------------------
def run_langgraph_agent(
    loop_name: str,
    params: SystemParams = STC,
    seed: int = 0,
    waypoints: Optional[List[IntegralValue]] = None,
    max_attempts: int = 2,
    base: Optional[IntegralValue] = None,
    radius: Optional[float] = None,
    tolerances: Optional[Dict[str, float]] = None,
) -> MonodromyState:
    """
    Transport a period basis around `loop_name` (gamma1 ... gamma4 or a custom
    loop through `waypoints`). `base` and `radius` move the default loops and
    `tolerances` overrides the fiber, period and rounding bounds. Raises the
    recorded FibrationError when no monodromy matrix could be computed.
    """
    print("AGENT: started")

    app = build_graph()
    initial: GraphState = {"agent": MonodromyState(
        loop_name=loop_name, params=params, seed=seed,
        custom_waypoints=waypoints, max_attempts=max_attempts,
        base=base, radius=radius, tolerances=dict(tolerances or {}),
    )}
    final = app.invoke(initial)
    state = final["agent"]

    print("AGENT: finished")
    if state.raw is None and isinstance(state.failure, FibrationError):
        raise state.failure
    return state

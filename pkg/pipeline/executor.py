"""
Executor node: solves the base fiber, the initial period basis and transports it.
Uses module-level imports so tests can monkey-patch the solvers.
"""
from __future__ import annotations

import time
from typing import Any, Dict

import numpy as np

from fibration.errors import FibrationError
import fibration.monodromy as mono
from fibration.phase_space import STC
from pipeline.state import MonodromyState


MAX_SEED_RETRIES = mono.MAX_SEED_RETRIES


def _record(state: MonodromyState, tool: str, status: str, **extra: Any) -> None:
    entry: Dict[str, Any] = {"tool": tool, "attempt": state.attempts, "result_status": status}
    entry.update(extra)
    state.tool_calls.append(entry)


def _solve_base(state: MonodromyState) -> None:
    rng = np.random.default_rng(state.seed)
    base = state.loop.base
    print(f"   -> Solving fiber over {base.to_array().tolist()}")
    state.fiber = mono.solve_fiber_point_retry(
        base, rng, state.params, attempts=MAX_SEED_RETRIES, tol=state.tol("fiber"),
    )
    _record(state, "solve_fiber_point", "success", residual=state.fiber.residual)
    print(f"   -> Fiber residual {state.fiber.residual:.2e}")


def _solve_basis(state: MonodromyState) -> None:
    fp = state.fiber
    if state.params == STC and fp.target.distance(mono.R0) < 1e-12:
        guess2, guess3 = mono.R0_GUESSES
        print("   -> Using stored period guesses at R0")
    else:
        print("   -> Searching angular recurrences for period guesses")
        guess2, guess3 = mono.recurrence_guesses(fp, state.params)
    basis = mono.solve_period_basis(fp, guess2, guess3, state.params, tol=state.tol("period"))
    state.initial_basis = basis if state.loop_name in mono.LOOP_LEVELS else mono.lattice_reduce(basis)
    _record(state, "solve_period_basis", "success", determinant=state.initial_basis.determinant())
    print(f"   -> det B = {state.initial_basis.determinant():.6f}")


def _transport(state: MonodromyState) -> None:
    state.log = mono.TransportLog()
    start = time.time()
    state.final_basis = mono.continue_basis(
        state.initial_basis, state.loop, state.params, state.log,
        fiber_tol=state.tol("fiber"), period_tol=state.tol("period"),
    )
    _record(
        state, "continue_basis", "success",
        steps=state.log.steps, bisections=state.log.bisections, seconds=round(time.time() - start, 2),
    )
    print(f"   -> {state.log.steps} steps, {state.log.bisections} bisections")


STEPS = {
    "Solve base fiber point": ("solve_fiber_point", _solve_base),
    "Solve initial period basis": ("solve_period_basis", _solve_basis),
    "Transport basis around loop": ("continue_basis", _transport),
}


def execute_plan(state: MonodromyState) -> MonodromyState:
    print("EXECUTOR: executing plan")
    state.attempts += 1
    state.failure = None
    state.final_basis = None

    for step in state.plan:
        print(f" - {step}")
        tool, run = STEPS[step]

        # the base fiber and initial basis survive a retry
        if step == "Solve base fiber point" and state.fiber is not None:
            continue
        if step == "Solve initial period basis" and state.initial_basis is not None:
            continue

        try:
            run(state)
        except FibrationError as e:
            print(f"   !! {tool} failed: {type(e).__name__}: {e}")
            _record(state, tool, "error", error=f"{type(e).__name__}: {e}")
            state.failure = e
            break

    return state

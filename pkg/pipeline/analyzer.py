"""
Analyzer node: turns the transported basis into monodromy matrices and decides routing.

Sets state.route_decision to one of:
- "verify": a matrix was computed, or the failure may go away with finer steps
- "error": the failure does not depend on the step size
"""
from __future__ import annotations

from fibration.errors import FibrationError, NotReducible, NotUnimodular, RoundingAmbiguous
from fibration.monodromy import change_basis, monodromy_matrix, reduced_monodromy
from pipeline.state import MonodromyState


# failures a finer transport can fix
RETRYABLE = (RoundingAmbiguous, NotUnimodular, RuntimeError)


def is_retryable(e: BaseException) -> bool:
    return isinstance(e, RETRYABLE)


def analyze_evidence(state: MonodromyState) -> MonodromyState:
    print(" - Analyze transport")
    state.raw = state.conjugated = state.reduced = None

    if state.final_basis is None:
        if state.failure is None or is_retryable(state.failure):
            state.route_decision = "verify"
        else:
            state.route_decision = "error"
        return state

    try:
        state.raw = monodromy_matrix(state.initial_basis, state.final_basis, state.tol("rounding"))
        state.conjugated = change_basis(state.raw)
    except FibrationError as e:
        print(f"   !! {type(e).__name__}: {e}")
        state.failure = e
        state.route_decision = "verify"
        return state

    print(f"   -> raw M = {state.raw.entries.tolist()} (rounding residual {state.raw.residual:.2e})")
    try:
        state.reduced = reduced_monodromy(state.conjugated)
    except NotReducible as e:
        print(f"   -> no reduced block: {e}")
    state.route_decision = "verify"
    return state

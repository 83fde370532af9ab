"""
Verifier node: runs the transport audits, sets validation feedback for retries.
"""
from __future__ import annotations

from typing import Any, Dict, List

import numpy as np

import fibration.monodromy as mono
from fibration.a2_unfolding import pl_monodromy
from fibration.report import all_passed, audit
from pipeline.state import MonodromyState


ROUNDING_TARGET = 1e-4
REFERENCE_DIGITS_TOL = 5e-4


def _basis_audits(state: MonodromyState) -> List[Dict[str, Any]]:
    out = []
    if state.fiber is not None:
        out.append(audit("base_fiber_residual", state.fiber.residual, state.tol("fiber")))
    if state.initial_basis is not None:
        det = abs(state.initial_basis.determinant())
        out.append(audit("basis_determinant", det, mono.DET_TOL, passed=det >= mono.DET_TOL))
    out.append(audit("transport_completed", 0.0 if state.final_basis is not None else 1.0, 0.0))
    return out


def _matrix_audits(state: MonodromyState) -> List[Dict[str, Any]]:
    if state.raw is None:
        return [audit("matrix_rounded", 1.0, 0.0)]
    final = state.final_basis
    closure = max(mono.closure_defect(T, final.fiber.P, state.params) for T in (final.T2, final.T3))
    det = int(round(np.linalg.det(state.raw.entries)))
    out = [
        audit("rounding_residual", state.raw.residual, state.tol("rounding")),
        audit("rounding_target", state.raw.residual, ROUNDING_TARGET),
        audit("unimodular", abs(det - 1), 0.0),
        audit("end_fiber_residual", final.fiber.residual, state.tol("fiber")),
        audit("transport_closure", closure, mono.CLOSURE_TOL),
    ]

    name = state.loop_name
    # reference matrices and periods are given in the basis over R0
    if state.loop.base.distance(mono.R0) > 1e-12:
        return out
    if name in mono.LOOP_LEVELS and state.reduced is not None:
        pl = pl_monodromy(name[-1]).matrix
        out.append(audit("reduced_matches_pl", float(np.sum(pl != state.reduced)), 0.0))
    for i, ref in enumerate(mono.TRANSPORTED_REFERENCE.get(name, ())):
        out.append(audit(f"reference_period_{i + 1}", mono.lattice_distance(ref, final), REFERENCE_DIGITS_TOL))
    return out


def verify_output(state: MonodromyState) -> MonodromyState:
    """Audit the transport and build retry feedback."""
    print("VERIFIER: checking audits")

    state.audits = _basis_audits(state) + _matrix_audits(state)
    state.verified = all_passed(state.audits)
    state.errors = [f"{a['name']}: {a['value']:.3e} (bound {a['bound']:.1e})" for a in state.audits if not a["passed"]]
    if state.failure is not None:
        state.errors.append(f"{type(state.failure).__name__}: {state.failure}")

    # Build retry feedback for LangGraph retry loop
    if not state.verified:
        state.last_validation_feedback = "AUDIT FAILURES: " + "; ".join(state.errors)
    else:
        state.last_validation_feedback = None

    for a in state.audits:
        if a["passed"]:
            print(f"   OK: {a['name']} = {a['value']:.3e}")
        else:
            print(f"   FAIL: {a['name']} = {a['value']:.3e} (bound {a['bound']:.1e})")

    return state

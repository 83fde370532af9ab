"""
Audit validator: cross-checks the numbers inside a parsed report.

The schema validator checks shapes; this one checks that the numbers agree with
each other (determinants, conjugations, the `passed` flag).
"""

from typing import Any, Callable, Dict, List, Tuple

import numpy as np

from fibration.monodromy import A_CHANGE


RAW_FLOAT_TOL = 0.25


def _check_passed_flag(report: Dict[str, Any]) -> List[str]:
    errors = []
    audits = report.get("audits") or []
    expected = all(a.get("passed") is True for a in audits)
    if report.get("passed") != expected:
        errors.append(f"passed={report.get('passed')} but audits give {expected}")
    for a in audits:
        value, bound = a.get("value"), a.get("bound")
        # audits that carry an explicit verdict may pass above their bound
        if a.get("passed") and value is not None and value > bound and not a["name"].endswith(
            ("basis_determinant", "min_separation")
        ):
            errors.append(f"audit '{a['name']}' passed with value {value} > bound {bound}")
    return errors


def _int_det(M) -> int:
    return int(round(np.linalg.det(np.asarray(M, dtype=float))))


def _check_monodromy(data: Dict[str, Any]) -> List[str]:
    errors = []
    A = A_CHANGE
    A_inv = np.rint(np.linalg.inv(A)).astype(int)
    for loop in data.get("loops", []):
        name = loop.get("loop", "?")
        if "raw_matrix" not in loop:
            continue
        raw = np.asarray(loop["raw_matrix"], dtype=int)
        conj = np.asarray(loop["conjugated_matrix"], dtype=int)
        if _int_det(raw) != 1:
            errors.append(f"{name}: det(raw_matrix) = {_int_det(raw)}")
        if not np.array_equal(A @ raw @ A_inv, conj):
            errors.append(f"{name}: conjugated_matrix != A . raw . A^-1")
        reduced = loop.get("reduced_block")
        if reduced is not None:
            if tuple(conj[0]) != (1, 0, 0) or not np.array_equal(np.asarray(reduced), conj[1:, 1:]):
                errors.append(f"{name}: reduced_block is not the lower 2x2 block")
        raw_float = loop.get("raw_float")
        if raw_float is not None:
            gap = float(np.max(np.abs(np.asarray(raw_float, dtype=float) - raw)))
            if gap > RAW_FLOAT_TOL:
                errors.append(f"{name}: raw_float is {gap:.3f} away from raw_matrix")
    return errors


def _check_a2(data: Dict[str, Any]) -> List[str]:
    errors = []
    for loop_id, entry in (data.get("loops") or {}).items():
        det = _int_det(entry["matrix"])
        if det != 1:
            errors.append(f"loop {loop_id}: det = {det}")
    return errors


def _check_bifdiag(data: Dict[str, Any]) -> List[str]:
    errors = []
    for sl in data.get("slices", []):
        for r in sl.get("rank0", []):
            if abs(r["k"] - sl["k"]) > 1e-12:
                errors.append(f"slice k={sl['k']}: rank-0 point at k={r['k']}")
        for r in sl.get("rank1", []):
            if abs(r["k"] - sl["k"]) > 1e-6:
                errors.append(f"slice k={sl['k']}: {r['family']} point at k={r['k']}")
    return errors


def _check_lax(data: Dict[str, Any]) -> List[str]:
    errors = []
    q6 = data.get("q6") or []
    if len(q6) != 7:
        errors.append(f"q6 has {len(q6)} coefficients, expected 7")
    total = sum(r["multiplicity"] for r in data.get("roots", []))
    if q6 and total != len(q6) - 1:
        errors.append(f"root multiplicities sum to {total}, expected {len(q6) - 1}")
    return errors


_CHECKS: Dict[str, Callable[[Dict[str, Any]], List[str]]] = {
    "monodromy": _check_monodromy,
    "a2": _check_a2,
    "bifdiag": _check_bifdiag,
    "lax-check": _check_lax,
}


def validate_audits(report: Dict[str, Any]) -> Tuple[bool, List[str]]:
    """
    Returns:
        (is_valid, error_list)
    """
    errors = _check_passed_flag(report)
    check = _CHECKS.get(report.get("command"))
    if check is not None:
        try:
            errors.extend(check(report.get("data") or {}))
        except (KeyError, TypeError, ValueError) as e:
            errors.append(f"malformed data: {type(e).__name__}: {e}")
    return (not errors), errors

"""
Evaluator: runs CLI test cases and checks reports against expectations.

Each case in eval/test_cases.json gives a phase, a name, CLI argv and any of:
    expected_exit            exit status (default 0)
    expected_schema_valid    schema verdict (default true when a report is written)
    expected_equals          {dotted.path: value}
    expected_approx          {dotted.path: [value, tol]} or {dotted.path: [[values...], tol]}
    expected_count           {dotted.path: n}
    expected_audits_pass     [audit names that must be present and passing]
    expected_csv_header      first CSV row, for --format csv runs
"""
import argparse
import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import numpy as np

import cli
from eval.audit_validate import validate_audits
from eval.schema_validate import validate_report


@dataclass
class TestResult:
    name: str
    phase: str
    passed: bool
    exit_code: Optional[int]
    schema_ok: bool
    audits_ok: bool
    errors: List[str]


def load_json(path: str) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def filter_tests(
    tests: List[Dict[str, Any]], phase: Optional[str], name_substr: Optional[str],
) -> List[Dict[str, Any]]:
    out = tests
    if phase:
        out = [t for t in out if t.get("phase") == phase]
    if name_substr:
        out = [t for t in out if name_substr.lower() in t.get("name", "").lower()]
    return out


# ===========================
# Path lookup
# ===========================
_MISSING = object()


def lookup(obj: Any, path: str) -> Any:
    """Follow a dotted path; integer parts index lists."""
    for part in path.split("."):
        if isinstance(obj, list):
            try:
                obj = obj[int(part)]
            except (ValueError, IndexError):
                return _MISSING
        elif isinstance(obj, dict) and part in obj:
            obj = obj[part]
        else:
            return _MISSING
    return obj


def _audit_map(report: Dict[str, Any]) -> Dict[str, Dict[str, Any]]:
    return {a["name"]: a for a in report.get("audits", []) if isinstance(a, dict)}


def check_expectations(test: Dict[str, Any], report: Dict[str, Any]) -> List[str]:
    errors = []

    for path, want in (test.get("expected_equals") or {}).items():
        got = lookup(report, path)
        if got is _MISSING:
            errors.append(f"Missing '{path}'")
        elif got != want:
            errors.append(f"Expected {path}={want!r}, got {got!r}")

    for path, (want, tol) in (test.get("expected_approx") or {}).items():
        got = lookup(report, path)
        if got is _MISSING:
            errors.append(f"Missing '{path}'")
            continue
        try:
            gap = float(np.max(np.abs(np.asarray(got, dtype=float) - np.asarray(want, dtype=float))))
        except (TypeError, ValueError):
            errors.append(f"'{path}' is not numeric: {got!r}")
            continue
        if not gap <= tol:
            errors.append(f"Expected {path}~{want} (tol {tol}), off by {gap:.3e}")

    for path, n in (test.get("expected_count") or {}).items():
        got = lookup(report, path)
        if not isinstance(got, (list, dict)):
            errors.append(f"'{path}' is not a collection")
        elif len(got) != n:
            errors.append(f"Expected {n} entries at '{path}', got {len(got)}")

    audits = _audit_map(report)
    for name in (test.get("expected_audits_pass") or []):
        if name not in audits:
            errors.append(f"Audit '{name}' missing")
        elif not audits[name]["passed"]:
            errors.append(f"Audit '{name}' failed: {audits[name]['value']} (bound {audits[name]['bound']})")

    return errors


# ===========================
# Evaluation
# ===========================
def evaluate_one(test: Dict[str, Any]) -> TestResult:
    name = test.get("name", "<unnamed>")
    phase = test.get("phase", "")
    errors: List[str] = []

    with tempfile.TemporaryDirectory() as tmp:
        out_path = os.path.join(tmp, "report.json")
        argv = list(test["argv"]) + ["--out", out_path]
        try:
            code = cli.run(argv)
        except SystemExit as e:
            code = e.code if isinstance(e.code, int) else 2
        except Exception as e:
            return TestResult(name=name, phase=phase, passed=False, exit_code=None,
                              schema_ok=False, audits_ok=False,
                              errors=[f"Crashed: {type(e).__name__}: {e}"])

        text = None
        if os.path.exists(out_path):
            with open(out_path, "r", encoding="utf-8") as f:
                text = f.read()

    expected_exit = test.get("expected_exit", 0)
    if code != expected_exit:
        errors.append(f"Expected exit={expected_exit}, got {code}")

    header = test.get("expected_csv_header")
    if header is not None:
        got = next(csv.reader(io.StringIO(text or "")), [])
        if got != header:
            errors.append(f"Expected CSV header {header}, got {got}")
        return TestResult(name=name, phase=phase, passed=not errors, exit_code=code,
                          schema_ok=False, audits_ok=False, errors=errors)

    report = None
    if text is not None:
        try:
            report = json.loads(text)
        except json.JSONDecodeError as e:
            errors.append(f"Report is not JSON: {e}")

    if report is None:
        if expected_exit == 0:
            errors.append("No report written")
        return TestResult(name=name, phase=phase, passed=not errors, exit_code=code,
                          schema_ok=False, audits_ok=False, errors=errors)

    schema_ok, schema_errs = validate_report(report)
    exp_schema = test.get("expected_schema_valid", True)
    if schema_ok != exp_schema:
        errors.append(f"Expected schema_valid={exp_schema}, got {schema_ok}")
        errors.extend([f"Schema: {m}" for m in schema_errs])

    audits_ok, audit_errs = validate_audits(report)
    if not audits_ok:
        errors.extend([f"Audits: {m}" for m in audit_errs])

    errors.extend(check_expectations(test, report))

    return TestResult(name=name, phase=phase, passed=(len(errors) == 0), exit_code=code,
                      schema_ok=schema_ok, audits_ok=audits_ok, errors=errors)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--tests", default="eval/test_cases.json")
    parser.add_argument("--phase", default=None)
    parser.add_argument("--name", default=None)
    args = parser.parse_args()

    base_dir = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
    suite_path = os.path.join(base_dir, args.tests) if not os.path.isabs(args.tests) else args.tests
    suite = load_json(suite_path)

    tests = filter_tests(suite.get("tests", []), args.phase, args.name)
    if not tests:
        print("No tests matched.")
        return

    results = []
    for t in tests:
        r = evaluate_one(t)
        results.append(r)
        print(f"[{'PASS' if r.passed else 'FAIL'}] {r.phase} :: {r.name}")
        if not r.passed:
            for e in r.errors[:12]:
                print(f"  - {e}")

    print(f"\nScore: {sum(1 for r in results if r.passed)}/{len(results)} passed")


if __name__ == "__main__":
    main()

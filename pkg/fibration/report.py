"""
Report assembly for the CLI: audit records, JSON-safe conversion, JSON and CSV output.

JSON keys are sorted and floats use Python's shortest round-trip repr, so two runs
with the same arguments and seed produce identical bytes.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, fields, is_dataclass
from fractions import Fraction
from typing import Any, Dict, List, Optional

import numpy as np

from fibration.config import SCHEMA_VERSION
from fibration.phase_space import IntegralValue, PhasePoint, SystemParams


# ----------------------------
# Audits
# ----------------------------
def audit(name: str, value: float, bound: float, passed: Optional[bool] = None) -> Dict[str, Any]:
    """One audit record; passes when value <= bound unless `passed` is given."""
    value = float(value)
    ok = (value <= bound) if passed is None else passed
    return {"name": name, "passed": bool(ok), "value": value, "bound": float(bound)}


def all_passed(audits: List[Dict[str, Any]]) -> bool:
    return all(a.get("passed") is True for a in audits)


@dataclass
class Report:
    command: str
    params: SystemParams
    seed: int
    data: Dict[str, Any] = field(default_factory=dict)
    audits: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all_passed(self.audits)

    def add(self, name: str, value: float, bound: float, passed: Optional[bool] = None) -> None:
        self.audits.append(audit(name, value, bound, passed))

    def extend(self, audits: List[Dict[str, Any]]) -> None:
        self.audits.extend(audits)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "params": params_dict(self.params),
            "seed": self.seed,
            "data": jsonable(self.data),
            "audits": jsonable(self.audits),
            "passed": self.passed,
        }


def params_dict(params: SystemParams) -> Dict[str, float]:
    return {"delta1": params.delta1, "delta2": params.delta2, "omega": params.omega, "g": params.g}


# ----------------------------
# Conversion
# ----------------------------
def jsonable(obj: Any) -> Any:
    """Recursively convert numpy types, dataclasses, complex and Fraction values for json."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (complex, np.complexfloating)):
        return [jsonable(obj.real), jsonable(obj.imag)]
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}" if obj.denominator != 1 else str(obj.numerator)
    if isinstance(obj, IntegralValue):
        return {"h1": obj.h1, "h2": obj.h2, "k": obj.k}
    if isinstance(obj, PhasePoint):
        return obj.to_array().tolist()
    if is_dataclass(obj):
        return {f.name: jsonable(getattr(obj, f.name)) for f in fields(obj)}
    return obj


def to_json(report: Report) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


# ----------------------------
# CSV (slice data only)
# ----------------------------
CSV_COLUMNS = ("k", "rank", "family", "h1", "h2", "type")


def slices_to_csv(slices: List[Dict[str, Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for sl in slices:
        k = sl["k"]
        for h1, h2 in sl["rank2"]:
            writer.writerow([repr(float(k)), 2, "", repr(float(h1)), repr(float(h2)), ""])
        for r in sl["rank1"]:
            writer.writerow([repr(float(k)), 1, r["family"], repr(float(r["h1"])), repr(float(r["h2"])), r["type"] or ""])
        for r in sl["rank0"]:
            writer.writerow([repr(float(k)), 0, f"{r['sigma_u']:+d}{r['sigma_v']:+d}", repr(float(r["h1"])), repr(float(r["h2"])), ""])
    return buf.getvalue()


def write_text(text: str, path: Optional[str]) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        print(text, end="")

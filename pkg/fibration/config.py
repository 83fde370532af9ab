"""
Run configuration: default tolerances, parameter parsing and the worker pool cap.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from multiprocessing import Pool, cpu_count
from typing import Any, Callable, Dict, Iterable, List, Optional

from fibration.errors import DomainError
from fibration.phase_space import STC, SystemParams


SCHEMA_VERSION = "1.0"

THREADS_ENV = "MONODROMY_LAB_THREADS"

# Default tolerances, overridable per run through RunConfig.tolerances
DEFAULT_TOLERANCES: Dict[str, float] = {
    "flow": 1e-12,
    "fiber": 1e-10,
    "period": 1e-8,
    "rounding": 1e-3,
    "classify": 1e-8,
    "gcd": 1e-9,
}

FORMATS = ("json", "csv")


def parse_params(text: Optional[str]) -> SystemParams:
    """Parse 'd1,d2,w,g' into SystemParams; None or '' gives the STC defaults."""
    if not text:
        return STC
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 4:
        raise DomainError(f"--params expects 4 comma-separated numbers d1,d2,w,g, got '{text}'")
    try:
        d1, d2, w, g = (float(p) for p in parts)
    except ValueError:
        raise DomainError(f"--params values must be numbers, got '{text}'")
    return SystemParams(d1, d2, w, g)


def parse_floats(text: str, count: Optional[int] = None) -> List[float]:
    try:
        values = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise DomainError(f"expected comma-separated numbers, got '{text}'")
    if count is not None and len(values) != count:
        raise DomainError(f"expected {count} comma-separated numbers, got '{text}'")
    return values


@dataclass
class RunConfig:
    params: SystemParams = STC
    output_path: Optional[str] = None
    format: str = "json"
    tolerances: Dict[str, float] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.format not in FORMATS:
            raise DomainError(f"format must be one of {FORMATS}, got '{self.format}'")
        for name, value in self.tolerances.items():
            if not value > 0:
                raise DomainError(f"tolerance '{name}' must be positive, got {value}")

    def tol(self, name: str) -> float:
        return self.tolerances.get(name, DEFAULT_TOLERANCES[name])


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return max(1, cpu_count())
    try:
        n = int(raw)
    except ValueError:
        raise DomainError(f"{THREADS_ENV} must be an integer, got '{raw}'")
    return max(1, min(n, cpu_count()))


def parallel_map(fn: Callable[[Any], Any], items: Iterable[Any], processes: Optional[int] = None) -> List[Any]:
    """Ordered map over items; sequential when one worker is allowed."""
    items = list(items)
    n = thread_count() if processes is None else max(1, processes)
    n = min(n, len(items))
    if n <= 1:
        return [fn(it) for it in items]
    with Pool(processes=n) as pool:
        return pool.map(fn, items)

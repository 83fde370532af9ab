# State.py: monodromy transport state with LangGraph retry support
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from fibration.config import DEFAULT_TOLERANCES
from fibration.monodromy import FiberPoint, LoopSpec, MonodromyMatrix, PeriodBasis, TransportLog
from fibration.phase_space import STC, IntegralValue, SystemParams


@dataclass
class MonodromyState:
    loop_name: str
    params: SystemParams = STC
    seed: int = 0
    tolerances: Dict[str, float] = field(default_factory=dict)

    # Planner
    custom_waypoints: Optional[List[IntegralValue]] = None
    base: Optional[IntegralValue] = None
    radius: Optional[float] = None
    loop: Optional[LoopSpec] = None
    plan: List[str] = field(default_factory=list)

    # Executor
    tool_calls: List[Dict[str, Any]] = field(default_factory=list)
    fiber: Optional[FiberPoint] = None
    initial_basis: Optional[PeriodBasis] = None
    final_basis: Optional[PeriodBasis] = None
    log: TransportLog = field(default_factory=TransportLog)
    failure: Optional[Exception] = None

    # Analyzer
    raw: Optional[MonodromyMatrix] = None
    conjugated: Optional[MonodromyMatrix] = None
    reduced: Optional[np.ndarray] = None

    # Verifier
    audits: List[Dict[str, Any]] = field(default_factory=list)
    verified: bool = False
    errors: List[str] = field(default_factory=list)

    # LangGraph retry loop
    attempts: int = 0
    max_attempts: int = 2
    steps_per_segment: int = 1
    last_validation_feedback: Optional[str] = None

    # Routing flags (set by analyze node)
    route_decision: str = "verify"  # "verify" | "error"

    def tol(self, name: str) -> float:
        return self.tolerances.get(name, DEFAULT_TOLERANCES[name])

"""
Workflow entry point: delegates to LangGraph, one graph run per loop.
"""
from typing import Dict, List, Optional

from fibration.config import parallel_map
from fibration.phase_space import STC, IntegralValue, SystemParams
from pipeline.langgraph_workflow import run_langgraph_agent
from pipeline.state import MonodromyState


def run_agent(loop_name: str, params: SystemParams = STC, seed: int = 0,
              waypoints: Optional[List[IntegralValue]] = None,
              base: Optional[IntegralValue] = None, radius: Optional[float] = None,
              tolerances: Optional[Dict[str, float]] = None) -> MonodromyState:
    return run_langgraph_agent(loop_name, params=params, seed=seed, waypoints=waypoints,
                               base=base, radius=radius, tolerances=tolerances)


def _run_default(job) -> MonodromyState:
    name, seed, base, radius, tolerances = job
    return run_langgraph_agent(name, seed=seed, base=base, radius=radius, tolerances=tolerances)


def run_loops(names: List[str], seed: int = 0, base: Optional[IntegralValue] = None,
              radius: Optional[float] = None, tolerances: Optional[Dict[str, float]] = None) -> List[MonodromyState]:
    """Default loops in parallel (capped by MONODROMY_LAB_THREADS), results in input order."""
    return parallel_map(_run_default, [(n, seed, base, radius, tolerances) for n in names])

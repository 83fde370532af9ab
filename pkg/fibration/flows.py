"""
Hamiltonian flows of a1 X_H1 + a2 X_H2 + a3 X_K.

Integration uses the Dormand-Prince 5(4) embedded pair with first-same-as-last
reuse, batched over several initial states, with the u and v blocks projected
back to the unit spheres after every accepted step.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from fibration.errors import DomainError, StepLimitExceeded
from fibration.phase_space import (
    STC,
    PhasePoint,
    PointLike,
    SystemParams,
    as_array,
    field_array,
    project_to_spheres,
    s1_action_array,
)


FLOW_TOL = 1e-12
FLOW_MAX_STEPS = 500_000

# Dormand-Prince 5(4); the fields are autonomous so the stage nodes are not needed
BT = {
    1: [1 / 5],
    2: [3 / 40, 9 / 40],
    3: [44 / 45, -56 / 15, 32 / 9],
    4: [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    5: [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    6: [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
}

# 5th order weights equal the last tableau row (FSAL); TR = b5 - b4
B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
TR = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
STEP_CAP_FRACTION = 0.1


@dataclass(frozen=True)
class FlowSpec:
    coeffs: Tuple[float, float, float]
    duration: float
    tolerance: float = FLOW_TOL
    max_steps: int = FLOW_MAX_STEPS

    def __post_init__(self) -> None:
        if not self.tolerance > 0:
            raise DomainError(f"flow tolerance must be positive, got {self.tolerance}")
        if self.max_steps <= 0:
            raise DomainError(f"max_steps must be positive, got {self.max_steps}")
        if len(self.coeffs) != 3:
            raise DomainError("flow coefficients must be a 3-vector (a1, a2, a3)")


# ----------------------------
# Integrator core
# ----------------------------
def _initial_step(f0: np.ndarray, x0: np.ndarray, t_end: float, tol: float) -> float:
    scale = float(np.max(np.abs(f0)))
    if scale == 0.0:
        return STEP_CAP_FRACTION * t_end
    h = 0.2 * (tol ** 0.2) * max(1.0, float(np.max(np.abs(x0)))) / scale
    return min(h, STEP_CAP_FRACTION * t_end)


def integrate_batch(
    coeffs: np.ndarray,
    x0: np.ndarray,
    t_end: float,
    params: SystemParams = STC,
    tolerance: float = FLOW_TOL,
    max_steps: int = FLOW_MAX_STEPS,
    sample_times: Optional[Sequence[float]] = None,
) -> np.ndarray:
    """
    Integrate dx/dt = sum_k coeffs[n, k] X_k(x) for t in [0, t_end], t_end >= 0.

    x0 has shape (n, 8) and coeffs shape (n, 3) or (3,). Returns the states at
    t_end, shape (n, 8), or at every sample time, shape (m, n, 8).
    """
    x = project_to_spheres(np.atleast_2d(np.asarray(x0, dtype=float)))
    coeffs = np.broadcast_to(np.asarray(coeffs, dtype=float), x.shape[:-1] + (3,))
    stops = np.array([t_end] if sample_times is None else sorted(sample_times), dtype=float)
    if stops.size and (stops[0] < 0.0 or stops[-1] > t_end + 1e-15):
        raise DomainError("sample times must lie in [0, duration]")

    samples = []
    t = 0.0
    stop_idx = 0
    while stop_idx < len(stops) and stops[stop_idx] <= 0.0:
        samples.append(x.copy())
        stop_idx += 1
    if stop_idx == len(stops) or t_end == 0.0:
        out = np.array(samples) if sample_times is not None else x
        return out

    def f(y: np.ndarray) -> np.ndarray:
        return field_array(coeffs, y, params)

    k1 = f(x)
    h = _initial_step(k1, x, t_end, tolerance)
    h_cap = STEP_CAP_FRACTION * t_end
    steps = 0

    while stop_idx < len(stops):
        if steps >= max_steps:
            raise StepLimitExceeded(
                f"flow did not reach t={t_end:g} within {max_steps} steps (stalled at t={t:.6g})"
            )
        steps += 1

        target = stops[stop_idx]
        h_free = min(h, h_cap)
        clamped = t + h_free >= target
        h = target - t if clamped else h_free

        K = [k1]
        for stage in range(1, 7):
            incr = sum(a * K[j] for j, a in enumerate(BT[stage]) if a != 0.0)
            K.append(f(x + h * incr))
        x_new = x + h * sum(b * K[j] for j, b in enumerate(B5[:6]) if b != 0.0)
        err_vec = h * sum(e * K[j] for j, e in enumerate(TR) if e != 0.0)

        scale = tolerance + tolerance * np.maximum(np.abs(x), np.abs(x_new))
        err = float(np.max(np.abs(err_vec) / scale))

        if err <= 1.0:
            t = target if clamped else t + h
            x = project_to_spheres(x_new)
            k1 = K[6]
            if clamped:
                samples.append(x.copy())
                stop_idx += 1
                while stop_idx < len(stops) and stops[stop_idx] <= t:
                    samples.append(x.copy())
                    stop_idx += 1

        factor = MAX_FACTOR if err == 0.0 else SAFETY * err ** -0.2
        h = h * min(MAX_FACTOR, max(MIN_FACTOR, factor))
        if clamped and err <= 1.0:
            h = max(h, h_free)

    if sample_times is not None:
        return np.array(samples)
    return x


# ----------------------------
# Public operations
# ----------------------------
def _signed(coeffs: Sequence[float], duration: float) -> Tuple[np.ndarray, float]:
    # negative times run the negated field forward
    c = np.asarray(coeffs, dtype=float)
    if duration < 0.0:
        return -c, -duration
    return c, duration


def flow(spec: FlowSpec, P0: PointLike, params: SystemParams = STC) -> PhasePoint:
    coeffs, t_end = _signed(spec.coeffs, spec.duration)
    x = integrate_batch(coeffs, as_array(P0)[None, :], t_end, params, spec.tolerance, spec.max_steps)
    return PhasePoint.from_array(x[0])


def flow_samples(
    spec: FlowSpec, P0: PointLike, times: Sequence[float], params: SystemParams = STC,
) -> np.ndarray:
    """States at the given times (same sign as spec.duration), shape (m, 8)."""
    coeffs, t_end = _signed(spec.coeffs, spec.duration)
    abs_times = [abs(float(t)) for t in times]
    order = np.argsort(abs_times)
    out = integrate_batch(
        coeffs, as_array(P0)[None, :], t_end, params, spec.tolerance, spec.max_steps,
        sample_times=[abs_times[i] for i in order],
    )[:, 0, :]
    result = np.empty_like(out)
    result[order] = out
    return result


def flow_compose(
    T: Sequence[float], P0: PointLike, params: SystemParams = STC, tolerance: float = FLOW_TOL,
) -> PhasePoint:
    """phi_K^{T3} o phi_H2^{T2} o phi_H1^{T1} applied to P0."""
    T1, T2, T3 = (float(t) for t in T)
    P = flow(FlowSpec((1.0, 0.0, 0.0), T1, tolerance), P0, params)
    P = flow(FlowSpec((0.0, 1.0, 0.0), T2, tolerance), P, params)
    return PhasePoint.from_array(s1_action_array(T3, P.to_array()))


def period_map(
    T: np.ndarray, x0: np.ndarray, params: SystemParams = STC, tolerance: float = FLOW_TOL,
    max_steps: int = FLOW_MAX_STEPS,
) -> np.ndarray:
    """
    Batched time-T map for several T rows of shape (n, 3) from one base point.

    The commuting H1, H2 part runs as the single field T1 X_H1 + T2 X_H2 over
    s in [0, 1]; the K part is the closed-form rotation by T3.
    """
    T = np.atleast_2d(np.asarray(T, dtype=float))
    coeffs = T.copy()
    coeffs[:, 2] = 0.0
    x = np.broadcast_to(np.asarray(x0, dtype=float), (T.shape[0], 8))
    y = integrate_batch(coeffs, x, 1.0, params, tolerance, max_steps)
    return s1_action_array(T[:, 2], y)

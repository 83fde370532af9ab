"""
Period lattices of regular fibers and their transport around loops of regular values.

A period vector T = (T1, T2, T3) closes the composed flow
phi_K^{T3} o phi_H2^{T2} o phi_H1^{T1} on a fiber. The basis always starts with
the S^1 period (0, 0, 2 pi); the other two are found by Newton on the angular
return conditions in (theta_u, theta_v, phi) and followed along the loop.
Matrices act on rows: B_after = M B_before.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from fibration.critical_set import focus_focus_values
from fibration.errors import (
    DegenerateBasis,
    DomainError,
    NoConvergence,
    NotReducible,
    NotUnimodular,
    RoundingAmbiguous,
    StepCollapse,
)
from fibration.flows import FLOW_MAX_STEPS, flow_compose, period_map
from fibration.phase_space import (
    STC,
    IntegralValue,
    PhasePoint,
    PointLike,
    SystemParams,
    as_array,
    field_array,
    gradients,
    integrals_array,
    project_to_spheres,
    random_phase_point,
)


FIBER_TOL = 1e-10
FIBER_MAX_ITER = 60
MAX_SEED_RETRIES = 8

ANGLE_TOL = 1e-8
PERIOD_MAX_ITER = 25
CLOSURE_TOL = 1e-6
DET_TOL = 1e-6
CONTINUATION_FLOW_TOL = 1e-10

JUMP_FRACTION = 0.2
MAX_BISECT_DEPTH = 20
ROUNDING_TOL = 1e-3
REGULAR_GUARD = 0.05

T1_VECTOR = np.array([0.0, 0.0, 2.0 * math.pi])

# default loops around ff1 ... ff4
R0 = IntegralValue(2.0, 1.0, 1.8)
LOOP_RADIUS = 0.5
LOOP_LEVELS = {"gamma1": (1.8, 0), "gamma2": (1.8, 1), "gamma3": (0.3, 0), "gamma4": (0.3, 1)}
R0_GUESSES = (
    np.array([1.83862, 2.07173, -1.44104]),
    np.array([-2.02757, -0.785264, 1.15808]),
)

# change of basis to the basis where M(gamma1) is the standard parabolic matrix
A_CHANGE = np.array([[1, 0, 0], [1, -1, -1], [0, 1, 0]])

# transported period vectors at R0, compared up to lattice equivalence
TRANSPORTED_REFERENCE = {
    "gamma1": (np.array([-3.86619, -2.85699, 2.59913]),),
    "gamma2": (np.array([1.64967, 3.35819, -8.00719]), np.array([-1.83862, -2.07173, 7.72423])),
    "gamma3": (np.array([-0.188951, 1.28646, -6.56615]),),
}


# ----------------------------
# Types
# ----------------------------
@dataclass
class FiberPoint:
    P: PhasePoint
    target: IntegralValue
    residual: float


@dataclass
class PeriodBasis:
    T1: np.ndarray
    T2: np.ndarray
    T3: np.ndarray
    fiber: Optional[FiberPoint] = None

    def matrix(self) -> np.ndarray:
        return np.vstack([self.T1, self.T2, self.T3])

    def determinant(self) -> float:
        return float(np.linalg.det(self.matrix()))


@dataclass
class LoopSpec:
    base: IntegralValue
    waypoints: List[IntegralValue]
    steps_per_segment: int = 1
    name: str = "custom"

    def __post_init__(self) -> None:
        if not self.waypoints:
            raise DomainError("a loop needs at least one waypoint")
        if self.steps_per_segment < 1:
            raise DomainError(f"steps_per_segment must be >= 1, got {self.steps_per_segment}")
        if self.waypoints[0].distance(self.base) > 1e-12 or self.waypoints[-1].distance(self.base) > 1e-12:
            raise DomainError("loop waypoints must start and end at the base value")


@dataclass
class MonodromyMatrix:
    entries: np.ndarray
    residual: float
    raw: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        self.entries = np.asarray(self.entries, dtype=int)


@dataclass
class TransportLog:
    """Per-step record of a continuation run."""
    steps: int = 0
    bisections: int = 0
    rejected: List[Dict[str, float]] = field(default_factory=list)
    max_fiber_residual: float = 0.0
    max_angle_residual: float = 0.0


# ----------------------------
# Fiber points
# ----------------------------
def _tangent_gradients(x: np.ndarray, params: SystemParams) -> np.ndarray:
    G = gradients(x, params)
    for sl in (slice(0, 3), slice(3, 6)):
        n = x[sl]
        G[:, sl] -= np.outer(G[:, sl] @ n, n)
    return G


def solve_fiber_point(
    target: IntegralValue, seed: PointLike, params: SystemParams = STC,
    tol: float = FIBER_TOL, max_iter: int = FIBER_MAX_ITER,
) -> FiberPoint:
    """Damped Newton on F(P) - target with sphere projection after every step."""
    goal = target.to_array()
    x = project_to_spheres(as_array(seed).copy())
    res = integrals_array(x, params) - goal
    norm = float(np.linalg.norm(res))

    for _ in range(max_iter):
        if norm < tol:
            return FiberPoint(PhasePoint.from_array(x), target, norm)
        G = _tangent_gradients(x, params)
        dx = np.linalg.lstsq(G, -res, rcond=None)[0]
        lam = 1.0
        while lam > 1e-8:
            trial = project_to_spheres(x + lam * dx)
            trial_res = integrals_array(trial, params) - goal
            trial_norm = float(np.linalg.norm(trial_res))
            if trial_norm < norm:
                break
            lam *= 0.5
        else:
            raise NoConvergence(f"fiber Newton stalled at residual {norm:.3e} for target {target.to_array()}")
        x, res, norm = trial, trial_res, trial_norm

    if norm < tol:
        return FiberPoint(PhasePoint.from_array(x), target, norm)
    raise NoConvergence(f"fiber Newton did not reach {tol:g} in {max_iter} iterations (residual {norm:.3e})")


def solve_fiber_point_retry(
    target: IntegralValue, rng: np.random.Generator, params: SystemParams = STC,
    attempts: int = MAX_SEED_RETRIES, seed: Optional[PointLike] = None, tol: float = FIBER_TOL,
) -> FiberPoint:
    """solve_fiber_point from `seed`, then from random seeds until one converges."""
    z_scale = math.sqrt(max(2.0 * abs(target.k), 1.0))
    last: Optional[Exception] = None
    for i in range(attempts):
        start = seed if (i == 0 and seed is not None) else random_phase_point(rng, z_scale)
        try:
            return solve_fiber_point(target, start, params, tol)
        except NoConvergence as e:
            last = e
    raise NoConvergence(f"no fiber point found for {target.to_array()} after {attempts} seeds: {last}")


# ----------------------------
# Period Newton
# ----------------------------
def _wrap(a: np.ndarray) -> np.ndarray:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def fiber_angles(x: np.ndarray) -> np.ndarray:
    """(theta_u, theta_v, phi) with phi = atan2(q, p); x has shape (..., 8)."""
    return np.stack([
        np.arctan2(x[..., 1], x[..., 0]),
        np.arctan2(x[..., 4], x[..., 3]),
        np.arctan2(x[..., 6], x[..., 7]),
    ], axis=-1)


def _angle_jacobian(y: np.ndarray, params: SystemParams) -> np.ndarray:
    """d(angles of phi^T(x0))/dT = dA(y) [X_H1, X_H2, X_K](y); shape (n, 3, 3)."""
    n = y.shape[0]
    dA = np.zeros((n, 3, 8))
    for row, (i, j) in enumerate(((0, 1), (3, 4), (7, 6))):
        a, b = y[:, i], y[:, j]
        r2 = a * a + b * b
        dA[:, row, i] = -b / r2
        dA[:, row, j] = a / r2
    X = np.stack([field_array(e, y, params) for e in np.eye(3)], axis=-1)
    return dA @ X


def angle_residual(T: np.ndarray, x0: np.ndarray, params: SystemParams = STC, tolerance: float = CONTINUATION_FLOW_TOL):
    T = np.atleast_2d(T)
    y = period_map(T, x0, params, tolerance, FLOW_MAX_STEPS)
    return _wrap(fiber_angles(y) - fiber_angles(x0)), y


def newton_periods(
    guesses: np.ndarray, x0: np.ndarray, params: SystemParams = STC,
    tol: float = ANGLE_TOL, max_iter: int = PERIOD_MAX_ITER, flow_tol: float = CONTINUATION_FLOW_TOL,
) -> Tuple[np.ndarray, float]:
    """Newton for several period vectors at once; returns (T, max angle residual)."""
    T = np.atleast_2d(np.asarray(guesses, dtype=float)).copy()
    for _ in range(max_iter):
        r, y = angle_residual(T, x0, params, flow_tol)
        err = float(np.max(np.abs(r)))
        if err < tol:
            return T, err
        J = _angle_jacobian(y, params)
        try:
            dT = np.linalg.solve(J, -r[..., None])[..., 0]
        except np.linalg.LinAlgError:
            raise NoConvergence("period Newton hit a singular angle Jacobian")
        T = T + dT
        if not np.all(np.isfinite(T)):
            raise NoConvergence("period Newton diverged")
    raise NoConvergence(f"period Newton did not reach {tol:g} in {max_iter} iterations (residual {err:.3e})")


def closure_defect(T: Sequence[float], P: PhasePoint, params: SystemParams = STC) -> float:
    Q = flow_compose(T, P, params)
    return float(np.linalg.norm(Q.to_array() - P.to_array()))


def solve_period_basis(
    fp: FiberPoint, guess2: Sequence[float], guess3: Sequence[float], params: SystemParams = STC,
    check_closure: bool = True, tol: float = ANGLE_TOL,
) -> PeriodBasis:
    x0 = fp.P.to_array()
    T, _ = newton_periods(np.array([guess2, guess3], dtype=float), x0, params, tol)
    basis = PeriodBasis(T1_VECTOR.copy(), T[0], T[1], fp)
    det = basis.determinant()
    if abs(det) < DET_TOL:
        raise DegenerateBasis(f"period vectors are dependent (|det B| = {abs(det):.3e})")
    if check_closure:
        for Tv in (basis.T2, basis.T3):
            d = closure_defect(Tv, fp.P, params)
            if d > CLOSURE_TOL:
                raise NoConvergence(f"period {Tv} does not close the flow (defect {d:.3e})")
    return basis


def lattice_reduce(basis: PeriodBasis) -> PeriodBasis:
    """Shift the third component of T2, T3 into (-pi, pi] using multiples of T1."""
    def shift(T: np.ndarray) -> np.ndarray:
        n = math.floor((T[2] + math.pi) / (2.0 * math.pi))
        out = T.copy()
        out[2] -= 2.0 * math.pi * n
        if out[2] <= -math.pi:
            out[2] += 2.0 * math.pi
        return out
    return PeriodBasis(basis.T1.copy(), shift(basis.T2), shift(basis.T3), basis.fiber)


def recurrence_guesses(
    fp: FiberPoint, params: SystemParams = STC, radius: float = 4.0, n: int = 41, threshold: float = 0.3,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Coarse search for two period vectors: sample the joint flow of X_H1, X_H2 on a
    (T1, T2) grid, pick T3 to cancel the theta_u drift, keep near-returns, polish
    them with Newton and choose the pair spanning the smallest lattice cell.
    """
    x0 = fp.P.to_array()
    a0 = fiber_angles(x0)
    grid = np.linspace(-radius, radius, n)
    T12 = np.array(list(itertools.product(grid, grid)))
    T = np.column_stack([T12, np.zeros(len(T12))])
    y = period_map(T, x0, params, 1e-8)
    drift = _wrap(fiber_angles(y) - a0)
    # K rotates all three angles by t
    T[:, 2] = -drift[:, 0]
    miss = _wrap(drift + T[:, 2:3])
    score = np.max(np.abs(miss), axis=1)
    near = T[(score < threshold) & (np.linalg.norm(T12, axis=1) > 1e-6)]

    found: List[np.ndarray] = []
    for guess in near:
        try:
            Tp, _ = newton_periods(guess, x0, params, max_iter=12)
        except NoConvergence:
            continue
        Tp = lattice_reduce(PeriodBasis(T1_VECTOR, Tp[0], Tp[0])).T2
        if np.linalg.norm(Tp[:2]) < 1e-6:
            continue
        if all(np.linalg.norm(Tp - f) > 1e-5 for f in found):
            found.append(Tp)

    best: Optional[Tuple[float, np.ndarray, np.ndarray]] = None
    for T2, T3 in itertools.combinations(found, 2):
        d = abs(np.linalg.det(np.vstack([T1_VECTOR, T2, T3])))
        if d > 1e-3 and (best is None or d < best[0] - 1e-6):
            best = (d, T2, T3)
    if best is None:
        raise NoConvergence(f"recurrence search found {len(found)} period candidates, no basis")
    return best[1], best[2]


# ----------------------------
# Loops and continuation
# ----------------------------
def _segment(a: IntegralValue, b: IntegralValue, spacing: float) -> List[IntegralValue]:
    n = max(1, int(math.ceil(a.distance(b) / spacing)))
    A, B = a.to_array(), b.to_array()
    return [IntegralValue.from_array(A + (B - A) * t) for t in np.linspace(0.0, 1.0, n + 1)[1:]]


def default_loop(
    name: str, base: IntegralValue = R0, radius: float = LOOP_RADIUS,
    line_spacing: float = 0.1, circle_points: int = 48, steps_per_segment: int = 1,
) -> LoopSpec:
    """Straight line to ff_j + (L, 0, 0), counter-clockwise circle of radius L, line back."""
    if name not in LOOP_LEVELS:
        raise DomainError(f"unknown loop '{name}', expected one of {sorted(LOOP_LEVELS)}")
    if not radius > 0.0:
        raise DomainError(f"loop radius must be positive, got {radius}")
    k, idx = LOOP_LEVELS[name]
    ff = sorted(focus_focus_values(k), key=lambda v: -v.h1)
    if len(ff) < 2:
        raise DomainError(f"expected two focus-focus values at k={k}, found {len(ff)}")
    center = ff[idx]
    start = IntegralValue(center.h1 + radius, center.h2, center.k)
    way = [base] + _segment(base, start, line_spacing)
    for s in np.linspace(0.0, 1.0, circle_points + 1)[1:]:
        ang = 2.0 * math.pi * s
        way.append(IntegralValue(center.h1 + radius * math.cos(ang), center.h2 + radius * math.sin(ang), center.k))
    way += _segment(start, base, line_spacing)
    way[-1] = base
    return LoopSpec(base=base, waypoints=way, steps_per_segment=steps_per_segment, name=name)


def check_regular(loop: LoopSpec, guard: float = REGULAR_GUARD) -> None:
    """Raise DomainError when a waypoint comes within `guard` of a focus-focus value."""
    for w in loop.waypoints:
        for ff in focus_focus_values(w.k):
            if math.hypot(w.h1 - ff.h1, w.h2 - ff.h2) < guard:
                raise DomainError(f"waypoint {w.to_array()} lies within {guard} of critical value {ff.to_array()}")


def _advance(
    fp: FiberPoint, T: np.ndarray, target: IntegralValue, params: SystemParams,
    fiber_tol: float = FIBER_TOL, period_tol: float = ANGLE_TOL,
) -> Tuple[FiberPoint, np.ndarray, float]:
    nxt = solve_fiber_point(target, fp.P, params, fiber_tol)
    T_new, err = newton_periods(T, nxt.P.to_array(), params, period_tol)
    return nxt, T_new, err


def _jumped(T_old: np.ndarray, T_new: np.ndarray) -> bool:
    return bool(np.any(np.linalg.norm(T_new - T_old, axis=1) > JUMP_FRACTION * np.linalg.norm(T_old, axis=1)))


def _transport_step(
    fp: FiberPoint, T: np.ndarray, target: IntegralValue, params: SystemParams, log: TransportLog, depth: int = 0,
    fiber_tol: float = FIBER_TOL, period_tol: float = ANGLE_TOL,
) -> Tuple[FiberPoint, np.ndarray]:
    try:
        nxt, T_new, err = _advance(fp, T, target, params, fiber_tol, period_tol)
        if not _jumped(T, T_new):
            log.steps += 1
            log.max_fiber_residual = max(log.max_fiber_residual, nxt.residual)
            log.max_angle_residual = max(log.max_angle_residual, err)
            return nxt, T_new
        log.rejected.append({"depth": float(depth), "jump": float(np.max(np.linalg.norm(T_new - T, axis=1)))})
    except NoConvergence:
        log.rejected.append({"depth": float(depth), "jump": float("nan")})

    if depth >= MAX_BISECT_DEPTH:
        raise StepCollapse(f"continuation step to {target.to_array()} needed more than {MAX_BISECT_DEPTH} bisections")
    log.bisections += 1
    mid = IntegralValue.from_array(0.5 * (fp.target.to_array() + target.to_array()))
    fp, T = _transport_step(fp, T, mid, params, log, depth + 1, fiber_tol, period_tol)
    return _transport_step(fp, T, target, params, log, depth + 1, fiber_tol, period_tol)


def continue_basis(
    basis: PeriodBasis, loop: LoopSpec, params: SystemParams = STC, log: Optional[TransportLog] = None,
    fiber_tol: float = FIBER_TOL, period_tol: float = ANGLE_TOL,
) -> PeriodBasis:
    if basis.fiber is None:
        raise DomainError("continuation needs a basis anchored at a fiber point")
    if basis.fiber.target.distance(loop.base) > 1e-9:
        raise DomainError("basis is not anchored at the loop base value")
    log = log if log is not None else TransportLog()
    fp = basis.fiber
    T = np.vstack([basis.T2, basis.T3])
    prev = loop.waypoints[0]
    for w in loop.waypoints[1:]:
        A, B = prev.to_array(), w.to_array()
        for t in np.linspace(0.0, 1.0, loop.steps_per_segment + 1)[1:]:
            target = IntegralValue.from_array(A + (B - A) * t)
            if target.distance(fp.target) == 0.0:
                continue
            fp, T = _transport_step(fp, T, target, params, log, fiber_tol=fiber_tol, period_tol=period_tol)
        prev = w
    return PeriodBasis(basis.T1.copy(), T[0], T[1], fp)


# ----------------------------
# Matrices
# ----------------------------
def _int_det(M: np.ndarray) -> int:
    return int(round(np.linalg.det(np.asarray(M, dtype=float))))


def monodromy_matrix(before: PeriodBasis, after: PeriodBasis, tol: float = ROUNDING_TOL) -> MonodromyMatrix:
    raw = after.matrix() @ np.linalg.inv(before.matrix())
    entries = np.rint(raw).astype(int)
    residual = float(np.max(np.abs(raw - entries)))
    if residual >= tol:
        raise RoundingAmbiguous(f"monodromy matrix is {residual:.3e} away from the nearest integer matrix")
    if _int_det(entries) != 1:
        raise NotUnimodular(f"rounded monodromy matrix has determinant {_int_det(entries)}")
    return MonodromyMatrix(entries, residual, raw)


def change_basis(M: MonodromyMatrix, A: np.ndarray = A_CHANGE) -> MonodromyMatrix:
    A = np.asarray(A, dtype=int)
    if abs(_int_det(A)) != 1:
        raise NotUnimodular(f"change of basis has determinant {_int_det(A)}")
    A_inv = np.rint(np.linalg.inv(A)).astype(int)
    return MonodromyMatrix(A @ M.entries @ A_inv, M.residual, M.raw)


def reduced_monodromy(M: MonodromyMatrix) -> np.ndarray:
    if tuple(M.entries[0]) != (1, 0, 0):
        raise NotReducible(f"first row {M.entries[0].tolist()} is not (1, 0, 0)")
    return M.entries[1:, 1:].copy()


def conjugate_search(M1: np.ndarray, M2: np.ndarray, radius: int = 1) -> Optional[np.ndarray]:
    """Integer C with entries in [-radius, radius], det C = +-1 and C M1 C^-1 = M2, if any."""
    M1 = np.asarray(M1, dtype=int)
    M2 = np.asarray(M2, dtype=int)
    n = M1.shape[0]
    vals = np.arange(-radius, radius + 1)
    cands = np.array(list(itertools.product(vals, repeat=n * n))).reshape(-1, n, n)
    ok = np.all(cands @ M1 == M2 @ cands, axis=(1, 2))
    for C in cands[ok]:
        if abs(_int_det(C)) == 1:
            return C
    return None


def lattice_distance(vec: Sequence[float], basis: PeriodBasis, radius: int = 2) -> float:
    """Smallest relative distance from vec to n . B with integer |n_i| <= radius."""
    vec = np.asarray(vec, dtype=float)
    vals = np.arange(-radius, radius + 1)
    ns = np.array(list(itertools.product(vals, repeat=3)))
    diffs = ns @ basis.matrix() - vec
    return float(np.min(np.max(np.abs(diffs), axis=1)) / max(float(np.max(np.abs(vec))), 1e-300))

"""
Local normal form at the central singularity c* and Picard-Lefschetz monodromy
of the unfolding y^2 + x^3 + kappa x = epsilon.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from fibration.critical_set import K_STAR, U3_STAR
from fibration.errors import DomainError, NearDiscriminant
from fibration.phase_space import STC, IntegralValue, SystemParams
from fibration.reduction import ReducedPoint, reduced_hamiltonians


CBRT2 = 2.0 ** (1.0 / 3.0)
D_CONST = 4.0 * 2.0 ** (2.0 / 3.0) - 1.0
KAPPA_SCALE = 2.0 ** (-14.0 / 9.0) * D_CONST ** (1.0 / 3.0)   # k - k* per unit kappa

# central point in (theta_u, u3, theta_v, v3, k)
CENTER = (math.pi, U3_STAR, 0.0, U3_STAR, K_STAR)
VARIABLES = ("xi_u", "chi_u", "xi_v", "chi_v", "dk")

ROOT_GUARD = 1e-9
PROBE_RADIUS = 0.25


# ----------------------------
# psi and eta
# ----------------------------
def eta(s: float) -> float:
    return (2.0 - 3.0 * 2.0 ** (-2.0 / 3.0) - 2.0 ** (2.0 / 3.0) * s
            + 4.0 * 2.0 ** (2.0 / 3.0) / D_CONST * s ** 2
            - 32.0 * 2.0 ** (2.0 / 3.0) / D_CONST ** 2 * s ** 3)


def psi_map(v: IntegralValue) -> np.ndarray:
    dk = v.k - K_STAR
    return np.array([
        v.h1 + v.h2,
        (v.h2 - v.h1 + 2.0 * eta(dk)) / math.sqrt(D_CONST),
        dk / KAPPA_SCALE,
    ])


def psi_inverse(w: Sequence[float]) -> IntegralValue:
    w1, w2, w3 = (float(c) for c in w)
    dk = KAPPA_SCALE * w3
    diff = math.sqrt(D_CONST) * w2 - 2.0 * eta(dk)   # h2 - h1
    return IntegralValue(0.5 * (w1 - diff), 0.5 * (w1 + diff), K_STAR + dk)


def to_unfolding(v: IntegralValue) -> Tuple[complex, float]:
    w = psi_map(v)
    return complex(w[0], w[1]), float(w[2])


# ----------------------------
# Cubic x^3 + kappa x - epsilon
# ----------------------------
@dataclass
class RootTriple:
    roots: np.ndarray

    def __post_init__(self) -> None:
        self.roots = np.asarray(self.roots, dtype=complex)


UnfoldingPath = Callable[[float], Tuple[complex, float]]


def cubic_discriminant(eps: complex, kappa: float) -> complex:
    return -4.0 * kappa ** 3 - 27.0 * eps * eps


def discriminant(kappa: float) -> List[Tuple[str, complex]]:
    """Points of the discriminant locus over a fixed kappa, tagged with their thread."""
    if kappa == 0.0:
        return [("cusp", 0j)]
    r = math.sqrt(4.0 * abs(kappa) ** 3 / 27.0)
    if kappa > 0.0:
        return [("lambda1", complex(0.0, -r)), ("lambda2", complex(0.0, r))]
    return [("lambda3", complex(r, 0.0)), ("lambda4", complex(-r, 0.0))]


def cubic_roots(eps: complex, kappa: float, polish: int = 3) -> np.ndarray:
    """Companion-matrix roots, Newton polished."""
    roots = np.roots([1.0, 0.0, kappa, -eps]).astype(complex)
    for _ in range(polish):
        d = 3.0 * roots ** 2 + kappa
        safe = np.abs(d) > 1e-14
        roots[safe] -= (roots[safe] ** 3 + kappa * roots[safe] - eps) / d[safe]
    return roots


def _min_separation(r: np.ndarray) -> float:
    return min(abs(a - b) for a, b in itertools.combinations(r, 2))


def base_roots() -> RootTriple:
    """Labels x_j = exp(2 pi i j / 3) at (epsilon, kappa) = (1, 0)."""
    return RootTriple(np.exp(2j * math.pi * np.arange(3) / 3.0))


def track_roots(path: UnfoldingPath, start: RootTriple, guard: float = ROOT_GUARD) -> RootTriple:
    """Follow the labeled roots along path(s), s in [0, 1], with adaptive steps."""
    prev = start.roots.copy()
    eps0, k0 = path(0.0)
    initial = cubic_roots(eps0, k0)
    _, col = linear_sum_assignment(np.abs(prev[:, None] - initial[None, :]))
    prev = initial[col]

    s, ds = 0.0, 1.0 / 64.0
    while s < 1.0:
        if ds < 1e-12:
            raise NearDiscriminant(f"root tracking step collapsed at s={s:.6g}")
        s_new = min(1.0, s + ds)
        eps, kappa = path(s_new)
        new = cubic_roots(eps, kappa)
        sep_new = _min_separation(new)
        if sep_new < guard:
            raise NearDiscriminant(
                f"roots separate by {sep_new:.3e} at (eps, kappa) = ({eps:.6g}, {kappa:.6g})"
            )
        cost = np.abs(prev[:, None] - new[None, :])
        _, col = linear_sum_assignment(cost)
        moved = new[col]
        if np.max(np.abs(moved - prev)) < 0.5 * _min_separation(prev):
            prev, s = moved, s_new
            ds *= 1.5
        else:
            ds *= 0.5
    return RootTriple(prev)


# ----------------------------
# Paths
# ----------------------------
def arc_path(phi_start: float, phi_end: float, kappa: float = 0.0, radius: float = 1.0) -> UnfoldingPath:
    return lambda s: (radius * np.exp(1j * (phi_start + (phi_end - phi_start) * s)), kappa)


def segment_path(a: Tuple[complex, float], b: Tuple[complex, float]) -> UnfoldingPath:
    return lambda s: (a[0] + (b[0] - a[0]) * s, a[1] + (b[1] - a[1]) * s)


def circle_path(center: complex, start: complex, kappa: float, turns: float = 1.0) -> UnfoldingPath:
    return lambda s: (center + (start - center) * np.exp(2j * math.pi * turns * s), kappa)


def reverse(path: UnfoldingPath) -> UnfoldingPath:
    return lambda s: path(1.0 - s)


def concat(*paths: UnfoldingPath) -> UnfoldingPath:
    n = len(paths)

    def joined(s: float) -> Tuple[complex, float]:
        i = min(int(s * n), n - 1)
        return paths[i](s * n - i)
    return joined


def loop_permutation(path: UnfoldingPath, start: Optional[RootTriple] = None) -> Tuple[int, ...]:
    """sigma with final label j sitting at start root sigma(j) after a closed path."""
    start = start or base_roots()
    e0, k0 = path(0.0)
    e1, k1 = path(1.0)
    if abs(e0 - e1) > 1e-12 or abs(k0 - k1) > 1e-12:
        raise DomainError("loop_permutation needs a closed path")
    end = track_roots(path, start)
    _, col = linear_sum_assignment(np.abs(end.roots[:, None] - start.roots[None, :]))
    return tuple(int(c) for c in col)


# ----------------------------
# Picard-Lefschetz monodromy
# ----------------------------
# cycles in the basis (alpha_1, alpha_0); alpha_2 = -alpha_0 - alpha_1
CYCLES = {1: np.array([1, 0]), 0: np.array([0, 1]), 2: np.array([-1, -1])}
# (a, b) = a^T INTERSECTION b with (alpha_i, alpha_{i+1}) = 1
INTERSECTION = np.array([[0, -1], [1, 0]])

# loop id -> (epsilon winding angle at kappa = 0, sign of kappa at the thread, thread)
PL_LOOPS = {
    "1": (-math.pi / 2.0, 1.0, "lambda1"),
    "2": (math.pi / 2.0, 1.0, "lambda2"),
    "3": (0.0, -1.0, "lambda3"),
    "4": (-math.pi, -1.0, "lambda4"),
}
KAPPA_THREAD = 3.0 / 4.0 ** (1.0 / 3.0)   # |kappa| where the thread meets |epsilon| = 1
APPROACH_FRACTION = 0.95


def pair_cycle(i: int, j: int) -> int:
    """The segment joining x_{j-1} and x_j is alpha_j."""
    pair = {i, j}
    for k in range(3):
        if pair == {(k - 1) % 3, k}:
            return k
    raise DomainError(f"labels {i}, {j} do not form a pair")


def intersection(a: np.ndarray, b: np.ndarray) -> int:
    return int(np.asarray(a) @ INTERSECTION @ np.asarray(b))


def picard_lefschetz(delta: np.ndarray) -> np.ndarray:
    """Rows N(alpha_1), N(alpha_0) for N(a) = a - (a, delta) delta."""
    rows = [CYCLES[j] - intersection(CYCLES[j], delta) * delta for j in (1, 0)]
    return np.array(rows, dtype=int)


@dataclass
class PLResult:
    loop: str
    thread: str
    colliding_pair: Tuple[int, int]
    vanishing_cycle: int
    matrix: np.ndarray
    permutation: Tuple[int, ...]
    min_separation: float

    @property
    def transposition_ok(self) -> bool:
        i, j = self.colliding_pair
        expected = [0, 1, 2]
        expected[i], expected[j] = j, i
        return tuple(expected) == self.permutation


def pl_loop_path(loop_id: str) -> Tuple[UnfoldingPath, UnfoldingPath]:
    """(approach path from (1, 0) to near the thread, small positive circle around it)."""
    if loop_id not in PL_LOOPS:
        raise DomainError(f"unknown Picard-Lefschetz loop '{loop_id}', expected one of {sorted(PL_LOOPS)}")
    phi, sign, thread = PL_LOOPS[loop_id]
    kappa = sign * APPROACH_FRACTION * KAPPA_THREAD
    eps_a = complex(np.exp(1j * phi))
    approach = concat(arc_path(0.0, phi), segment_path((eps_a, 0.0), (eps_a, kappa)))
    eps_t = dict(discriminant(kappa))[thread]
    return approach, circle_path(eps_t, eps_a, kappa)


def pl_monodromy(loop_id: str) -> PLResult:
    approach, circle = pl_loop_path(loop_id)
    near = track_roots(approach, base_roots())
    r = near.roots
    i, j = min(itertools.combinations(range(3), 2), key=lambda p: abs(r[p[0]] - r[p[1]]))
    k = pair_cycle(i, j)
    matrix = picard_lefschetz(CYCLES[k])
    perm = loop_permutation(concat(approach, circle, reverse(approach)))
    return PLResult(
        loop=loop_id, thread=PL_LOOPS[loop_id][2], colliding_pair=(i, j), vanishing_cycle=k,
        matrix=matrix, permutation=perm, min_separation=float(abs(r[i] - r[j])),
    )


def composite_monodromy(loop_ids: Sequence[str]) -> np.ndarray:
    """N_last ... N_first for the loops traversed in the given order."""
    out = np.eye(2, dtype=int)
    for loop_id in loop_ids:
        out = pl_monodromy(loop_id).matrix @ out
    return out


# ----------------------------
# Taylor structure at c*
# ----------------------------
_STENCILS = {
    0: ((0,), (1.0,)),
    1: ((-1, 1), (-0.5, 0.5)),
    2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
    3: ((-2, -1, 1, 2), (-0.5, 1.0, -1.0, 0.5)),
}


def _mixed_partial(f: Callable[[np.ndarray], float], center: np.ndarray, alpha: Tuple[int, ...], h: float) -> float:
    per_axis = [_STENCILS[a] for a in alpha]
    total = 0.0
    for combo in itertools.product(*[list(zip(*st)) for st in per_axis]):
        offs = np.array([c[0] for c in combo], dtype=float)
        w = math.prod(c[1] for c in combo)
        total += w * f(center + h * offs)
    return total / h ** sum(alpha)


def taylor_coefficients(
    f: Callable[[np.ndarray], float], center: Sequence[float], order: int = 3,
    step: float = 1e-2, levels: int = 4,
) -> Dict[Tuple[int, ...], float]:
    """Coefficients c_alpha of prod x_i^alpha_i, 1 <= |alpha| <= order, via Richardson-extrapolated central differences."""
    center = np.asarray(center, dtype=float)
    n = center.size
    out: Dict[Tuple[int, ...], float] = {}
    for deg in range(1, order + 1):
        for combo in itertools.combinations_with_replacement(range(n), deg):
            alpha = tuple(combo.count(i) for i in range(n))
            table = [_mixed_partial(f, center, alpha, step / 2 ** j) for j in range(levels)]
            for m in range(1, levels):
                table = [(4 ** m * table[j + 1] - table[j]) / (4 ** m - 1) for j in range(len(table) - 1)]
            out[alpha] = table[0] / math.prod(math.factorial(a) for a in alpha)
    return out


def _idx(**powers: int) -> Tuple[int, ...]:
    return tuple(powers.get(v, 0) for v in VARIABLES)


def reduced_pm(params: SystemParams = STC) -> Tuple[Callable[[np.ndarray], float], Callable[[np.ndarray], float]]:
    """H+ = H1^ + H2^ and H- = psi_2 o F^ as functions of the displacement from c*."""
    base = np.array(CENTER)

    def values(d: np.ndarray) -> Tuple[float, float, float]:
        z = base + d
        h1, h2 = reduced_hamiltonians(ReducedPoint(*z), params)
        return h1, h2, z[4]

    def h_plus(d: np.ndarray) -> float:
        h1, h2, _ = values(d)
        return h1 + h2

    def h_minus(d: np.ndarray) -> float:
        h1, h2, k = values(d)
        return (h2 - h1 + 2.0 * eta(k - K_STAR)) / math.sqrt(D_CONST)

    return h_plus, h_minus


def printed_coefficients() -> Tuple[Dict[Tuple[int, ...], float], Dict[Tuple[int, ...], float]]:
    """Published quadratic and chi-cubic coefficients of H+ and H-."""
    alpha = D_CONST / (8.0 * CBRT2)
    beta = math.sqrt(D_CONST) / (8.0 * CBRT2 ** 2)
    cp = 8.0 / D_CONST ** 2
    cm = -8.0 / D_CONST ** 1.5
    plus = {
        _idx(xi_u=2): alpha, _idx(xi_v=2): -alpha,
        _idx(chi_u=1, dk=1): 4.0 / D_CONST, _idx(chi_v=1, dk=1): -4.0 / D_CONST,
        _idx(chi_u=3): -cp * (6.0 - CBRT2), _idx(chi_v=3): cp * (6.0 - CBRT2),
        _idx(chi_u=2, chi_v=1): -6.0 * cp, _idx(chi_u=1, chi_v=2): 6.0 * cp,
    }
    minus = {
        _idx(xi_u=2): beta * (4.0 - CBRT2), _idx(xi_v=2): beta * (4.0 - CBRT2),
        _idx(xi_u=1, xi_v=1): -8.0 * beta,
        _idx(chi_u=1, dk=1): 4.0 / math.sqrt(D_CONST), _idx(chi_v=1, dk=1): 4.0 / math.sqrt(D_CONST),
        _idx(chi_u=3): cm * (2.0 - CBRT2), _idx(chi_v=3): cm * (2.0 - CBRT2),
        _idx(chi_u=2, chi_v=1): 6.0 * cm, _idx(chi_u=1, chi_v=2): 6.0 * cm,
    }
    return plus, minus


PRINTED_A = np.array([[1.49505, -0.592494], [0.592494, -1.49505]])
PRINTED_B = np.array([[1.1239, 0.485921], [-1.1239, 0.485921]])
PRINTED_SCALE = 0.594984


@dataclass
class NormalFormReport:
    checks: List[Dict[str, object]] = field(default_factory=list)
    A: Optional[np.ndarray] = None
    B: Optional[np.ndarray] = None
    kappa_scale: float = float("nan")
    coefficients: Dict[str, Dict[Tuple[int, ...], float]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def add(self, name: str, value: float, bound: float) -> None:
        self.checks.append({"name": name, "passed": bool(value <= bound), "value": float(value), "bound": float(bound)})


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300) if b != 0.0 else abs(a)


def same_digits(a: float, b: float, digits: int = 5) -> bool:
    """a agrees with the printed b to `digits` significant digits (one unit in the last place)."""
    if b == 0.0:
        return abs(a) < 10.0 ** (-digits)
    e = math.floor(math.log10(abs(b)))
    return abs(a - b) <= 10.0 ** (e - digits + 1) * 1.0000001


def fit_normal_form(
    plus: Dict[Tuple[int, ...], float], minus: Dict[Tuple[int, ...], float],
) -> Tuple[np.ndarray, np.ndarray, float, float]:
    """
    Linear change (xi = A y, chi = B x, dk = s kappa) taking the truncated H+ + i H-
    to y^2 + x^3 + kappa x. Returns (A, B, s, consistency residual).
    """
    # quadratic part in xi: complex form must be (y1 + i y2)^2
    quv = complex(plus[_idx(xi_u=1, xi_v=1)], minus[_idx(xi_u=1, xi_v=1)])
    quu = complex(plus[_idx(xi_u=2)], minus[_idx(xi_u=2)])
    qvv = complex(plus[_idx(xi_v=2)], minus[_idx(xi_v=2)])
    p = np.sqrt(quu)
    q = quv / (2.0 * p)
    Y = np.array([[p.real, q.real], [p.imag, q.imag]])
    A = np.linalg.inv(Y)
    if A[0, 0] < 0:
        A = -A
    residual = abs(q * q - qvv)

    # kappa-linear part: s * Mix @ B = I
    mix = np.array([
        [plus[_idx(chi_u=1, dk=1)], plus[_idx(chi_v=1, dk=1)]],
        [minus[_idx(chi_u=1, dk=1)], minus[_idx(chi_v=1, dk=1)]],
    ])
    B1 = np.linalg.inv(mix)

    def cubic(coef: Dict[Tuple[int, ...], float], chi: np.ndarray) -> float:
        cu, cv = chi
        return (coef[_idx(chi_u=3)] * cu ** 3 + coef[_idx(chi_u=2, chi_v=1)] * cu * cu * cv
                + coef[_idx(chi_u=1, chi_v=2)] * cu * cv * cv + coef[_idx(chi_v=3)] * cv ** 3)

    s = float(np.cbrt(cubic(plus, B1[:, 0])))
    B = B1 / s
    for x in ((1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, -1.0)):
        chi = B @ np.array(x)
        got = complex(cubic(plus, chi), cubic(minus, chi))
        residual = max(residual, abs(got - complex(*x) ** 3))
    return A, B, s, residual


def verify_normal_form(params: SystemParams = STC, step: float = 1e-2, levels: int = 4) -> NormalFormReport:
    h_plus, h_minus = reduced_pm(params)
    zero = np.zeros(5)
    plus = taylor_coefficients(h_plus, zero, 3, step, levels)
    minus = taylor_coefficients(h_minus, zero, 3, step, levels)
    report = NormalFormReport(coefficients={"plus": plus, "minus": minus})
    printed_plus, printed_minus = printed_coefficients()

    order1 = [abs(c[a]) for c in (plus, minus) for a in c if sum(a) == 1]
    report.add("order1_vanish", max(order1), 1e-8)

    for name, got, ref in (("plus", plus, printed_plus), ("minus", minus, printed_minus)):
        quad = [a for a in got if sum(a) == 2]
        err = max(_rel(got[a], ref[a]) if a in ref else abs(got[a]) for a in quad)
        report.add(f"quadratic_{name}", err, 1e-6)
        chi_quad = [a for a in quad if a[4] == 0 and a[0] == 0 and a[2] == 0]
        report.add(f"no_chi_quadratic_{name}", max(abs(got[a]) for a in chi_quad), 1e-6)
        cubic = [a for a in got if sum(a) == 3 and a[0] == a[2] == a[4] == 0]
        report.add(f"cubic_{name}", max(_rel(got[a], ref[a]) for a in cubic), 1e-6)

    A, B, s, residual = fit_normal_form(plus, minus)
    report.A, report.B, report.kappa_scale = A, B, s
    report.add("fit_consistency", residual, 1e-5)
    report.add("a_ij_digits", float(sum(not same_digits(A[i, j], PRINTED_A[i, j]) for i in range(2) for j in range(2))), 0.0)
    report.add("b_ij_digits", float(sum(not same_digits(B[i, j], PRINTED_B[i, j]) for i in range(2) for j in range(2))), 0.0)
    report.add("kappa_scale", _rel(s, KAPPA_SCALE), 1e-6)
    report.add("kappa_scale_digits", 0.0 if same_digits(s, PRINTED_SCALE) else 1.0, 0.0)
    return report


# ----------------------------
# Fibers near c*
# ----------------------------
@dataclass
class FiberProbe:
    value: IntegralValue
    epsilon: complex
    kappa: float
    kind: str
    roots: np.ndarray
    multiplicities: List[int]


def singular_fiber_probe(
    value: IntegralValue, params: SystemParams = STC, radius: float = PROBE_RADIUS, tol: float = 1e-9,
) -> FiberProbe:
    """'central' (triple root), 'pinched' (double root) or 'regular' (three simple roots)."""
    c_star = psi_inverse((0.0, 0.0, 0.0))
    if value.distance(c_star) > radius:
        raise DomainError(f"value {value.to_array()} is farther than {radius} from c*")
    eps, kappa = to_unfolding(value)
    scale = max(abs(eps), abs(kappa), 1e-300)
    roots = cubic_roots(eps, kappa)
    if abs(eps) <= tol and abs(kappa) <= tol:
        kind, mult = "central", [3]
    elif abs(cubic_discriminant(eps, kappa)) <= tol * max(scale ** 2, scale ** 3):
        kind, mult = "pinched", [2, 1]
    else:
        kind, mult = "regular", [1, 1, 1]
    return FiberProbe(value, eps, kappa, kind, roots, mult)

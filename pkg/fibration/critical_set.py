"""
Critical set of F = (H1, H2, K): rank-0 fixed points, rank-1 families, rank-2
boundary curves, and the bifurcation-diagram assembly of all three.

Families are named l1 ... l8 plus the two isolated points "hh" and "c*".
Rank-1 points are parameterized by (x, y) with X_H1 = x X_K, X_H2 = y X_K;
in the resonant case x = a - b, y = a + b.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from fibration.errors import (
    ConstraintViolation,
    DegenerateLinearization,
    DomainError,
    OutOfRange,
    RelationViolated,
)
from fibration.phase_space import (
    POLE_CHART,
    STC,
    IntegralValue,
    PhasePoint,
    SystemParams,
    eval_integrals,
    field_array,
    fixed_point,
    jacobian_field,
    quadratic_forms,
)


CLASSIFY_TOL = 1e-8
RELATION_TOL = 1e-10

B_STAR = 2.0 ** (2.0 / 3.0)
K_STAR = (12.0 * B_STAR - 1.0) / 16.0
U3_STAR = 0.5 * 2.0 ** (-1.0 / 3.0)
H1_STAR = 2.0 - 3.0 * 2.0 ** (-2.0 / 3.0)
C_STAR = IntegralValue(H1_STAR, -H1_STAR, K_STAR)
K_HH = 16.0625

FAMILIES = ("l1", "l2", "l3", "l4", "l5", "l6", "l7", "l8", "hh", "c*")
FFR_FAMILIES = ("l1", "l2", "l3", "l4")
EER_FAMILIES = ("l5", "l6", "l7", "l8")
_A_ZERO = ("l1", "l2", "l5", "l6", "hh", "c*")

# rank-0 fixed points in the order (sigma_u, sigma_v) of f1, f2, f3, f4
RANK0_SIGNS = ((-1, -1), (1, 1), (-1, 1), (1, -1))

# canonical pairs (theta_u, u3), (theta_v, v3)
OMEGA4 = np.array([
    [0.0, 1.0, 0.0, 0.0],
    [-1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
    [0.0, 0.0, -1.0, 0.0],
])


def b_max() -> float:
    """Real root of 16 b^3 - 8 b^2 + b - 64 in radical form."""
    big = 3455.0 + 48.0 * math.sqrt(5181.0)
    # 3455 - 48 sqrt(5181) = 1 / big
    return (2.0 + 1.0 / np.cbrt(big) + np.cbrt(big)) / 12.0


def _stc_intervals() -> Dict[str, Tuple[float, float]]:
    bm = b_max()
    return {
        "l1": (0.25, B_STAR),
        "l2": (B_STAR, 4.0),
        "l3": (B_STAR, bm),
        "l4": (B_STAR, bm),
        "l5": (0.0, 0.25),
        "l6": (-4.0, 0.0),
        "l7": (0.0, 0.25),
        "l8": (0.0, 0.25),
    }


FAMILY_INTERVALS = _stc_intervals()
POINT_FAMILIES = {"hh": 0.25, "c*": B_STAR}


# ----------------------------
# Result types
# ----------------------------
@dataclass
class Rank0Point:
    sigma_u: int
    sigma_v: int
    critical_value: IntegralValue
    type: str
    eigenvalues: List[complex]


@dataclass
class Rank1Sample:
    family: str
    a: float
    b: float
    point: PhasePoint
    critical_value: IntegralValue
    type: Optional[str] = None
    params: SystemParams = STC
    proportionality_residual: float = 0.0

    @property
    def x(self) -> float:
        return self.a - self.b

    @property
    def y(self) -> float:
        return self.a + self.b


@dataclass
class Rank2Sample:
    k: float
    x: float
    y: float
    C: float
    critical_value: Tuple[float, float]


# ----------------------------
# Rank 0
# ----------------------------
def rank0_value(sigma_u: int, sigma_v: int, params: SystemParams = STC) -> IntegralValue:
    c = params.coupling
    s = sigma_u * sigma_v
    return IntegralValue(
        (params.delta1 - params.omega) * sigma_u - 2.0 * c * s,
        (params.delta2 - params.omega) * sigma_v + 2.0 * c * s,
        float(sigma_u + sigma_v),
    )


def rank0_values(params: SystemParams = STC) -> List[IntegralValue]:
    """f1 ... f4 in the order of RANK0_SIGNS."""
    return [rank0_value(su, sv, params) for su, sv in RANK0_SIGNS]


def _williamson_type(eigs: np.ndarray, scale: float, tol: float) -> str:
    eps = tol * max(scale, 1.0)
    n_e = n_h = n_f = 0
    for lam in eigs:
        re_zero = abs(lam.real) <= eps
        im_zero = abs(lam.imag) <= eps
        if re_zero and im_zero:
            raise DegenerateLinearization(f"zero eigenvalue {lam}")
        if re_zero:
            n_e += 1
        elif im_zero:
            n_h += 1
        else:
            n_f += 1
    return "E" * (n_e // 2) + "H" * (n_h // 2) + "FF" * (n_f // 4)


def rank0_classify(params: SystemParams = STC, tol: float = CLASSIFY_TOL) -> List[Rank0Point]:
    out: List[Rank0Point] = []
    idx = list(POLE_CHART)
    for su, sv in RANK0_SIGNS:
        P = fixed_point(su, sv)
        DX = jacobian_field((1.0, 0.0, 0.0), P, params)[np.ix_(idx, idx)]
        eigs = np.linalg.eigvals(DX)
        scale = float(np.linalg.norm(DX))
        gaps = [abs(eigs[i] - eigs[j]) for i in range(6) for j in range(i + 1, 6)]
        if min(gaps) <= tol * max(scale, 1.0):
            raise DegenerateLinearization(
                f"fixed point ({su},{sv}) has repeated eigenvalues; min gap {min(gaps):.3e}"
            )
        kind = _williamson_type(eigs, scale, tol)
        ordered = sorted((complex(e) for e in eigs), key=lambda e: (round(e.imag, 10), round(e.real, 10)))
        out.append(Rank0Point(su, sv, rank0_value(su, sv, params), kind, ordered))
    return out


# ----------------------------
# Rank 1
# ----------------------------
def _canonical_family(family: str) -> str:
    f = family.strip().replace("ℓ", "l").replace("𝔠", "c").lower()
    if f in ("c", "cstar", "c_*"):
        f = "c*"
    if f not in FAMILIES:
        raise DomainError(f"unknown rank-1 family '{family}', expected one of {FAMILIES}")
    return f


def family_a(family: str, b: float, params: SystemParams = STC) -> float:
    """a(b) on the branch of the resonant relation a((a^2 - b^2)^2 D - 4 g^4 b) = 0."""
    family = _canonical_family(family)
    if family in _A_ZERO:
        return 0.0
    D = params.delta2 - params.delta1
    if b < 0.0:
        raise OutOfRange(f"family {family} needs b >= 0, got {b}")
    shift = 2.0 * params.g ** 2 * math.sqrt(b / D)
    inner = b * b - shift if family in ("l3", "l4") else b * b + shift
    inner = max(inner, 0.0)
    sign = -1.0 if family in ("l3", "l8") else 1.0
    return sign * math.sqrt(inner)


def critical_value_of(a: float, b: float) -> IntegralValue:
    """Closed-form rank-1 critical value for the STC parameters."""
    x, y = a - b, a + b
    k = 0.5 * (b - 4.0 * a * a) + 1.0 / x ** 2 - (1.0 + 4.0 * a) ** 2 / 16.0
    h1 = 2.0 - 0.25 * (1.0 + 4.0 * a) * x ** 2 + 2.0 * (1.0 - 2.0 * a) / x
    h2 = -2.0 + 0.25 * (1.0 - 4.0 * a) * y ** 2 + 2.0 * (1.0 + 2.0 * a) / y
    return IntegralValue(h1, h2, k)


def _rank1_point(x: float, y: float, params: SystemParams) -> Tuple[PhasePoint, float]:
    g2 = params.g ** 2
    s = x + y
    u3 = -x / (2.0 * g2) * (s - (params.delta1 - params.omega))
    v3 = -y / (2.0 * g2) * (s - (params.delta2 - params.omega))
    zz = 2.0 * g2 / x ** 2 - (s - (params.delta1 - params.omega)) ** 2 / (2.0 * g2)
    if abs(u3) > 1.0 + 1e-12 or abs(v3) > 1.0 + 1e-12:
        raise ConstraintViolation(f"rank-1 point has |u3| or |v3| > 1 (u3={u3:.6g}, v3={v3:.6g})")
    if zz < -1e-12:
        raise ConstraintViolation(f"rank-1 point has z zbar = {zz:.6g} < 0")
    # S^1 phase fixed by z real >= 0
    p = math.sqrt(max(zz, 0.0))
    r2g = math.sqrt(2.0) * params.g
    P = PhasePoint(0.0, -x * p / r2g, u3, 0.0, -y * p / r2g, v3, 0.0, p)
    return P, zz


def proportionality_residual(P: PhasePoint, x: float, y: float, params: SystemParams = STC) -> float:
    """max(|X_H1 - x X_K|, |X_H2 - y X_K|)."""
    xs = P.to_array()
    XK = field_array((0.0, 0.0, 1.0), xs, params)
    r1 = field_array((1.0, 0.0, 0.0), xs, params) - x * XK
    r2 = field_array((0.0, 1.0, 0.0), xs, params) - y * XK
    return float(max(np.max(np.abs(r1)), np.max(np.abs(r2))))


def rank1_sample(family: str, b: Optional[float] = None, params: SystemParams = STC) -> Rank1Sample:
    family = _canonical_family(family)
    if not params.is_resonant():
        raise DomainError("rank-1 families are parameterized for resonant parameters only; use rank1_general")
    if family in POINT_FAMILIES:
        b0 = POINT_FAMILIES[family]
        if b is not None and abs(b - b0) > 1e-12:
            raise OutOfRange(f"family {family} is the single point b={b0}, got b={b}")
        b = b0
    else:
        if b is None:
            raise DomainError(f"family {family} needs a value of b")
        if params == STC:
            lo, hi = FAMILY_INTERVALS[family]
            if not lo < b < hi:
                raise OutOfRange(f"b={b} is outside the open interval ({lo:.6g}, {hi:.6g}) of {family}")
    a = family_a(family, b, params)
    x, y = a - b, a + b
    P, _ = _rank1_point(x, y, params)
    sample = Rank1Sample(
        family=family, a=a, b=b, point=P,
        critical_value=eval_integrals(P, params),
        params=params,
        proportionality_residual=proportionality_residual(P, x, y, params),
    )
    return replace(sample, type=rank1_classify(sample))


def relation_xy(x: float, y: float, params: SystemParams = STC) -> float:
    g4 = params.g ** 4
    D = params.delta2 - params.delta1
    return 4.0 * g4 * (x * x - y * y) + D * x * x * y * y * (2.0 * (x + y) - params.detuning_sum)


def solve_relation_y(x: float, params: SystemParams = STC) -> List[float]:
    """Real y with relation_xy(x, y) = 0 for a given x != 0."""
    g4 = params.g ** 4
    D = params.delta2 - params.delta1
    coeffs = [2.0 * D * x * x, D * x * x * (2.0 * x - params.detuning_sum) - 4.0 * g4, 0.0, 4.0 * g4 * x * x]
    roots = np.roots(coeffs)
    scale = max(1.0, float(np.max(np.abs(roots)))) if roots.size else 1.0
    out = []
    for r in roots:
        if abs(r.imag) > 1e-9 * scale:
            continue
        y = float(r.real)
        for _ in range(3):
            f = np.polyval(coeffs, y)
            df = np.polyval(np.polyder(coeffs), y)
            if df == 0.0:
                break
            y -= f / df
        out.append(y)
    return sorted(out)


def rank1_general(x: float, y: float, params: SystemParams = STC) -> Optional[Rank1Sample]:
    rel = relation_xy(x, y, params)
    scale = max(1.0, abs(x), abs(y)) ** 5
    if abs(rel) > RELATION_TOL * scale:
        raise RelationViolated(f"(x, y) = ({x}, {y}) violates the rank-1 relation by {rel:.3e}")
    try:
        P, _ = _rank1_point(x, y, params)
    except ConstraintViolation:
        return None
    a, b = 0.5 * (x + y), 0.5 * (y - x)
    sample = Rank1Sample(
        family="general", a=a, b=b, point=P,
        critical_value=eval_integrals(P, params),
        params=params,
        proportionality_residual=proportionality_residual(P, x, y, params),
    )
    return replace(sample, type=rank1_classify(sample))


def _general_k(x: float, y: float, params: SystemParams) -> Optional[float]:
    try:
        P, _ = _rank1_point(x, y, params)
    except ConstraintViolation:
        return None
    return eval_integrals(P, params).k


def _branch_y(x: float, y_ref: float, params: SystemParams) -> float:
    ys = solve_relation_y(x, params)
    if not ys:
        raise ConstraintViolation(f"no real branch of the rank-1 relation at x={x}")
    return min(ys, key=lambda y: abs(y - y_ref))


def general_crossings(
    k: float, params: SystemParams = STC, n_grid: int = 800, x_max: float = 10.0,
) -> List[Rank1Sample]:
    """Rank-1 samples with K = k, found by following every real branch y(x) of the relation."""
    xs = np.linspace(-x_max, x_max, n_grid if n_grid % 2 == 0 else n_grid + 1)
    rows = []
    for x in xs:
        rows.append([(y, _general_k(x, y, params)) for y in solve_relation_y(float(x), params)])

    found: List[Rank1Sample] = []
    for i in range(len(xs) - 1):
        x0, x1 = float(xs[i]), float(xs[i + 1])
        for y0, k0 in rows[i]:
            if k0 is None or not rows[i + 1]:
                continue
            y1, k1 = min(rows[i + 1], key=lambda r: abs(r[0] - y0))
            if k1 is None or (k0 - k) * (k1 - k) > 0.0:
                continue

            def f(x: float) -> float:
                y_ref = y0 + (y1 - y0) * (x - x0) / (x1 - x0)
                kk = _general_k(x, _branch_y(x, y_ref, params), params)
                if kk is None:
                    raise ConstraintViolation(f"branch leaves the image at x={x}")
                return kk - k

            try:
                xr = float(brentq(f, x0, x1, xtol=1e-14, rtol=1e-15)) if k0 != k else x0
                yr = _branch_y(xr, y0 + (y1 - y0) * (xr - x0) / (x1 - x0), params)
                s = rank1_general(xr, yr, params)
            except ValueError:
                continue
            if s is None or abs(s.critical_value.k - k) > 1e-8:
                continue
            v = s.critical_value
            if any(abs(v.h1 - t.critical_value.h1) + abs(v.h2 - t.critical_value.h2) < 1e-9 for t in found):
                continue
            found.append(s)
    return found


# ----------------------------
# Rank-1 stability in the section chart
# ----------------------------
def _section_derivatives(theta_u: float, u3: float, theta_v: float, v3: float, k: float):
    """Lift s(rho), its Jacobian (8x4) and Hessians (8x4x4) for rho = (theta_u, u3, theta_v, v3)."""
    Ds = np.zeros((8, 4))
    D2s = np.zeros((8, 4, 4))
    x = np.zeros(8)
    for base, th, t, j in ((0, theta_u, u3, 0), (3, theta_v, v3, 2)):
        A = math.sqrt(1.0 - t * t)
        A1 = -t / A
        A2 = -1.0 / A ** 3
        c, s = math.cos(th), math.sin(th)
        x[base:base + 3] = (A * c, A * s, t)
        Ds[base, j], Ds[base, j + 1] = -A * s, A1 * c
        Ds[base + 1, j], Ds[base + 1, j + 1] = A * c, A1 * s
        Ds[base + 2, j + 1] = 1.0
        D2s[base, j, j] = -A * c
        D2s[base, j, j + 1] = D2s[base, j + 1, j] = -A1 * s
        D2s[base, j + 1, j + 1] = A2 * c
        D2s[base + 1, j, j] = -A * s
        D2s[base + 1, j, j + 1] = D2s[base + 1, j + 1, j] = A1 * c
        D2s[base + 1, j + 1, j + 1] = A2 * s
    w = k - u3 - v3
    if w <= 0.0:
        raise DomainError(f"section chart needs k - u3 - v3 > 0, got {w:.6g}")
    q = math.sqrt(2.0 * w)
    x[6] = q
    Ds[6, 1] = Ds[6, 3] = -1.0 / q
    for i in (1, 3):
        for j in (1, 3):
            D2s[6, i, j] = -1.0 / q ** 3
    return x, Ds, D2s


def reduced_hessians(
    theta_u: float, u3: float, theta_v: float, v3: float, k: float, params: SystemParams = STC,
) -> Tuple[np.ndarray, np.ndarray]:
    """Hessians of H1^ and H2^ in (theta_u, u3, theta_v, v3) at fixed k."""
    S, b = quadratic_forms(params)
    x, Ds, D2s = _section_derivatives(theta_u, u3, theta_v, v3, k)
    out = []
    for i in (0, 1):
        grad = S[i] @ x + b[i]
        out.append(Ds.T @ S[i] @ Ds + np.einsum("a,aij->ij", grad, D2s))
    return out[0], out[1]


def section_coordinates(sample: Rank1Sample) -> Tuple[float, float, float, float, float]:
    """(theta_u, u3, theta_v, v3, k) of the rank-1 orbit with z purely imaginary."""
    theta_u = 0.0 if sample.x > 0 else math.pi
    theta_v = 0.0 if sample.y > 0 else math.pi
    return theta_u, sample.point.u3, theta_v, sample.point.v3, sample.critical_value.k


def reduced_linearizations(sample: Rank1Sample) -> Tuple[np.ndarray, np.ndarray]:
    """DX of H+ = H1^ + H2^ and H- = H1^ - H2^ at the sample."""
    H1, H2 = reduced_hessians(*section_coordinates(sample), params=sample.params)
    return OMEGA4 @ (H1 + H2), OMEGA4 @ (H1 - H2)


def _pair_kind(M: np.ndarray, tol: float) -> str:
    """'degenerate', 'focus', 'elliptic', 'hyperbolic' or 'mixed' from r^4 + c2 r^2 + c0.

    Degenerate means the smallest eigenvalue satisfies |r|^2 <= tol * |M|^2.
    """
    c2 = -0.5 * float(np.trace(M @ M))
    c0 = float(np.linalg.det(M))
    scale2 = max(float(np.linalg.norm(M)) ** 2, 1e-300)
    disc = c2 * c2 - 4.0 * c0
    if disc < -tol * (c2 * c2 + abs(c0)):
        # complex quartet: |r|^4 = c0
        return "degenerate" if math.sqrt(abs(c0)) <= tol * scale2 else "focus"
    if disc <= tol * (c2 * c2 + abs(c0)):
        roots_s = [-0.5 * c2, -0.5 * c2]
    else:
        s_big = -0.5 * (c2 + math.copysign(math.sqrt(disc), c2))
        roots_s = [s_big, c0 / s_big if s_big != 0.0 else 0.0]
    if min(abs(s) for s in roots_s) <= tol * scale2:
        return "degenerate"
    signs = {"elliptic" if s < 0 else "hyperbolic" for s in roots_s}
    return signs.pop() if len(signs) == 1 else "mixed"


def rank1_classify(sample: Rank1Sample, tol: float = CLASSIFY_TOL) -> str:
    M_plus, M_minus = reduced_linearizations(sample)
    kinds = (_pair_kind(M_plus, tol), _pair_kind(M_minus, tol))
    if "degenerate" in kinds:
        return "degenerate"
    if kinds == ("elliptic", "elliptic"):
        return "EER"
    if "focus" in kinds or set(kinds) == {"elliptic", "hyperbolic"}:
        return "FFR"
    return "degenerate"


# ----------------------------
# Threads
# ----------------------------
def _family_k(family: str, b: float) -> float:
    return critical_value_of(family_a(family, b), b).k


def _family_grid(family: str, n: int) -> np.ndarray:
    lo, hi = FAMILY_INTERVALS[family]
    t = np.linspace(0.0, 1.0, n + 2)[1:-1]
    return lo + (hi - lo) * t


def thread_crossings(family: str, k: float, n_grid: int = 400) -> List[float]:
    """Values of b where the STC thread of `family` meets the plane K = k."""
    family = _canonical_family(family)
    if family in POINT_FAMILIES:
        b0 = POINT_FAMILIES[family]
        return [b0] if abs(_family_k(family, b0) - k) <= 1e-9 else []
    bs = _family_grid(family, n_grid)
    ks = np.array([_family_k(family, b) for b in bs]) - k
    out = []
    for i in range(len(bs) - 1):
        if ks[i] == 0.0:
            out.append(float(bs[i]))
        elif ks[i] * ks[i + 1] < 0.0:
            out.append(float(brentq(lambda b: _family_k(family, b) - k, bs[i], bs[i + 1], xtol=1e-14, rtol=1e-15)))
    return out


def thread_point(family: str, k: float) -> Rank1Sample:
    """The rank-1 sample of `family` on the plane K = k (first crossing)."""
    crossings = thread_crossings(family, k)
    if not crossings:
        raise OutOfRange(f"family {family} does not meet the plane K={k}")
    return rank1_sample(family, crossings[0])


def focus_focus_values(k: float) -> List[IntegralValue]:
    """Interior focus-focus values on the slice K = k, ordered l1, l2, l3, l4."""
    out = []
    for fam in FFR_FAMILIES:
        for b in thread_crossings(fam, k):
            out.append(critical_value_of(family_a(fam, b), b))
    return out


def focus_focus_count(k: float) -> int:
    return len(focus_focus_values(k))


def thread_polylines(n: int = 200) -> Dict[str, List[List[float]]]:
    lines: Dict[str, List[List[float]]] = {}
    for fam in FAMILY_INTERVALS:
        pts = []
        for b in _family_grid(fam, n):
            v = critical_value_of(family_a(fam, b), b)
            pts.append([v.h1, v.h2, v.k])
        lines[fam] = pts
    return lines


# ----------------------------
# Rank 2
# ----------------------------
def rank2_xyC(x: float, params: SystemParams = STC) -> Tuple[float, float]:
    D = params.delta2 - params.delta1
    y = x / (1.0 + x * D)
    C = (params.delta1 - params.omega) / (2.0 * params.g ** 2) - 1.0 / (2.0 * params.g ** 2 * x)
    return y, C


def rank2_cubic_coeffs(x: float, y: float, C: float, K: float, g: float) -> np.ndarray:
    """Coefficients (a3, a2, a1, a0) of P(x, y; u3)."""
    g2, g4 = g * g, g ** 4
    a3 = -4.0 * g2 * x * x * y * (x - y)
    a2 = (-4.0 * C * C * g4 * x * x * y * y + 8.0 * C * g2 * x * x * y - 4.0 * C * g2 * x * y * y
          - 4.0 * g2 * K * x * x * y * y - (x - y) ** 2)
    a1 = 2.0 * (
        2.0 * C ** 3 * g4 * x * y * y - 3.0 * C * C * g2 * x * y + C * C * g2 * y * y
        + 2.0 * C * g4 * x ** 3 * y * y - 2.0 * C * g4 * x * y ** 4 + 2.0 * C * g2 * K * x * y * y
        + C * x - C * y + g2 * x ** 3 * y - g2 * x * x * y * y + g2 * x * y ** 3 - g2 * y ** 4
        - K * x * y + K * y * y
    )
    a0 = (-C ** 4 * g4 * y * y + 2.0 * C ** 3 * g2 * y - 2.0 * C * C * g4 * x * x * y * y
          + 2.0 * C * C * g4 * y ** 4 - 2.0 * C * C * g2 * K * y * y - C * C - 2.0 * C * g2 * x * x * y
          - 2.0 * C * g2 * y ** 3 + 2.0 * C * K * y - g4 * x ** 4 * y * y + 2.0 * g4 * x * x * y ** 4
          - g4 * y ** 6 + 2.0 * g2 * K * x * x * y * y + 2.0 * g2 * K * y ** 4 - K * K * y * y)
    return np.array([a3, a2, a1, a0])


def roots_in_unit_interval(coeffs: np.ndarray, tol: float = 1e-9) -> List[float]:
    """Companion-matrix roots of the cubic that are real and lie in [-1, 1]."""
    c = np.trim_zeros(np.asarray(coeffs, dtype=float), "f")
    if c.size <= 1:
        return []
    roots = np.roots(c)
    scale = max(1.0, float(np.max(np.abs(roots))))
    return sorted(float(r.real) for r in roots if abs(r.imag) <= tol * scale and -1.0 - tol <= r.real <= 1.0 + tol)


def has_two_roots(coeffs: np.ndarray) -> bool:
    """P(+-1) <= 0 always, so two roots in [-1, 1] iff P is positive at an interior critical point."""
    c = np.trim_zeros(np.asarray(coeffs, dtype=float), "f")
    if c.size <= 2:
        return False
    crit = np.roots(np.polyder(c))
    for t in crit:
        if abs(t.imag) > 1e-12 or not -1.0 < t.real < 1.0:
            continue
        if np.polyval(c, t.real) > 0.0:
            return True
    return False


def rank2_value(x: float, k: float, params: SystemParams = STC) -> Rank2Sample:
    y, C = rank2_xyC(x, params)
    g2 = params.g ** 2
    D = params.delta2 - params.delta1
    h1 = (-k / x ** 2 - C * C * g2 / x ** 2 + C / (x * x * y) + g2 * (y * y / x ** 2 + 2.0 * x / y - 1.0)) / D
    h2 = -(-k / y ** 2 - C * C * g2 / y ** 2 + C / (x * y * y) + g2 * (x * x / y ** 2 + 2.0 * y / x - 1.0)) / D
    return Rank2Sample(k=k, x=x, y=y, C=C, critical_value=(h1, h2))


def _admissible(x: float, k: float, params: SystemParams) -> bool:
    y, C = rank2_xyC(x, params)
    if not np.isfinite(y) or y == 0.0:
        return False
    return has_two_roots(rank2_cubic_coeffs(x, y, C, k, params.g))


def _x_grid(n: int, params: SystemParams) -> np.ndarray:
    pole = 1.0 / (params.delta2 - params.delta1)
    m = max(8, n // 2)
    mags = np.logspace(-4, 4, 2 * m)
    near = np.logspace(-6, math.log10(0.5), m)
    xs = np.concatenate([
        mags,                                 # x > 0
        -pole * near, -pole * (1.0 - near),   # between the pole and 0
        -pole * (1.0 + mags),                 # beyond the pole
    ])
    if pole < 0:
        xs = -xs
    return np.unique(xs)


def rank2_slice(k: float, params: SystemParams = STC, n_samples: int = 400, refine: int = 50) -> List[Rank2Sample]:
    if k <= -2.0:
        raise OutOfRange(f"K^-1(k) is empty or a point for k <= -2, got k={k}")
    xs = _x_grid(n_samples, params)
    ok = [_admissible(x, k, params) for x in xs]
    kept: List[float] = [float(x) for x, flag in zip(xs, ok) if flag]

    # bisection refinement of admissible interval boundaries (same sign of x only)
    for i in range(len(xs) - 1):
        if ok[i] == ok[i + 1] or xs[i] * xs[i + 1] <= 0.0:
            continue
        lo, hi = float(xs[i]), float(xs[i + 1])
        good_lo = ok[i]
        for _ in range(refine):
            mid = 0.5 * (lo + hi)
            if _admissible(mid, k, params) == good_lo:
                lo = mid
            else:
                hi = mid
        kept.append(lo if good_lo else hi)

    return [rank2_value(x, k, params) for x in sorted(kept)]


def inside_rank2_curve(samples: Sequence[Rank2Sample], value: Tuple[float, float]) -> bool:
    """True when value is interior to the convex hull of the rank-2 samples (max angular gap < pi)."""
    if len(samples) < 3:
        return False
    pts = np.array([s.critical_value for s in samples]) - np.asarray(value)
    ang = np.sort(np.arctan2(pts[:, 1], pts[:, 0]))
    gaps = np.diff(np.concatenate([ang, [ang[0] + 2.0 * math.pi]]))
    return bool(np.max(gaps) < math.pi)


# ----------------------------
# Bifurcation diagram
# ----------------------------
def bifurcation_slice(k: float, params: SystemParams = STC, n_samples: int = 400) -> Dict[str, Any]:
    # K^-1(-2) is the single fixed point with sigma = (-1, -1)
    rank2 = rank2_slice(k, params, n_samples) if k > -2.0 else []
    rank1 = []
    if k > -2.0 and params == STC:
        for fam in FAMILY_INTERVALS:
            for b in thread_crossings(fam, k):
                s = rank1_sample(fam, b)
                v = s.critical_value
                rank1.append({"family": fam, "b": b, "h1": v.h1, "h2": v.h2, "k": v.k, "type": s.type})
        if abs(k - K_STAR) <= 1e-9:
            s = rank1_sample("c*")
            v = s.critical_value
            rank1.append({"family": "c*", "b": s.b, "h1": v.h1, "h2": v.h2, "k": v.k, "type": s.type})
    elif k > -2.0:
        for s in general_crossings(k, params):
            v = s.critical_value
            rank1.append({"family": "general", "b": s.b, "h1": v.h1, "h2": v.h2, "k": v.k, "type": s.type})
    rank0 = []
    for su, sv in RANK0_SIGNS:
        v = rank0_value(su, sv, params)
        if abs(v.k - k) <= 1e-12:
            rank0.append({"sigma_u": su, "sigma_v": sv, "h1": v.h1, "h2": v.h2, "k": v.k})
    return {
        "k": k,
        "rank2": [list(s.critical_value) for s in rank2],
        "rank1": rank1,
        "rank0": rank0,
    }


def bifurcation_diagram(
    k_values: Sequence[float], params: SystemParams = STC, n_samples: int = 400, thread_samples: int = 200,
) -> Dict[str, Any]:
    for k in k_values:
        if k < -2.0:
            raise OutOfRange(f"K^-1(k) is empty for k < -2, got k={k}")
    slices = [bifurcation_slice(k, params, n_samples) for k in k_values]
    threads = thread_polylines(thread_samples) if params == STC else {}
    return {"slices": slices, "threads": threads}

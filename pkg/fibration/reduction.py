"""
S^1 reduction: algebraic invariants, their syzygies and Poisson table,
the local-section reduced Hamiltonians and the Delzant polygons of the
reduced spaces K^{-1}(k) / S^1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from fractions import Fraction
from typing import Callable, Dict, List, Tuple, Union

import numpy as np

from fibration.errors import DomainError, OutOfRange, SingularReducedSpace, UnknownInvariant
from fibration.phase_space import STC, PhasePoint, PointLike, SystemParams, as_array


INVARIANT_NAMES = ("K", "u3", "v3", "X1", "Y1", "X2", "Y2", "X3", "Y3")
_INDEX = {name: i for i, name in enumerate(INVARIANT_NAMES)}
_INDEX["k"] = 0


@dataclass(frozen=True)
class InvariantPoint:
    k: float
    u3: float
    v3: float
    X1: float
    Y1: float
    X2: float
    Y2: float
    X3: float
    Y3: float

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self)])

    @classmethod
    def from_array(cls, a) -> "InvariantPoint":
        return cls(*(float(c) for c in a))


@dataclass(frozen=True)
class ReducedPoint:
    theta_u: float
    u3: float
    theta_v: float
    v3: float
    k: float


@dataclass(frozen=True)
class DelzantPolygon:
    vertices: List[Tuple[Fraction, Fraction]]

    def as_floats(self) -> List[Tuple[float, float]]:
        return [(float(a), float(b)) for a, b in self.vertices]


# ----------------------------
# Invariants and syzygies
# ----------------------------
def invariants_array(x: np.ndarray) -> np.ndarray:
    """(K, u3, v3, X1, Y1, X2, Y2, X3, Y3) from ambient coordinates."""
    u1, u2, u3, v1, v2, v3, q, p = np.asarray(x, dtype=float)
    k = u3 + v3 + 0.5 * (q * q + p * p)
    # X1 + iY1 = v conj(z), X2 + iY2 = z conj(u), X3 + iY3 = u conj(v)
    return np.array([
        k, u3, v3,
        p * v1 + q * v2, -q * v1 + p * v2,
        p * u1 + q * u2, q * u1 - p * u2,
        u1 * v1 + u2 * v2, u2 * v1 - u1 * v2,
    ])


def invariants_of(P: PointLike) -> InvariantPoint:
    return InvariantPoint.from_array(invariants_array(as_array(P)))


def syzygies(X: Union[InvariantPoint, np.ndarray]) -> np.ndarray:
    k, u3, v3, X1, Y1, X2, Y2, X3, Y3 = _coords(X)
    w = k - u3 - v3
    a = 1.0 - v3 * v3
    b = 1.0 - u3 * u3
    return np.array([
        X1 * X1 + Y1 * Y1 - 2.0 * a * w,
        X2 * X2 + Y2 * Y2 - 2.0 * b * w,
        X3 * X3 + Y3 * Y3 - a * b,
        X1 * X3 - Y1 * Y3 - a * X2,
        X1 * Y3 + X3 * Y1 + a * Y2,
        X2 * X3 - Y2 * Y3 - b * X1,
        X2 * Y3 + X3 * Y2 + b * Y1,
        X1 * X2 - Y1 * Y2 - 2.0 * w * X3,
        X1 * Y2 + X2 * Y1 + 2.0 * w * Y3,
    ])


def _coords(X: Union[InvariantPoint, np.ndarray]) -> np.ndarray:
    if isinstance(X, InvariantPoint):
        return X.to_array()
    return np.asarray(X, dtype=float)


# ----------------------------
# Poisson table
# ----------------------------
_Entry = Callable[[np.ndarray], float]


def _build_table() -> Dict[Tuple[int, int], _Entry]:
    K, U3, V3, X1, Y1, X2, Y2, X3, Y3 = range(9)

    def A(c):
        return 2.0 * c[V3] * (c[K] - c[U3] - c[V3]) + 1.0 - c[V3] ** 2

    def B(c):
        return 2.0 * c[U3] * (c[K] - c[U3] - c[V3]) + 1.0 - c[U3] ** 2

    def C(c):
        return c[U3] * (1.0 - c[V3] ** 2) - (1.0 - c[U3] ** 2) * c[V3]

    upper = {
        (U3, X2): lambda c: -c[Y2],
        (U3, Y2): lambda c: c[X2],
        (U3, X3): lambda c: c[Y3],
        (U3, Y3): lambda c: -c[X3],
        (V3, X1): lambda c: c[Y1],
        (V3, Y1): lambda c: -c[X1],
        (V3, X3): lambda c: -c[Y3],
        (V3, Y3): lambda c: c[X3],
        (X1, Y1): A,
        (X2, Y2): lambda c: -B(c),
        (X3, Y3): C,
        (X1, X2): lambda c: -c[Y3],
        (X1, Y2): lambda c: -c[X3],
        (Y1, X2): lambda c: -c[X3],
        (Y1, Y2): lambda c: c[Y3],
        (X1, X3): lambda c: -c[V3] * c[Y2],
        (X1, Y3): lambda c: -c[V3] * c[X2],
        (Y1, X3): lambda c: -c[V3] * c[X2],
        (Y1, Y3): lambda c: c[V3] * c[Y2],
        (X2, X3): lambda c: c[U3] * c[Y1],
        (X2, Y3): lambda c: c[U3] * c[X1],
        (Y2, X3): lambda c: c[U3] * c[X1],
        (Y2, Y3): lambda c: -c[U3] * c[Y1],
    }
    return upper


_TABLE = _build_table()


def _index(name: str) -> int:
    try:
        return _INDEX[name]
    except KeyError:
        raise UnknownInvariant(f"unknown invariant '{name}', expected one of {INVARIANT_NAMES}")


def _bracket_idx(i: int, j: int, c: np.ndarray) -> float:
    if (i, j) in _TABLE:
        return float(_TABLE[(i, j)](c))
    if (j, i) in _TABLE:
        return -float(_TABLE[(j, i)](c))
    return 0.0


def poisson_table_bracket(a: str, b: str, X: Union[InvariantPoint, np.ndarray]) -> float:
    return _bracket_idx(_index(a), _index(b), _coords(X))


def bracket_matrix(X: Union[InvariantPoint, np.ndarray]) -> np.ndarray:
    """9x9 matrix of {a, b} at X in INVARIANT_NAMES order."""
    c = _coords(X)
    return np.array([[_bracket_idx(i, j, c) for j in range(9)] for i in range(9)])


def jacobi_defect(a: str, b: str, c: str, X: Union[InvariantPoint, np.ndarray], step: float = 1e-6) -> float:
    """{a,{b,c}} + {b,{c,a}} + {c,{a,b}} via the chain rule on table entries."""
    ia, ib, ic = _index(a), _index(b), _index(c)
    x = _coords(X)
    M = bracket_matrix(x)

    def nested(i: int, j: int, k: int) -> float:
        # {i, {j,k}} = sum_d d{j,k}/d(d) * {i, d}
        grad = np.zeros(9)
        for d in range(9):
            e = np.zeros(9)
            e[d] = step * max(1.0, abs(x[d]))
            grad[d] = (_bracket_idx(j, k, x + e) - _bracket_idx(j, k, x - e)) / (2.0 * e[d])
        return float(grad @ M[i])

    return nested(ia, ib, ic) + nested(ib, ic, ia) + nested(ic, ia, ib)


def invariant_function(name: str) -> Callable[[np.ndarray], float]:
    """Ambient scalar field of one invariant (for cross-checks with the phase-space bracket)."""
    i = _index(name)

    def f(x: np.ndarray) -> float:
        return float(invariants_array(x)[i])

    return f


# ----------------------------
# Local section and reduced Hamiltonians
# ----------------------------
def _check_reduced(R: ReducedPoint) -> float:
    if abs(R.u3) > 1.0 or abs(R.v3) > 1.0:
        raise DomainError(f"reduced point needs |u3|, |v3| <= 1, got u3={R.u3}, v3={R.v3}")
    w = R.k - R.u3 - R.v3
    if w <= 0.0:
        raise DomainError(f"local section needs k - u3 - v3 > 0, got {w:.6g}")
    return w


def section_lift(R: ReducedPoint) -> PhasePoint:
    """s(R): z purely imaginary with q = sqrt(2(k - u3 - v3)), p = 0."""
    w = _check_reduced(R)
    ru = math.sqrt(1.0 - R.u3 ** 2)
    rv = math.sqrt(1.0 - R.v3 ** 2)
    return PhasePoint(
        ru * math.cos(R.theta_u), ru * math.sin(R.theta_u), R.u3,
        rv * math.cos(R.theta_v), rv * math.sin(R.theta_v), R.v3,
        math.sqrt(2.0 * w), 0.0,
    )


def reduced_hamiltonians(R: ReducedPoint, params: SystemParams = STC) -> Tuple[float, float]:
    w = _check_reduced(R)
    c = params.coupling
    g = params.g
    ru2 = 1.0 - R.u3 ** 2
    rv2 = 1.0 - R.v3 ** 2
    spin = math.sqrt(ru2 * rv2) * math.cos(R.theta_u - R.theta_v) + R.u3 * R.v3
    h1 = (params.delta1 - params.omega) * R.u3 + 2.0 * g * math.cos(R.theta_u) * math.sqrt(ru2 * w) - 2.0 * c * spin
    h2 = (params.delta2 - params.omega) * R.v3 + 2.0 * g * math.cos(R.theta_v) * math.sqrt(rv2 * w) + 2.0 * c * spin
    return h1, h2


def reduced_hamiltonians_from_invariants(
    X: Union[InvariantPoint, np.ndarray], params: SystemParams = STC,
) -> Tuple[float, float]:
    k, u3, v3, X1, Y1, X2, Y2, X3, Y3 = _coords(X)
    r2g = math.sqrt(2.0) * params.g
    spin = X3 + u3 * v3
    h1 = (params.delta1 - params.omega) * u3 + r2g * Y2 - 2.0 * params.coupling * spin
    h2 = (params.delta2 - params.omega) * v3 - r2g * Y1 + 2.0 * params.coupling * spin
    return float(h1), float(h2)


# ----------------------------
# Delzant polygons
# ----------------------------
def _exact(k: Union[int, float, Fraction]) -> Fraction:
    if isinstance(k, float):
        return Fraction(repr(k))
    return Fraction(k)


def _check_level(k: Fraction) -> None:
    if k < -2:
        raise OutOfRange(f"K^-1(k) is empty for k < -2, got k={k}")
    if k in (-2, 0, 2):
        raise SingularReducedSpace(f"reduced space at k={k} is singular")


def delzant_polygon(k: Union[int, float, Fraction]) -> DelzantPolygon:
    """Vertices in counter-clockwise order."""
    kk = _exact(k)
    _check_level(kk)
    one = Fraction(1)
    if kk < 0:
        verts = [(-one, -one), (kk + 1, -one), (-one, kk + 1)]
    elif kk < 2:
        verts = [(-one, -one), (one, -one), (one, kk - 1), (kk - 1, one), (-one, one)]
    else:
        verts = [(-one, -one), (one, -one), (one, one), (-one, one)]
    return DelzantPolygon(vertices=verts)


def reduced_space_type(k: Union[int, float, Fraction]) -> str:
    kk = _exact(k)
    _check_level(kk)
    if kk < 0:
        return "CP2"
    if kk < 2:
        return "CP2#2CP2bar"
    return "S2xS2"


def polygon_area(D: DelzantPolygon) -> Fraction:
    v = D.vertices
    twice = sum(v[i][0] * v[(i + 1) % len(v)][1] - v[(i + 1) % len(v)][0] * v[i][1] for i in range(len(v)))
    return twice / 2


def _primitive(d: Tuple[Fraction, Fraction]) -> Tuple[int, int]:
    den = math.lcm(d[0].denominator, d[1].denominator)
    a, b = int(d[0] * den), int(d[1] * den)
    g = math.gcd(a, b)
    return a // g, b // g


def is_delzant(D: DelzantPolygon) -> bool:
    """Every vertex has primitive edge directions forming a Z-basis."""
    v = D.vertices
    n = len(v)
    for i in range(n):
        nxt = v[(i + 1) % n]
        prv = v[i - 1]
        e1 = _primitive((nxt[0] - v[i][0], nxt[1] - v[i][1]))
        e2 = _primitive((prv[0] - v[i][0], prv[1] - v[i][1]))
        if abs(e1[0] * e2[1] - e1[1] * e2[0]) != 1:
            return False
    return True

"""
Phase space S^2 x S^2 x R^2 of the two-spin Tavis-Cummings system.

Points are stored in ambient R^8 as x = (u1, u2, u3, v1, v2, v3, q, p) with the
complex coordinates u = u1 + i u2, v = v1 + i v2, z = p + i q. Every integral
is a quadratic form F(x) = 1/2 x^T S x + b^T x, so gradients, vector fields and
their Jacobians all come from the same (S, b) tables built once per parameter set.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, Sequence, Tuple, Union

import numpy as np

from fibration.errors import ConstraintViolation, DomainError


U_SLICE = slice(0, 3)
V_SLICE = slice(3, 6)
Q_INDEX = 6
P_INDEX = 7

# tangent coordinates at the poles (u1, u2, v1, v2, q, p)
POLE_CHART = (0, 1, 3, 4, 6, 7)

SPHERE_TOL = 1e-9

INTEGRAL_NAMES = ("H1", "H2", "K")


# ----------------------------
# Domain types
# ----------------------------
@dataclass(frozen=True)
class SystemParams:
    delta1: float = 0.5
    delta2: float = 1.5
    omega: float = 1.0
    g: float = 1.0

    def __post_init__(self) -> None:
        if self.delta1 == self.delta2:
            raise DomainError("delta1 and delta2 must differ (the integrals divide by delta2 - delta1)")

    @property
    def coupling(self) -> float:
        """g^2 / (delta2 - delta1), the spin-spin coupling constant."""
        return self.g ** 2 / (self.delta2 - self.delta1)

    @property
    def detuning_sum(self) -> float:
        return self.delta1 + self.delta2 - 2.0 * self.omega

    def is_resonant(self, tol: float = 1e-12) -> bool:
        return abs(self.detuning_sum) <= tol

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.delta1, self.delta2, self.omega, self.g)


STC = SystemParams()


@dataclass(frozen=True)
class PhasePoint:
    u1: float
    u2: float
    u3: float
    v1: float
    v2: float
    v3: float
    q: float
    p: float

    @classmethod
    def from_array(cls, x: Sequence[float]) -> "PhasePoint":
        x = np.asarray(x, dtype=float)
        if x.shape != (8,):
            raise DomainError(f"phase point needs 8 coordinates, got shape {x.shape}")
        return cls(*(float(c) for c in x))

    def to_array(self) -> np.ndarray:
        return np.array([self.u1, self.u2, self.u3, self.v1, self.v2, self.v3, self.q, self.p])

    @property
    def u(self) -> complex:
        return complex(self.u1, self.u2)

    @property
    def v(self) -> complex:
        return complex(self.v1, self.v2)

    @property
    def z(self) -> complex:
        return complex(self.p, self.q)

    def sphere_defect(self) -> float:
        return sphere_defect(self.to_array())

    def check(self, tol: float = SPHERE_TOL) -> "PhasePoint":
        defect = self.sphere_defect()
        if defect > tol:
            raise ConstraintViolation(f"point is off S^2 x S^2 by {defect:.3e} (tolerance {tol:.1e})")
        return self


@dataclass(frozen=True)
class IntegralValue:
    h1: float
    h2: float
    k: float

    @classmethod
    def from_array(cls, f: Sequence[float]) -> "IntegralValue":
        h1, h2, k = (float(c) for c in f)
        return cls(h1, h2, k)

    def to_array(self) -> np.ndarray:
        return np.array([self.h1, self.h2, self.k])

    def distance(self, other: "IntegralValue") -> float:
        return float(np.linalg.norm(self.to_array() - other.to_array()))


@dataclass(frozen=True)
class TangentVector:
    base: np.ndarray
    delta: np.ndarray

    def tangency_defect(self) -> float:
        """max(|u . du|, |v . dv|); zero for vectors tangent to S^2 x S^2."""
        b, d = self.base, self.delta
        return max(abs(float(b[U_SLICE] @ d[U_SLICE])), abs(float(b[V_SLICE] @ d[V_SLICE])))


PointLike = Union[PhasePoint, np.ndarray, Sequence[float]]


def as_array(P: PointLike) -> np.ndarray:
    if isinstance(P, PhasePoint):
        return P.to_array()
    return np.asarray(P, dtype=float)


def sphere_defect(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    du = np.abs(np.sum(x[..., U_SLICE] ** 2, axis=-1) - 1.0)
    dv = np.abs(np.sum(x[..., V_SLICE] ** 2, axis=-1) - 1.0)
    return float(np.max(np.maximum(du, dv)))


def project_to_spheres(x: np.ndarray) -> np.ndarray:
    """Rescale the u and v blocks (last axis) back to unit length."""
    x = np.array(x, dtype=float)
    x[..., U_SLICE] /= np.linalg.norm(x[..., U_SLICE], axis=-1, keepdims=True)
    x[..., V_SLICE] /= np.linalg.norm(x[..., V_SLICE], axis=-1, keepdims=True)
    return x


def fixed_point(sigma_u: int, sigma_v: int) -> PhasePoint:
    return PhasePoint(0.0, 0.0, float(sigma_u), 0.0, 0.0, float(sigma_v), 0.0, 0.0)


def random_phase_point(rng: np.random.Generator, z_scale: float = 1.0) -> PhasePoint:
    u = rng.normal(size=3)
    v = rng.normal(size=3)
    q, p = z_scale * rng.normal(size=2)
    u /= np.linalg.norm(u)
    v /= np.linalg.norm(v)
    return PhasePoint(*u, *v, q, p)


# ----------------------------
# Quadratic structure of the integrals
# ----------------------------
@lru_cache(maxsize=32)
def quadratic_forms(params: SystemParams) -> Tuple[np.ndarray, np.ndarray]:
    """S of shape (3, 8, 8) and b of shape (3, 8) for (H1, H2, K)."""
    c = params.coupling
    r2g = math.sqrt(2.0) * params.g
    S = np.zeros((3, 8, 8))
    b = np.zeros((3, 8))

    def sym(k: int, i: int, j: int, val: float) -> None:
        S[k, i, j] = val
        S[k, j, i] = val

    # H1 = (d1 - w) u3 + sqrt2 g (u1 q - u2 p) - 2c u.v
    sym(0, 0, Q_INDEX, r2g)
    sym(0, 1, P_INDEX, -r2g)
    for i in range(3):
        sym(0, i, 3 + i, -2.0 * c)
    b[0, 2] = params.delta1 - params.omega

    # H2 = (d2 - w) v3 + sqrt2 g (v1 q - v2 p) + 2c u.v
    sym(1, 3, Q_INDEX, r2g)
    sym(1, 4, P_INDEX, -r2g)
    for i in range(3):
        sym(1, i, 3 + i, 2.0 * c)
    b[1, 5] = params.delta2 - params.omega

    # K = u3 + v3 + (q^2 + p^2) / 2
    S[2, Q_INDEX, Q_INDEX] = 1.0
    S[2, P_INDEX, P_INDEX] = 1.0
    b[2, 2] = 1.0
    b[2, 5] = 1.0

    S.setflags(write=False)
    b.setflags(write=False)
    return S, b


def integrals_array(x: np.ndarray, params: SystemParams = STC) -> np.ndarray:
    """(H1, H2, K) along the last axis of x."""
    S, b = quadratic_forms(params)
    x = np.asarray(x, dtype=float)
    return 0.5 * np.einsum("kij,...i,...j->...k", S, x, x) + x @ b.T


def eval_integrals(P: PointLike, params: SystemParams = STC) -> IntegralValue:
    return IntegralValue.from_array(integrals_array(as_array(P), params))


def hamiltonian(P: PointLike, params: SystemParams = STC) -> float:
    """H = H1 + H2 + omega K."""
    f = integrals_array(as_array(P), params)
    return float(f[0] + f[1] + params.omega * f[2])


def gradients(x: np.ndarray, params: SystemParams = STC) -> np.ndarray:
    S, b = quadratic_forms(params)
    return S @ np.asarray(x, dtype=float) + b


# ----------------------------
# Poisson structure and vector fields
# ----------------------------
def cross_matrix(a: np.ndarray) -> np.ndarray:
    """Matrix of b -> a x b."""
    return np.array([
        [0.0, -a[2], a[1]],
        [a[2], 0.0, -a[0]],
        [-a[1], a[0], 0.0],
    ])


def poisson_tensor(x: np.ndarray) -> np.ndarray:
    """so(3) + so(3) + sp(2,R) tensor J with {f, g} = grad f . J grad g."""
    J = np.zeros((8, 8))
    J[U_SLICE, U_SLICE] = -cross_matrix(x[U_SLICE])
    J[V_SLICE, V_SLICE] = -cross_matrix(x[V_SLICE])
    J[Q_INDEX, P_INDEX] = 1.0
    J[P_INDEX, Q_INDEX] = -1.0
    return J


def coefficient_vector(which: str) -> np.ndarray:
    try:
        idx = INTEGRAL_NAMES.index(which.upper())
    except ValueError:
        raise DomainError(f"unknown integral '{which}', expected one of {INTEGRAL_NAMES}")
    e = np.zeros(3)
    e[idx] = 1.0
    return e


def field_array(coeffs: np.ndarray, x: np.ndarray, params: SystemParams = STC) -> np.ndarray:
    """
    Combined field a1 X_H1 + a2 X_H2 + a3 X_K, batched over the leading axes.

    coeffs has shape (..., 3) or (3,); x has shape (..., 8).
    """
    S, b = quadratic_forms(params)
    x = np.asarray(x, dtype=float)
    coeffs = np.broadcast_to(np.asarray(coeffs, dtype=float), x.shape[:-1] + (3,))
    G = np.einsum("...k,kij,...j->...i", coeffs, S, x) + coeffs @ b
    out = np.empty_like(x)
    out[..., U_SLICE] = np.cross(G[..., U_SLICE], x[..., U_SLICE])
    out[..., V_SLICE] = np.cross(G[..., V_SLICE], x[..., V_SLICE])
    out[..., Q_INDEX] = G[..., P_INDEX]
    out[..., P_INDEX] = -G[..., Q_INDEX]
    return out


def vector_field(which: str, P: PointLike, params: SystemParams = STC) -> TangentVector:
    x = as_array(P)
    return TangentVector(base=x, delta=field_array(coefficient_vector(which), x, params))


def jacobian_field(coeffs: Sequence[float], P: PointLike, params: SystemParams = STC) -> np.ndarray:
    """Analytic 8x8 Jacobian of the combined field at P."""
    S, b = quadratic_forms(params)
    x = as_array(P)
    coeffs = np.asarray(coeffs, dtype=float)
    Sc = np.tensordot(coeffs, S, axes=1)
    G = Sc @ x + coeffs @ b
    D = np.zeros((8, 8))
    D[U_SLICE, U_SLICE] = cross_matrix(G[U_SLICE])
    D[V_SLICE, V_SLICE] = cross_matrix(G[V_SLICE])
    return poisson_tensor(x) @ Sc + D


# ----------------------------
# S^1 action
# ----------------------------
def s1_action(t: float, P: PointLike) -> PhasePoint:
    """Flow of K in closed form: rotates u, v and z by e^{it}."""
    return PhasePoint.from_array(s1_action_array(t, as_array(P)))


def s1_action_array(t, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    c, s = np.cos(t), np.sin(t)
    out = np.array(x, dtype=float)
    for i, j in ((0, 1), (3, 4)):
        out[..., i] = c * x[..., i] - s * x[..., j]
        out[..., j] = s * x[..., i] + c * x[..., j]
    out[..., P_INDEX] = c * x[..., P_INDEX] - s * x[..., Q_INDEX]
    out[..., Q_INDEX] = s * x[..., P_INDEX] + c * x[..., Q_INDEX]
    return out


# ----------------------------
# Finite-difference bracket oracle
# ----------------------------
ScalarField = Callable[[np.ndarray], float]


def fd_gradient(f: ScalarField, x: np.ndarray, rel_step: float = 1e-6) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for i in range(x.size):
        h = rel_step * max(1.0, abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        grad[i] = (f(xp) - f(xm)) / (2.0 * h)
    return grad


def poisson_bracket_fd(f: ScalarField, g: ScalarField, P: PointLike) -> float:
    """{f, g}(P) from finite-difference gradients and the structure tensor."""
    x = as_array(P)
    return float(fd_gradient(f, x) @ poisson_tensor(x) @ fd_gradient(g, x))


def integral_function(which: str, params: SystemParams = STC) -> ScalarField:
    """Scalar callable for one of H1, H2, K (for bracket checks)."""
    e = coefficient_vector(which)

    def f(x: np.ndarray) -> float:
        return float(integrals_array(x, params) @ e)

    return f


def integral_table(P: PointLike, params: SystemParams = STC) -> Dict[str, float]:
    v = eval_integrals(P, params)
    return {"h1": v.h1, "h2": v.h2, "k": v.k, "H": v.h1 + v.h2 + params.omega * v.k}


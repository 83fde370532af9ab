"""
Spectral Lax pair L(lambda), M(lambda) and the spectral polynomial Q6 with mu^2 = Q6(lambda).

L is traceless, so det(L - mu I) = 0 reads mu^2 = -det L; Q6 is stored highest
degree first, as numpy.polyval expects.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from fibration.flows import FLOW_TOL, FlowSpec, flow_samples
from fibration.phase_space import (
    STC,
    IntegralValue,
    PointLike,
    SystemParams,
    as_array,
    eval_integrals,
)


GCD_TOL = 1e-9
LAX_STEP = 5e-3
LAX_LAMBDAS = (0.3 + 0.2j, -1.1 + 0.0j, 0.7 - 0.9j)

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_PLUS = 0.5 * (SIGMA_X + 1j * SIGMA_Y)
SIGMA_MINUS = 0.5 * (SIGMA_X - 1j * SIGMA_Y)


@dataclass
class SpectralPolynomial:
    coefficients: np.ndarray

    def __call__(self, lam: complex) -> complex:
        return np.polyval(self.coefficients, lam)


# ----------------------------
# Lax matrices
# ----------------------------
def lax_matrices(lam: complex, P: PointLike, params: SystemParams = STC) -> Tuple[np.ndarray, np.ndarray]:
    x = as_array(P)
    u, v = x[0:3], x[3:6]
    z = complex(x[7], x[6])    # z = p + i q
    g = params.g
    p1 = lam - 0.5 * params.delta1
    p2 = lam - 0.5 * params.delta2
    W = np.conj(z) * SIGMA_PLUS - z * SIGMA_MINUS
    u_sigma = u[0] * SIGMA_X + u[1] * SIGMA_Y + u[2] * SIGMA_Z
    v_sigma = v[0] * SIGMA_X + v[1] * SIGMA_Y + v[2] * SIGMA_Z
    L = (p1 * p2 / g ** 2) * ((2.0 * lam - params.omega) * SIGMA_Z + 1j * math.sqrt(2.0) * g * W) \
        + p2 * u_sigma + p1 * v_sigma
    M = -1j * lam * SIGMA_Z + (g / math.sqrt(2.0)) * W
    return L, M


# ----------------------------
# Spectral polynomial
# ----------------------------
def spectral_poly_from_value(value: IntegralValue, params: SystemParams = STC) -> SpectralPolynomial:
    g2 = params.g ** 2
    P1 = np.array([1.0, -0.5 * params.delta1])
    P2 = np.array([1.0, -0.5 * params.delta2])
    w = np.array([2.0, -params.omega])
    P12 = np.polymul(P1, P2)
    lead = np.polyadd(np.polymul(w, w) / g2 ** 2, [4.0 * value.k / g2])
    q = np.polymul(lead, np.polymul(P12, P12))
    mixed = np.polyadd(value.h1 * P2, value.h2 * P1)
    q = np.polyadd(q, (2.0 / g2) * np.polymul(P12, mixed))
    q = np.polyadd(q, np.polyadd(np.polymul(P1, P1), np.polymul(P2, P2)))
    return SpectralPolynomial(np.asarray(q, dtype=float))


def spectral_poly(P: PointLike, params: SystemParams = STC) -> SpectralPolynomial:
    return spectral_poly_from_value(eval_integrals(P, params), params)


def eigen_spectral_poly(P: PointLike, params: SystemParams = STC, nodes: Optional[Sequence[float]] = None) -> np.ndarray:
    """Q6 interpolated from mu^2 of the eigenvalues of L at 7 nodes (complex coefficients)."""
    nodes = np.asarray(nodes if nodes is not None else np.cos(np.pi * (np.arange(7) + 0.5) / 7) * 2.0)
    mu2 = []
    for lam in nodes:
        L, _ = lax_matrices(lam, P, params)
        mu = np.linalg.eigvals(L)
        mu2.append(mu[0] ** 2)
    return np.linalg.solve(np.vander(nodes.astype(complex), 7), np.array(mu2))


# ----------------------------
# Triple roots
# ----------------------------
@dataclass
class TripleRootReport:
    value: IntegralValue
    a1: float
    a0: float
    residual: float
    coefficients: np.ndarray
    model: np.ndarray


def triple_root_check(value: IntegralValue, params: SystemParams = STC) -> TripleRootReport:
    c = spectral_poly_from_value(value, params).coefficients
    c6 = c[0]
    a1 = c[1] / (3.0 * c6)
    a0 = (c[2] / c6 - 3.0 * a1 * a1) / 3.0
    quad = np.array([1.0, a1, a0])
    model = (4.0 / params.g ** 4) * np.polymul(quad, np.polymul(quad, quad))
    return TripleRootReport(value, float(a1), float(a0), float(np.max(np.abs(c - model))), c, model)


# ----------------------------
# Square-free decomposition
# ----------------------------
def _trim(p: np.ndarray, tol: float) -> np.ndarray:
    p = np.asarray(p, dtype=complex)
    scale = max(float(np.max(np.abs(p))), 1e-300) if p.size else 1.0
    nz = np.nonzero(np.abs(p) > tol * scale)[0]
    return p[nz[0]:] if nz.size else np.zeros(1, dtype=complex)


def poly_gcd(a: np.ndarray, b: np.ndarray, tol: float = GCD_TOL) -> np.ndarray:
    """Monic gcd by Euclid; remainders below tol relative to the dividend count as zero."""
    a = _trim(a, tol)
    b = _trim(b, tol)
    while b.size > 1 or abs(b[0]) > 0:
        if b.size == 1:
            return np.ones(1, dtype=complex)
        _, r = np.polydiv(a, b)
        r = np.atleast_1d(r)
        scale = max(float(np.max(np.abs(a))), 1e-300)
        if float(np.max(np.abs(r))) <= tol * scale:
            return b / b[0]
        a, b = b / b[0], _trim(r, tol) / max(float(np.max(np.abs(r))), 1e-300)
    return a / a[0]


def root_multiplicities(poly: Sequence[float], tol: float = GCD_TOL) -> List[Tuple[complex, int]]:
    """Distinct roots with their multiplicities from the chain f, gcd(f, f'), gcd(g1, g1'), ..."""
    chain = [_trim(np.asarray(poly, dtype=complex), tol)]
    while chain[-1].size > 1:
        f = chain[-1]
        chain.append(poly_gcd(f, np.polyder(f), tol))
    degrees = [c.size - 1 for c in chain]
    square_free = np.polydiv(chain[0], chain[1])[0] if len(chain) > 1 else chain[0]
    distinct = np.roots(square_free) if np.size(square_free) > 1 else np.array([], dtype=complex)

    # n_ge[j]: number of distinct roots with multiplicity >= j
    n_ge = {j: degrees[j - 1] - degrees[j] for j in range(1, len(degrees))}
    mult = np.ones(len(distinct), dtype=int)
    for k in range(1, len(chain) - 1):
        g = chain[k]
        count = n_ge.get(k + 1, 0)
        if count <= 0:
            break
        # roots of g_k are the roots of f with multiplicity > k
        scores = [
            abs(np.polyval(g, r)) / float(np.sum(np.abs(g) * max(1.0, abs(r)) ** np.arange(g.size - 1, -1, -1)))
            for r in distinct
        ]
        for i in np.argsort(scores)[:count]:
            mult[i] += 1
    out = [(complex(r), int(m)) for r, m in zip(distinct, mult)]
    return sorted(out, key=lambda t: (-t[1], t[0].real, t[0].imag))


# ----------------------------
# Lax equation audit
# ----------------------------
@dataclass
class LaxAudit:
    residual: float
    coefficient_drift: float
    duration: float
    samples: int


def lax_residual(
    P: PointLike, params: SystemParams = STC, duration: float = 5.0, samples: int = 20,
    lambdas: Sequence[complex] = LAX_LAMBDAS, step: float = LAX_STEP, tolerance: float = FLOW_TOL,
) -> LaxAudit:
    """max |dL/dt - [M, L]| along the flow of H = H1 + H2 + omega K, dL/dt by 4th-order central differences."""
    coeffs = (1.0, 1.0, params.omega)
    centers = np.linspace(2.0 * step, duration - 2.0 * step, samples)
    offsets = np.array([-2, -1, 1, 2]) * step
    times = np.unique(np.concatenate([centers] + [centers + o for o in offsets]))
    states = flow_samples(FlowSpec(coeffs, duration, tolerance), P, times, params)
    index = {round(float(t), 12): i for i, t in enumerate(times)}

    def state(t: float) -> np.ndarray:
        return states[index[round(float(t), 12)]]

    worst = 0.0
    q0 = spectral_poly(P, params).coefficients
    drift = 0.0
    for t in centers:
        x = state(t)
        drift = max(drift, float(np.max(np.abs(spectral_poly(x, params).coefficients - q0))))
        for lam in lambdas:
            Lm2, Lm1, Lp1, Lp2 = (lax_matrices(lam, state(t + o), params)[0] for o in offsets)
            dL = (Lm2 - 8.0 * Lm1 + 8.0 * Lp1 - Lp2) / (12.0 * step)
            L, M = lax_matrices(lam, x, params)
            worst = max(worst, float(np.max(np.abs(dL - (M @ L - L @ M)))))
    return LaxAudit(worst, drift, duration, samples)

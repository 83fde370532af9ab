import numpy as np
import pytest

from fibration import lax
from fibration.critical_set import C_STAR, rank1_sample
from fibration.phase_space import random_phase_point

A0_STAR = (4.0 * 2.0 ** (2.0 / 3.0) + 3.0) / 16.0


@pytest.fixture
def point():
    return random_phase_point(np.random.default_rng(17))


def test_spectral_poly_is_minus_det(point):
    q = lax.spectral_poly(point)
    assert q.coefficients.shape == (7,)
    for lam in (0.3, -1.2 + 0.5j, 2.0j):
        L, _ = lax.lax_matrices(lam, point)
        assert q(lam) == pytest.approx(-np.linalg.det(L), rel=1e-10, abs=1e-10)


def test_eigenvalue_interpolation(point):
    c = lax.eigen_spectral_poly(point)
    assert np.max(np.abs(c - lax.spectral_poly(point).coefficients)) < 1e-8


def test_triple_root_at_c_star():
    rep = lax.triple_root_check(C_STAR)
    assert rep.residual < 1e-10
    assert rep.a1 == pytest.approx(-1.0, abs=1e-12)
    assert rep.a0 == pytest.approx(A0_STAR, abs=1e-12)


def test_triple_root_multiplicities_at_c_star():
    roots = lax.root_multiplicities(lax.spectral_poly_from_value(C_STAR).coefficients)
    assert sorted(m for _, m in roots) == [3, 3]


def test_double_roots_on_ffr_thread():
    v = rank1_sample("l1", 1.0).critical_value
    roots = lax.root_multiplicities(lax.spectral_poly_from_value(v).coefficients)
    assert max(m for _, m in roots) == 2
    assert sum(m for _, m in roots) == 6


def test_generic_value_has_simple_roots(point):
    roots = lax.root_multiplicities(lax.spectral_poly(point).coefficients)
    assert [m for _, m in roots] == [1] * 6


def test_poly_gcd():
    a = np.poly([1.0, 2.0, 3.0])
    b = np.poly([2.0, 3.0, -4.0])
    g = lax.poly_gcd(a, b)
    assert np.allclose(g, np.poly([2.0, 3.0]))


def test_root_multiplicities_simple_case():
    roots = lax.root_multiplicities(np.poly([1.0, 1.0, 1.0, -2.0, -2.0]))
    assert [(round(r.real, 6), m) for r, m in roots] == [(1.0, 3), (-2.0, 2)]


def test_lax_equation_along_h(point):
    audit = lax.lax_residual(point, duration=2.0, samples=6)
    assert audit.residual < 1e-7
    assert audit.coefficient_drift < 1e-8

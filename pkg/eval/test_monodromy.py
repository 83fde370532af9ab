import math

import numpy as np
import pytest

from fibration import monodromy as mono
from fibration.critical_set import focus_focus_values
from fibration.errors import DomainError, NotReducible, NotUnimodular, RoundingAmbiguous
from fibration.phase_space import IntegralValue, eval_integrals

M1 = np.array([[1, 0, 0], [0, 1, 1], [0, 0, 1]])
M2 = np.array([[1, 0, 0], [0, 1, 0], [0, -1, 1]])
M3 = np.array([[1, 0, 0], [0, 2, 1], [0, -1, 0]])


def _basis(seed=0):
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(3, 3)) + 3.0 * np.eye(3)
    return mono.PeriodBasis(B[0], B[1], B[2])


def _after(M, before, noise=0.0):
    A = np.asarray(M, dtype=float) @ before.matrix() + noise
    return mono.PeriodBasis(A[0], A[1], A[2])


def test_monodromy_matrix_recovers_integer_matrix():
    before = _basis()
    M = mono.monodromy_matrix(before, _after(M1, before, 1e-7))
    assert np.array_equal(M.entries, M1)
    assert M.residual < 1e-5


def test_rounding_ambiguous():
    before = _basis(1)
    with pytest.raises(RoundingAmbiguous):
        mono.monodromy_matrix(before, _after(M1 + 0.4 * np.eye(3), before))


def test_not_unimodular():
    before = _basis(2)
    with pytest.raises(NotUnimodular):
        mono.monodromy_matrix(before, _after(2 * np.eye(3), before))


def test_change_basis_roundtrip():
    A = mono.A_CHANGE
    A_inv = np.rint(np.linalg.inv(A)).astype(int)
    raw = mono.MonodromyMatrix(A_inv @ M3 @ A, 0.0)
    conj = mono.change_basis(raw)
    assert np.array_equal(conj.entries, M3)
    assert np.array_equal(mono.reduced_monodromy(conj), [[2, 1], [-1, 0]])


def test_change_basis_needs_unimodular():
    with pytest.raises(NotUnimodular):
        mono.change_basis(mono.MonodromyMatrix(M1, 0.0), A=2 * np.eye(3, dtype=int))


def test_not_reducible():
    with pytest.raises(NotReducible):
        mono.reduced_monodromy(mono.MonodromyMatrix([[1, 1, 0], [0, 1, 0], [0, 0, 1]], 0.0))


def test_relation_between_loops():
    assert np.array_equal(M2 @ M1, M3 @ M2)
    assert np.array_equal(M2 @ M1, [[1, 0, 0], [0, 1, 1], [0, -1, 0]])


def test_conjugate_search():
    C = mono.conjugate_search(M1, M2)
    assert C is not None
    assert np.array_equal(C @ M1, M2 @ C)
    assert mono.conjugate_search(M1, np.eye(3, dtype=int)) is None


def test_lattice_reduce_keeps_lattice():
    b = mono.PeriodBasis(mono.T1_VECTOR.copy(), np.array([1.0, 2.0, 7.72423]), np.array([0.5, -1.0, -9.0]))
    r = mono.lattice_reduce(b)
    for old, new in ((b.T2, r.T2), (b.T3, r.T3)):
        assert -math.pi < new[2] <= math.pi
        n = (old[2] - new[2]) / (2.0 * math.pi)
        assert n == pytest.approx(round(n), abs=1e-12)
    assert abs(r.determinant()) == pytest.approx(abs(b.determinant()))


def test_lattice_distance():
    b = _basis(3)
    assert mono.lattice_distance(2 * b.T2 - b.T3, b) < 1e-12
    assert mono.lattice_distance(0.5 * b.T2, b) > 1e-3


def test_loop_spec_must_close():
    with pytest.raises(DomainError):
        mono.LoopSpec(mono.R0, [mono.R0, IntegralValue(2.5, 1.0, 1.8)])


def test_default_loop_geometry():
    loop = mono.default_loop("gamma1")
    assert loop.waypoints[0] == mono.R0 and loop.waypoints[-1] == mono.R0
    ff = max(focus_focus_values(1.8), key=lambda v: v.h1)
    dists = [math.hypot(w.h1 - ff.h1, w.h2 - ff.h2) for w in loop.waypoints if abs(w.k - 1.8) < 1e-12]
    assert min(dists) == pytest.approx(mono.LOOP_RADIUS, abs=1e-9)
    mono.check_regular(loop)


def test_unknown_default_loop():
    with pytest.raises(DomainError):
        mono.default_loop("gamma5")


def test_check_regular_rejects_critical_waypoint():
    ff = focus_focus_values(1.8)[0]
    loop = mono.LoopSpec(mono.R0, [mono.R0, ff, mono.R0])
    with pytest.raises(DomainError):
        mono.check_regular(loop)


def test_fiber_point_at_r0():
    fp = mono.solve_fiber_point_retry(mono.R0, np.random.default_rng(0))
    assert fp.residual < mono.FIBER_TOL
    assert eval_integrals(fp.P).to_array() == pytest.approx(mono.R0.to_array(), abs=1e-9)
    assert fp.P.sphere_defect() < 1e-12


@pytest.mark.slow
def test_period_basis_at_r0():
    fp = mono.solve_fiber_point_retry(mono.R0, np.random.default_rng(0))
    basis = mono.solve_period_basis(fp, *mono.R0_GUESSES)
    assert abs(basis.determinant()) > mono.DET_TOL
    for T in (basis.T2, basis.T3):
        assert mono.closure_defect(T, fp.P) < mono.CLOSURE_TOL
    assert mono.lattice_distance(np.array([1.83862, 2.07173, -1.44104]), basis) < 5e-4


@pytest.mark.slow
@pytest.mark.parametrize("name,expected", [
    ("gamma1", M1),
    ("gamma2", M2),
    ("gamma3", M3),
    ("gamma4", M2),
])
def test_default_loop_monodromy(name, expected):
    fp = mono.solve_fiber_point_retry(mono.R0, np.random.default_rng(0))
    basis = mono.solve_period_basis(fp, *mono.R0_GUESSES)
    final = mono.continue_basis(basis, mono.default_loop(name))
    M = mono.change_basis(mono.monodromy_matrix(basis, final))
    assert np.array_equal(M.entries, expected)


def test_non_integer_matrix_detected():
    before = _basis(4)
    half = M1.astype(float)
    half[1, 2] += 0.5
    with pytest.raises(RoundingAmbiguous):
        mono.monodromy_matrix(before, _after(half, before))


def test_rounding_tolerance_override():
    before = _basis(5)
    after = _after(M2, before, 1e-5)
    assert np.array_equal(mono.monodromy_matrix(before, after).entries, M2)
    with pytest.raises(RoundingAmbiguous):
        mono.monodromy_matrix(before, after, tol=1e-8)


def test_fiber_tolerance_override():
    loose = mono.solve_fiber_point_retry(mono.R0, np.random.default_rng(0), tol=1e-2)
    strict = mono.solve_fiber_point_retry(mono.R0, np.random.default_rng(0))
    assert loose.residual < 1e-2
    assert strict.residual < mono.FIBER_TOL
    assert strict.residual <= loose.residual


def test_default_loop_radius_and_base():
    base = IntegralValue(2.0, 1.2, 1.8)
    loop = mono.default_loop("gamma2", base=base, radius=0.3)
    assert loop.base == base and loop.waypoints[-1] == base
    ff = min(focus_focus_values(1.8), key=lambda v: v.h1)
    dists = [math.hypot(w.h1 - ff.h1, w.h2 - ff.h2) for w in loop.waypoints if abs(w.k - 1.8) < 1e-12]
    assert min(dists) == pytest.approx(0.3, abs=1e-9)
    mono.check_regular(loop)


@pytest.mark.parametrize("radius", [0.0, -0.5])
def test_default_loop_needs_positive_radius(radius):
    with pytest.raises(DomainError):
        mono.default_loop("gamma1", radius=radius)


def test_small_radius_passes_through_critical_value():
    with pytest.raises(DomainError):
        mono.check_regular(mono.default_loop("gamma3", radius=0.02))

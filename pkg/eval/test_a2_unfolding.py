import numpy as np
import pytest

from fibration import a2_unfolding as a2
from fibration.critical_set import C_STAR
from fibration.errors import DomainError, NearDiscriminant
from fibration.phase_space import IntegralValue

PL_EXPECTED = {
    "1": [[1, 1], [0, 1]],
    "2": [[1, 0], [-1, 1]],
    "3": [[2, 1], [-1, 0]],
    "4": [[1, 0], [-1, 1]],
}


def test_psi_sends_c_star_to_origin():
    assert a2.psi_map(C_STAR) == pytest.approx([0.0, 0.0, 0.0], abs=1e-12)


def test_psi_inverse():
    v = IntegralValue(0.3, -0.1, 1.2)
    assert a2.psi_inverse(a2.psi_map(v)).to_array() == pytest.approx(v.to_array(), abs=1e-12)


@pytest.mark.parametrize("kappa,points", [
    (-3.0, {"lambda3": 2.0, "lambda4": -2.0}),
    (3.0, {"lambda1": -2j, "lambda2": 2j}),
    (0.0, {"cusp": 0j}),
])
def test_discriminant(kappa, points):
    got = dict(a2.discriminant(kappa))
    assert set(got) == set(points)
    for name, eps in points.items():
        assert abs(got[name] - eps) < 1e-12
        assert abs(a2.cubic_discriminant(got[name], kappa)) < 1e-10


def test_cubic_roots_solve_cubic():
    eps, kappa = 0.3 + 0.4j, -0.7
    for x in a2.cubic_roots(eps, kappa):
        assert abs(x ** 3 + kappa * x - eps) < 1e-12


@pytest.mark.parametrize("loop_id", sorted(PL_EXPECTED))
def test_pl_matrices(loop_id):
    res = a2.pl_monodromy(loop_id)
    assert np.array_equal(res.matrix, PL_EXPECTED[loop_id])
    assert res.transposition_ok
    assert res.min_separation > a2.ROOT_GUARD
    assert round(np.linalg.det(res.matrix)) == 1


def test_pl_relation_and_cusp_loop():
    g0 = a2.composite_monodromy(["1", "2"])
    assert np.array_equal(g0, [[1, 1], [-1, 0]])
    assert np.array_equal(a2.composite_monodromy(["4", "3"]), g0)
    assert np.trace(g0) == 1
    assert round(np.linalg.det(g0)) == 1
    assert np.array_equal(np.linalg.matrix_power(g0, 6), np.eye(2, dtype=int))


def test_picard_lefschetz_fixes_vanishing_cycle():
    for k, delta in a2.CYCLES.items():
        N = a2.picard_lefschetz(delta)
        assert round(np.linalg.det(N)) == 1


def test_unknown_pl_loop():
    with pytest.raises(DomainError):
        a2.pl_monodromy("5")


def test_tracking_through_cusp_fails():
    with pytest.raises(NearDiscriminant):
        a2.track_roots(a2.segment_path((1.0 + 0j, 0.0), (0j, 0.0)), a2.base_roots())


def test_open_path_rejected():
    with pytest.raises(DomainError):
        a2.loop_permutation(a2.arc_path(0.0, 1.0))


def test_full_turn_is_three_cycle():
    perm = a2.loop_permutation(a2.arc_path(0.0, 2.0 * np.pi))
    assert sorted(perm) == [0, 1, 2]
    assert all(perm[i] != i for i in range(3))


def test_probe_kinds():
    assert a2.singular_fiber_probe(C_STAR).kind == "central"
    kappa = 0.03
    r = np.sqrt(4.0 * kappa ** 3 / 27.0)
    pinched = a2.singular_fiber_probe(a2.psi_inverse((0.0, r, kappa)))
    assert pinched.kind == "pinched"
    assert pinched.multiplicities == [2, 1]
    assert a2.singular_fiber_probe(a2.psi_inverse((0.05, 0.0, 0.0))).kind == "regular"


def test_probe_too_far():
    with pytest.raises(DomainError):
        a2.singular_fiber_probe(IntegralValue(2.0, 1.0, 1.8))


def test_normal_form():
    nf = a2.verify_normal_form()
    failed = [c["name"] for c in nf.checks if not c["passed"]]
    assert failed == []
    assert nf.A == pytest.approx(a2.PRINTED_A, abs=5e-5)
    assert nf.B == pytest.approx(a2.PRINTED_B, abs=5e-4)
    assert nf.kappa_scale == pytest.approx(0.594984, abs=5e-6)

import math

import numpy as np
import pytest

from fibration import critical_set as cs
from fibration.errors import DomainError, OutOfRange, RelationViolated
from fibration.phase_space import STC, SystemParams


def test_rank0_types():
    types = {(r.sigma_u, r.sigma_v): r.type for r in cs.rank0_classify()}
    assert types == {(-1, -1): "EEE", (1, 1): "EFF", (-1, 1): "EFF", (1, -1): "EFF"}


def test_rank0_elliptic_frequencies():
    r = cs.rank0_classify()[0]
    imag = sorted(e.imag for e in r.eigenvalues)
    s = math.sqrt(17.0)
    assert imag == pytest.approx([-4.0, -(s + 1) / 4, -(s - 1) / 4, (s - 1) / 4, (s + 1) / 4, 4.0], abs=1e-9)
    assert max(abs(e.real) for e in r.eigenvalues) < 1e-9


def test_rank0_focus_quartet():
    r = cs.rank0_classify()[1]
    quartet = [e for e in r.eigenvalues if abs(e.real) > 1e-6]
    assert len(quartet) == 4
    for e in quartet:
        assert abs(e.real) == pytest.approx(math.sqrt(15.0) / 4, abs=1e-9)
        assert abs(e.imag) == pytest.approx(0.25, abs=1e-9)


def test_rank0_values_order():
    got = [v.to_array() for v in cs.rank0_values()]
    assert np.allclose(got, [[-1.5, 1.5, -2.0], [-2.5, 2.5, 2.0], [2.5, -1.5, 0.0], [1.5, -2.5, 0.0]])


def test_b_max_is_root():
    b = cs.b_max()
    assert b == pytest.approx(1.7583, abs=1e-4)
    assert abs(16 * b ** 3 - 8 * b ** 2 + b - 64) < 1e-10


@pytest.mark.parametrize("family,b,kind", [
    ("l1", 1.0, "FFR"),
    ("l2", 2.0, "FFR"),
    ("l6", -1.0, "EER"),
    ("l5", 0.1, "EER"),
])
def test_rank1_types(family, b, kind):
    s = cs.rank1_sample(family, b)
    assert s.type == kind
    assert s.proportionality_residual < 1e-10


def test_rank1_closed_form_value():
    s = cs.rank1_sample("l2", 2.5)
    closed = cs.critical_value_of(s.a, s.b)
    assert s.critical_value.to_array() == pytest.approx(closed.to_array(), abs=1e-10)


def test_c_star_is_degenerate():
    s = cs.rank1_sample("c*")
    assert s.critical_value.to_array() == pytest.approx(cs.C_STAR.to_array(), abs=1e-12)
    assert s.type == "degenerate"
    assert cs.C_STAR.h1 == pytest.approx(2.0 - 3.0 * 2.0 ** (-2.0 / 3.0))
    assert cs.C_STAR.k == pytest.approx((12.0 * 2.0 ** (2.0 / 3.0) - 1.0) / 16.0)


def test_hyperbolic_hyperbolic_point():
    s = cs.rank1_sample("hh")
    assert s.critical_value.k == pytest.approx(cs.K_HH, abs=1e-9)


def test_ffr_threads_approach_c_star():
    b = cs.B_STAR + 1e-7
    for fam in ("l3", "l4"):
        v = cs.rank1_sample(fam, b).critical_value
        assert v.distance(cs.C_STAR) < 1e-3


@pytest.mark.parametrize("k,expected", [
    (1.8, [(-1.743013, 1.743013), (-0.578466, 0.578466)]),
    (0.3, [(1.164044, -1.793686), (1.793686, -1.164044)]),
])
def test_focus_focus_values(k, expected):
    got = sorted((v.h1, v.h2) for v in cs.focus_focus_values(k))
    assert len(got) == 2
    for (h1, h2), (e1, e2) in zip(got, expected):
        assert h1 == pytest.approx(e1, abs=1e-5)
        assert h2 == pytest.approx(e2, abs=1e-5)


def test_rank1_out_of_interval():
    with pytest.raises(OutOfRange):
        cs.rank1_sample("l1", 3.0)


def test_unknown_family():
    with pytest.raises(DomainError):
        cs.rank1_sample("l9", 1.0)


def test_families_need_resonance():
    with pytest.raises(DomainError):
        cs.rank1_sample("l1", 1.0, SystemParams(0.5, 1.5, 2.0, 1.0))


def test_relation_violated():
    with pytest.raises(RelationViolated):
        cs.rank1_general(0.3, 0.7)


def test_general_rank1_on_relation():
    x = -0.8
    found = 0
    for y in cs.solve_relation_y(x):
        s = cs.rank1_general(x, y)
        if s is None:
            continue
        found += 1
        assert s.proportionality_residual < 1e-9
    assert found >= 1


def test_rank2_slice_surrounds_focus_focus():
    samples = cs.rank2_slice(1.8, n_samples=200)
    for v in cs.focus_focus_values(1.8):
        assert cs.inside_rank2_curve(samples, (v.h1, v.h2))
    assert not cs.inside_rank2_curve(samples, (100.0, 100.0))


def test_slice_contents():
    sl = cs.bifurcation_slice(1.8, n_samples=60)
    ffr = [r for r in sl["rank1"] if r["type"] == "FFR"]
    assert {r["family"] for r in ffr} == {"l1", "l2"}
    assert all(abs(r["k"] - 1.8) < 1e-9 for r in sl["rank1"])
    assert sl["rank0"] == []


def test_slice_through_fixed_point():
    sl = cs.bifurcation_slice(2.0, n_samples=60)
    assert [(r["sigma_u"], r["sigma_v"]) for r in sl["rank0"]] == [(1, 1)]


def test_diagram_rejects_empty_levels():
    with pytest.raises(OutOfRange):
        cs.bifurcation_diagram([1.0, -3.0])


def test_thread_polylines_shape():
    lines = cs.thread_polylines(10)
    assert set(lines) == set(cs.FAMILY_INTERVALS)
    assert all(len(pts) == 10 and len(pts[0]) == 3 for pts in lines.values())


@pytest.mark.parametrize("family,k", [("l1", 1.8), ("l2", 1.8), ("l6", 0.3), ("l5", 0.3)])
def test_thread_crossings_hit_the_level(family, k):
    bs = cs.thread_crossings(family, k)
    assert bs
    for b in bs:
        assert cs.rank1_sample(family, b).critical_value.k == pytest.approx(k, abs=1e-10)


@pytest.mark.parametrize("family", cs.FFR_FAMILIES + cs.EER_FAMILIES)
def test_family_type_is_constant_along_thread(family):
    expected = "FFR" if family in cs.FFR_FAMILIES else "EER"
    types = {cs.rank1_sample(family, float(b)).type for b in cs._family_grid(family, 200)}
    assert types == {expected}


@pytest.mark.parametrize("family,b", [("l2", 3.9), ("l6", -3.9), ("l3", 1.755), ("l7", 0.24)])
def test_large_linearization_is_not_degenerate(family, b):
    assert cs.rank1_sample(family, b).type != "degenerate"


def test_pair_kind_degenerate_only_at_small_eigenvalue():
    big = np.diag([2.0, -2.0, 1.0, -1.0]) + np.triu(np.full((4, 4), 1e3), 1)
    assert cs._pair_kind(big, 1e-8) == "hyperbolic"
    tiny = np.diag([2.0, -2.0, 1e-9, -1e-9])
    assert cs._pair_kind(tiny, 1e-8) == "degenerate"


def test_slice_at_bottom_level_is_the_fixed_point():
    sl = cs.bifurcation_diagram([-2.0], n_samples=20)["slices"][0]
    assert sl["rank2"] == []
    assert sl["rank1"] == []
    assert [(r["sigma_u"], r["sigma_v"]) for r in sl["rank0"]] == [(-1, -1)]
    assert (sl["rank0"][0]["h1"], sl["rank0"][0]["h2"]) == pytest.approx((-1.5, 1.5), abs=1e-12)


def test_general_crossings_find_focus_focus_values():
    general = cs.general_crossings(1.8)
    assert all(abs(s.critical_value.k - 1.8) < 1e-8 for s in general)
    assert all(s.proportionality_residual < 1e-9 for s in general)
    for ff in cs.focus_focus_values(1.8):
        assert min(s.critical_value.distance(ff) for s in general) < 1e-6


def test_slice_for_other_params_has_rank1():
    params = SystemParams(0.4, 1.6, 1.0, 1.0)
    sl = cs.bifurcation_slice(1.8, params, n_samples=40)
    assert sl["rank1"]
    assert {r["family"] for r in sl["rank1"]} == {"general"}
    assert all(abs(r["k"] - 1.8) < 1e-8 for r in sl["rank1"])

import numpy as np
import pytest

from fibration.errors import DomainError
from fibration.flows import FlowSpec, flow, flow_compose, flow_samples, period_map
from fibration.phase_space import (
    STC,
    eval_integrals,
    integrals_array,
    random_phase_point,
    s1_action,
    sphere_defect,
)


@pytest.fixture
def start():
    return random_phase_point(np.random.default_rng(5))


def test_zero_duration_is_identity(start):
    P = flow(FlowSpec((1.0, 0.0, 0.0), 0.0), start)
    assert P.to_array() == pytest.approx(start.to_array(), abs=1e-15)


def test_integrals_conserved_along_h(start):
    times = np.linspace(0.0, 10.0, 11)
    X = flow_samples(FlowSpec((1.0, 1.0, STC.omega), 10.0), start, times)
    F = integrals_array(X)
    assert np.max(np.abs(F - F[0])) < 1e-9
    assert sphere_defect(X) < 1e-10


def test_backward_flow_returns(start):
    fwd = flow(FlowSpec((1.0, 0.0, 0.0), 3.0), start)
    back = flow(FlowSpec((1.0, 0.0, 0.0), -3.0), fwd)
    assert back.to_array() == pytest.approx(start.to_array(), abs=1e-9)


def test_k_flow_matches_closed_form(start):
    P = flow(FlowSpec((0.0, 0.0, 1.0), 0.7), start)
    assert P.to_array() == pytest.approx(s1_action(0.7, start).to_array(), abs=1e-9)


def test_h1_h2_commute(start):
    a = flow(FlowSpec((0.0, 1.0, 0.0), 0.8), flow(FlowSpec((1.0, 0.0, 0.0), 0.5), start))
    b = flow(FlowSpec((1.0, 0.0, 0.0), 0.5), flow(FlowSpec((0.0, 1.0, 0.0), 0.8), start))
    assert a.to_array() == pytest.approx(b.to_array(), abs=1e-9)


def test_period_map_matches_composition(start):
    T = np.array([[0.5, 0.8, 0.3], [-0.2, 0.4, 1.1]])
    Y = period_map(T, start.to_array())
    for row, y in zip(T, Y):
        assert y == pytest.approx(flow_compose(row, start).to_array(), abs=1e-9)


def test_samples_out_of_order(start):
    spec = FlowSpec((1.0, 0.0, 0.0), 2.0)
    X = flow_samples(spec, start, [2.0, 0.5, 1.0])
    assert X[1] == pytest.approx(flow(FlowSpec((1.0, 0.0, 0.0), 0.5), start).to_array(), abs=1e-10)
    assert eval_integrals(X[0]).to_array() == pytest.approx(eval_integrals(start).to_array(), abs=1e-10)


@pytest.mark.parametrize("kwargs", [
    {"tolerance": 0.0},
    {"max_steps": 0},
])
def test_bad_spec_rejected(kwargs):
    with pytest.raises(DomainError):
        FlowSpec((1.0, 0.0, 0.0), 1.0, **kwargs)


def test_wrong_coefficient_count_rejected():
    with pytest.raises(DomainError):
        FlowSpec((1.0, 0.0), 1.0)

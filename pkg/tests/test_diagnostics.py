import json

import numpy as np
import pytest

from smfg import diagnostics as dg
from smfg.exact import exact_gradient_drift
from smfg.flows import solve_gradient_flow
from smfg.hamiltonian import adjoint_apply, make_grid_data
from smfg.integrators import FlowConfig


def sine(x):
    return np.sin(2 * np.pi * x)


def cosine(x):
    return np.cos(2 * np.pi * x)


def shifted_adjoint(u, w, data):
    """Negative control: the right answer moved by one node."""
    return np.roll(adjoint_apply(u, w, data), 1)


def test_adjoint_suite_passes_and_is_deterministic():
    a = dg.run_adjoint_suite(seed=3, sizes=(4, 16), cases=20)
    b = dg.run_adjoint_suite(seed=3, sizes=(4, 16), cases=20)
    assert a.passed and a.failures == []
    assert a.to_json() == b.to_json()
    doc = json.loads(a.to_json())
    assert doc["suite"] == "adjoint" and doc["cases"] == 40


def test_adjoint_negative_control_locates_index():
    report = dg.run_adjoint_suite(seed=0, sizes=(8,), cases=5, adjoint=shifted_adjoint)
    assert report.passed is False
    assert len(report.failures) == 5
    first = report.failures[0]
    assert first["case_seed"] == [0, 8, 0] and 0 <= first["index"] < 8
    assert "FAIL" in report.summary()


def test_constant_direction_gives_zero_pairings(rng):
    data = dg.random_problem(rng, 10)
    u = dg.random_field(rng, 10)
    w = dg.random_field(rng, 10)
    from smfg.hamiltonian import linearize_apply
    assert np.allclose(linearize_apply(u, np.full(10, 2.0), data), 0.0)
    assert abs(np.dot(np.full(10, 2.0), adjoint_apply(u, w, data))) < 1e-10


def test_random_inputs():
    rng = np.random.default_rng(1)
    f = dg.random_field(rng, 32)
    # modes k have amplitude <= 1/k, plus a constant offset in [-1, 1]
    assert np.abs(f).max() <= 1.0 + sum(1 / k for k in range(1, 9))
    assert dg.random_field(np.random.default_rng(1), 32).tolist() == f.tolist()
    m = dg.random_density(rng, 32)
    assert m.min() > 0 and np.all(np.isfinite(m))


def test_monotonicity_suite():
    report = dg.run_monotonicity_suite(seed=1, sizes=(4, 8), cases=200)
    assert report.passed and report.details["negative_count"] == 0
    congestion = dg.run_monotonicity_suite(seed=1, sizes=(4,), variant="congestion", cases=100)
    assert congestion.passed is None
    assert "RECORDED" in congestion.summary()
    assert set(congestion.details["quantiles"]) == {"0.0", "0.01", "0.1", "0.5"}


def test_monotonicity_equal_pair():
    data = make_grid_data(6, sine)
    from smfg.operators import monotonicity_gap
    m = np.linspace(0.5, 1.5, 6)
    u = np.linspace(-1, 1, 6)
    assert monotonicity_gap(m, u, m, u, data) == 0.0


def test_gradient_check():
    report = dg.run_gradient_check(seed=2, n=12, cases=10)
    assert report.passed and report.details["worst_relative_error"] < 1e-6


def test_contraction_identical_and_distinct():
    data = make_grid_data(16, sine)
    x = data.grid.nodes
    cfg = FlowConfig(t_max=1.0, rtol=1e-6, atol=1e-8, record_every=0.125)
    init = (1 + 0.2 * cosine(x), 0.2 * cosine(x))
    same = dg.run_contraction_test(data, init, init, cfg)
    assert same.passed and np.all(same.details["distance"] == 0.0)
    other = dg.run_contraction_test(data, init, (np.ones(16), np.zeros(16)), cfg)
    assert other.passed, other.failures
    assert other.details["endpoint_ok"]
    assert other.details["distance"][-1] < other.details["distance"][0]


def test_energy_audit():
    data = make_grid_data(20, sine)
    _, traj = solve_gradient_flow(data, 0.2 * cosine(data.grid.nodes), FlowConfig(t_max=1.0))
    assert dg.run_energy_audit(traj).passed
    assert dg.run_energy_audit((traj.times, np.full(len(traj.times), 1.3))).passed
    reversed_ = dg.run_energy_audit((traj.times, traj.phi[::-1]))
    assert reversed_.passed is False and reversed_.failures


def test_refinement_trivial_family():
    family = dg.ProblemFamily(V=lambda x: 0 * x, u0=lambda x: 0 * x)
    result = dg.run_refinement_study(family, sizes=(8, 16, 32))
    assert result.passed
    assert all(e.m_linf <= dg.ERROR_FLOOR and e.u_linf == 0 for e in result.errors)
    assert "oracle" in result.notes[0]


def test_refinement_gradient_drift_family():
    psi = lambda x: 0.2 / (2 * np.pi) * np.sin(2 * np.pi * x)
    dpsi = lambda x: 0.2 * np.cos(2 * np.pi * x)
    family = dg.ProblemFamily(V=sine, b=dpsi, exact=lambda grid: exact_gradient_drift(psi, dpsi, sine, grid))
    result = dg.run_refinement_study(family, sizes=(12, 24, 48), cfg=FlowConfig(t_max=3.0, rtol=1e-6, atol=1e-8))
    assert result.passed, result.notes
    assert all(o > 0.7 for o in result.orders["m_linf"])
    json.dumps(result.to_dict())


def test_refinement_rejects_unsorted_sizes():
    with pytest.raises(ValueError):
        dg.run_refinement_study(dg.ProblemFamily(V=sine), sizes=(50, 25))


def test_study_helpers():
    assert dg._decreasing_above_floor([1e-3, 5e-4, 1e-13, 1e-14])
    assert dg._decreasing_above_floor([1e-15, 2e-15])
    assert not dg._decreasing_above_floor([1e-3, 1e-3])
    assert dg._bounded([1.0, 1.05, 0.9])
    assert not dg._bounded([1.0, 1.5])

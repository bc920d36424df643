import math

import numpy as np
import pytest

from smfg.core_grid import PeriodicGrid1D, PeriodicGrid2D
from smfg.exact import (
    Provenance,
    QuadratureError,
    error_report,
    exact_2d_separable,
    exact_congestion,
    exact_gradient_drift,
    exact_state,
    exact_zero_drift,
    quadrature,
    sum_form_2d,
)
from smfg.hamiltonian import make_grid_data
from smfg.operators import MfgState, a_apply, residual


def bessel_i0(z, terms=40):
    """Independent series oracle: I0(z) = sum (z^2/4)^k / (k!)^2."""
    return sum((z * z / 4) ** k / math.factorial(k) ** 2 for k in range(terms))


I0_1 = bessel_i0(1.0)


def sine(x):
    return np.sin(2 * np.pi * x)


def zero(x):
    return 0 * x


def test_bessel_oracle_value():
    assert I0_1 == pytest.approx(1.2660658777520082, rel=1e-15)


def test_quadrature_examples():
    assert quadrature(lambda x: np.ones_like(x)) == pytest.approx(1.0, abs=1e-15)
    assert quadrature(sine) == pytest.approx(0.0, abs=1e-13)
    assert quadrature(lambda x: np.exp(sine(x))) == pytest.approx(I0_1, rel=1e-13)


def test_quadrature_failure():
    # not periodic: the trapezoid error only halves per doubling
    with pytest.raises(QuadratureError):
        quadrature(lambda x: x, tol=1e-14, max_doublings=6)


def test_zero_drift_examples():
    grid = PeriodicGrid1D(100)
    flat = exact_zero_drift(zero, grid)
    assert np.array_equal(flat.u, np.zeros(100))
    assert np.allclose(flat.m, 1.0) and flat.hbar == pytest.approx(0.0, abs=1e-15)

    sol = exact_zero_drift(sine, grid)
    assert sol.hbar == pytest.approx(math.log(I0_1), abs=1e-13)
    assert sol.hbar == pytest.approx(0.235914, abs=1e-6)
    assert sol.m[24] == pytest.approx(math.e / I0_1, rel=1e-13)  # node x = 0.25
    assert math.e / I0_1 == pytest.approx(2.1471, abs=1e-4)

    shifted = exact_zero_drift(lambda x: sine(x) + 0.7, grid)
    assert np.allclose(shifted.m, sol.m, rtol=1e-13)
    assert shifted.hbar == pytest.approx(sol.hbar + 0.7, rel=1e-13)


def test_gradient_drift_examples():
    grid = PeriodicGrid1D(64)
    beta = 0.2
    psi = lambda x: beta / (2 * np.pi) * np.sin(2 * np.pi * x)
    dpsi = lambda x: beta * np.cos(2 * np.pi * x)

    none = exact_gradient_drift(zero, zero, sine, grid)
    plain = exact_zero_drift(sine, grid)
    assert np.allclose(none.m, plain.m) and none.hbar == pytest.approx(plain.hbar)

    sol = exact_gradient_drift(psi, dpsi, sine, grid)
    assert sol.provenance is Provenance.GRADIENT_DRIFT
    expected = math.log(quadrature(lambda y: np.exp(np.sin(2 * np.pi * y) - 0.02 * np.cos(2 * np.pi * y) ** 2)))
    assert sol.hbar == pytest.approx(expected, rel=1e-13)
    # u is minus the antiderivative of b
    assert np.allclose(sol.u, -psi(grid.nodes))

    flipped = exact_gradient_drift(lambda x: -psi(x), lambda x: -dpsi(x), sine, grid)
    assert np.allclose(flipped.m, sol.m) and np.allclose(flipped.u, -sol.u)

    with pytest.raises(ValueError):
        exact_gradient_drift(lambda x: 1 + 0 * x, zero, sine, grid)


def test_gradient_drift_consistency_away_from_drift_zeros():
    # The sampled solution is O(h)-consistent except next to the zeros of b
    # (the extrema of u), where the upwind selection switches sides and leaves
    # an O(1) flux imbalance that does not shrink with n.
    beta = 0.2
    psi = lambda x: beta / (2 * np.pi) * np.sin(2 * np.pi * x)
    dpsi = lambda x: beta * np.cos(2 * np.pi * x)
    away, near = [], []
    for n in (50, 100, 200):
        grid = PeriodicGrid1D(n)
        data = make_grid_data(n, sine, dpsi)
        sol = exact_gradient_drift(psi, dpsi, sine, grid)
        first, second = a_apply(sol.m, sol.u, data)
        block = np.maximum(np.abs(first + sol.hbar), np.abs(second))
        mask = (np.abs(grid.nodes - 0.25) > 0.05) & (np.abs(grid.nodes - 0.75) > 0.05)
        away.append(block[mask].max())
        near.append(block[~mask].max())
    assert away[0] / away[1] >= 1.5 and away[1] / away[2] >= 1.5
    assert min(near) > 0.5


def test_zero_drift_sample_is_discrete_solution():
    for n in (25, 50):
        grid = PeriodicGrid1D(n)
        res = residual(exact_state(exact_zero_drift(sine, grid)), make_grid_data(n, sine))
        assert res.max_norm < 1e-12


def test_congestion_matches_zero_drift():
    grid = PeriodicGrid1D(30)
    a, b = exact_zero_drift(sine, grid), exact_congestion(sine, grid)
    assert np.array_equal(a.m, b.m) and np.array_equal(a.u, b.u) and a.hbar == b.hbar
    assert b.provenance is Provenance.CONGESTION


@pytest.mark.parametrize("n", [25, 50, 100])
def test_exact_masses(n):
    grid = PeriodicGrid1D(n)
    for sol in (exact_zero_drift(sine, grid), exact_gradient_drift(
            lambda x: 0.1 * np.sin(2 * np.pi * x), lambda x: 0.2 * np.pi * np.cos(2 * np.pi * x), sine, grid)):
        assert grid.integrate(sol.m) == pytest.approx(1.0, abs=1e-10)
        assert abs(sol.u.sum()) < 1e-12


def test_2d_separable_examples():
    grid = PeriodicGrid2D(8)
    flat = exact_2d_separable(zero, grid)
    assert np.allclose(flat.m, 1.0) and np.array_equal(flat.u, np.zeros((8, 8)))

    sol = exact_2d_separable(sine, grid)
    assert sol.m[1, 1] == pytest.approx((math.e / I0_1) ** 2, rel=1e-13)  # node (0.25, 0.25)
    assert (math.e / I0_1) ** 2 == pytest.approx(4.610, abs=1e-3)
    assert sol.hbar == pytest.approx(2 * math.log(I0_1), rel=1e-13)

    m1 = exact_zero_drift(sine, PeriodicGrid1D(8)).m
    assert np.allclose(grid.h * sol.m.sum(axis=1), m1 * grid.h * np.exp(sine(grid.nodes[0][:, 0])).sum() / I0_1)


def test_2d_sum_form_differs_from_product():
    grid = PeriodicGrid2D(8)
    assert grid.integrate(sum_form_2d(sine, grid)) == pytest.approx(1.0)
    assert np.max(np.abs(sum_form_2d(sine, grid) - exact_2d_separable(sine, grid).m)) > 1.0


def test_error_report():
    grid = PeriodicGrid1D(20)
    sol = exact_zero_drift(sine, grid)
    report = error_report(exact_state(sol), sol)
    assert report.u_linf == report.m_linf == report.hbar_err == 0.0
    offset = error_report(MfgState(grid, sol.m, sol.u + 0.3, sol.hbar), sol)
    assert offset.u_linf == pytest.approx(0.3)
    with pytest.raises(ValueError):
        error_report(exact_state(exact_zero_drift(sine, PeriodicGrid1D(21))), sol)

"""Closed-form stationary solutions used as oracles.

All normalizing integrals over the torus are computed with a refined periodic
trapezoid rule, which converges spectrally for smooth periodic integrands and
is independent of the solver grid.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core_grid import PeriodicGrid, PeriodicGrid1D, PeriodicGrid2D, l2_norm
from .operators import MfgState


class Provenance(str, enum.Enum):
    ZERO_MEAN_DRIFT = "zero_mean_drift"
    GRADIENT_DRIFT = "gradient_drift"
    CONGESTION = "congestion"
    SEPARABLE_2D = "separable_2d"


@dataclass(frozen=True)
class ExactSolution:
    grid: PeriodicGrid
    u: np.ndarray
    m: np.ndarray
    hbar: float
    provenance: Provenance


class QuadratureError(RuntimeError):
    pass


def quadrature(f: Callable[[np.ndarray], np.ndarray], tol: float = 1e-13, max_doublings: int = 24) -> float:
    """Integral of a 1-periodic function over [0, 1] by refined trapezoid."""
    n = 8
    x = np.arange(n) / n
    estimate = float(np.mean(np.broadcast_to(f(x), x.shape)))
    for _ in range(max_doublings):
        # new nodes are the midpoints; reuse the old sum
        mid = (np.arange(n) + 0.5) / n
        refined = 0.5 * (estimate + float(np.mean(np.broadcast_to(f(mid), mid.shape))))
        n *= 2
        if abs(refined - estimate) < tol * max(1.0, abs(refined)):
            return refined
        estimate = refined
    raise QuadratureError(f"trapezoid rule did not converge to {tol:g} after {max_doublings} doublings")


def exact_zero_drift(V: Callable, grid: PeriodicGrid1D) -> ExactSolution:
    """b = 0: u = 0, m = e^V / Z, Hbar = ln Z with Z the integral of e^V."""
    Z = quadrature(lambda y: np.exp(V(y)))
    m = grid.sample(lambda x: np.exp(V(x))) / Z
    return ExactSolution(grid, np.zeros(grid.shape), m, float(np.log(Z)), Provenance.ZERO_MEAN_DRIFT)


def exact_gradient_drift(psi: Callable, dpsi: Callable, V: Callable, grid: PeriodicGrid1D) -> ExactSolution:
    """b = psi': u = -psi, m proportional to exp(V - psi'^2 / 2).

    The value function is minus the antiderivative of the drift, so that
    u' + b = 0 and the Fokker-Planck flux vanishes.  ``psi`` must have zero
    mean over the torus.
    """
    mean_psi = quadrature(psi)
    if abs(mean_psi) > 1e-10:
        raise ValueError(f"psi must have zero mean, got {mean_psi:.3e}")

    def weight(y):
        return np.exp(V(y) - 0.5 * dpsi(y) ** 2)

    Z = quadrature(weight)
    return ExactSolution(
        grid, -grid.sample(psi), grid.sample(weight) / Z, float(np.log(Z)), Provenance.GRADIENT_DRIFT
    )


def exact_congestion(V: Callable, grid: PeriodicGrid1D) -> ExactSolution:
    sol = exact_zero_drift(V, grid)
    return ExactSolution(grid, sol.u, sol.m, sol.hbar, Provenance.CONGESTION)


def exact_2d_separable(V: Callable, grid: PeriodicGrid2D) -> ExactSolution:
    """W(x, y) = V(x) + V(y): w = 0 and theta(x, y) = m(x) m(y).

    The density is the product of the 1-D densities since ln theta = W - Hbar;
    Hbar is twice the 1-D value.
    """
    Z = quadrature(lambda y: np.exp(V(y)))
    theta = grid.sample(lambda x, y: np.exp(V(x)) * np.exp(V(y))) / (Z * Z)
    return ExactSolution(grid, np.zeros(grid.shape), theta, 2.0 * float(np.log(Z)), Provenance.SEPARABLE_2D)


def sum_form_2d(V: Callable, grid: PeriodicGrid2D) -> np.ndarray:
    """Alternative density m(x) + m(y), normalized to unit mass, for comparison runs."""
    Z = quadrature(lambda y: np.exp(V(y)))
    raw = grid.sample(lambda x, y: np.exp(V(x)) / Z + np.exp(V(y)) / Z)
    return raw / grid.integrate(raw)


@dataclass(frozen=True)
class ErrorReport:
    u_linf: float
    u_l2: float
    m_linf: float
    m_l2: float
    hbar_err: float


def error_report(state: MfgState, exact: ExactSolution) -> ErrorReport:
    if state.grid != exact.grid:
        raise ValueError(f"grid mismatch: {state.grid} vs {exact.grid}")
    du = state.u - exact.u
    dm = state.m - exact.m
    return ErrorReport(
        u_linf=float(np.max(np.abs(du))),
        u_l2=l2_norm(du, state.grid),
        m_linf=float(np.max(np.abs(dm))),
        m_l2=l2_norm(dm, state.grid),
        hbar_err=abs(state.hbar - exact.hbar),
    )


def exact_state(exact: ExactSolution) -> MfgState:
    return MfgState(exact.grid, exact.m, exact.u, exact.hbar)

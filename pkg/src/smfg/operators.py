"""The coupled discrete MFG operator, its residual, the convex energy and the
normalization constant.

For the standard model

    A[m; u] = [ -G(u) + ln m ;  L*_u m ]

and a stationary solution satisfies A[m; u] = [-Hbar * 1; 0] with unit mass
and mean-zero u.  The congestion model swaps in ``congestion_terms``.
Pairings (monotonicity gap, variational inequality) are plain Euclidean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .core_grid import PeriodicGrid, l2_norm
from .hamiltonian import (
    ProblemData,
    Variant,
    adjoint_with_grads,
    congestion_terms,
    g_apply,
    hamiltonian_parts,
)


@dataclass(frozen=True)
class MfgState:
    grid: PeriodicGrid
    m: np.ndarray
    u: np.ndarray
    hbar: float

    def invariant_violations(self, tol: float = 1e-8) -> list[str]:
        problems = []
        if np.any(self.m <= 0.0):
            problems.append("density is not strictly positive")
        mass = self.grid.integrate(self.m)
        if abs(mass - 1.0) > tol:
            problems.append(f"mass(m) = {mass!r} differs from 1")
        scale = self.u.size * max(float(np.max(np.abs(self.u))), 1.0)
        if abs(float(np.sum(self.u))) > tol * scale:
            problems.append(f"sum(u) = {np.sum(self.u)!r} is not zero")
        return problems


@dataclass(frozen=True)
class Residual:
    hj_linf: float
    hj_l2: float
    fp_linf: float
    fp_l2: float

    @property
    def max_norm(self) -> float:
        return max(self.hj_linf, self.hj_l2, self.fp_linf, self.fp_l2)


def _check_density(m: np.ndarray, name: str = "m") -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if np.any(m <= 0.0):
        raise ValueError(f"{name} must be strictly positive")
    return m


def hj_block(u: np.ndarray, m: np.ndarray, data: ProblemData) -> np.ndarray:
    """The Hamiltonian part entering the first equation: G(u) or its congestion analog."""
    if data.variant is Variant.CONGESTION:
        return congestion_terms(u, m, data)[0]
    return g_apply(u, data)


def a_apply(m: np.ndarray, u: np.ndarray, data: ProblemData, *, tie_width: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Both blocks of A[m; u].  ``tie_width`` > 0 uses the flows' blended tie rule."""
    m = _check_density(m)
    if data.variant is Variant.CONGESTION:
        hj, fp = congestion_terms(u, m, data, tie_width=tie_width)
        return -hj + np.log(m), fp
    kinetic, drift_value, grads = hamiltonian_parts(u, data, tie_width=tie_width)
    return -(kinetic + drift_value + data.V) + np.log(m), adjoint_with_grads(grads, m, data.grid.h)


def residual(state: MfgState, data: ProblemData, *, tie_width: float = 0.0) -> Residual:
    """Norms of A[m; u] + [Hbar; 0], split by block.

    The default uses the exact tie rule of the scheme.  Where u has a
    maximum with p == q the discrete minimizer needs a split subgradient, which
    only the blended rule (``tie_width`` > 0) can represent.
    """
    first, second = a_apply(state.m, state.u, data, tie_width=tie_width)
    first = first + state.hbar
    grid = data.grid
    return Residual(
        hj_linf=float(np.max(np.abs(first))),
        hj_l2=l2_norm(first, grid),
        fp_linf=float(np.max(np.abs(second))),
        fp_l2=l2_norm(second, grid),
    )


def energy_phi(u: np.ndarray, data: ProblemData) -> float:
    """phi(u) = sum_i h e^{G_i(u)} (h**2 in 2-D)."""
    return data.grid.cell_volume * float(np.sum(np.exp(g_apply(u, data))))


def phi_gradient(u: np.ndarray, data: ProblemData) -> np.ndarray:
    kinetic, drift_value, grads = hamiltonian_parts(u, data)
    weights = np.exp(kinetic + drift_value + data.V)
    return data.grid.cell_volume * adjoint_with_grads(grads, weights, data.grid.h)


def hbar_from_u(u: np.ndarray, data: ProblemData) -> float:
    """ln(h sum e^{G(u)}), the constant that gives e^{G(u) - Hbar} unit mass."""
    return float(logsumexp(g_apply(u, data))) + np.log(data.grid.cell_volume)


def density_from_u(u: np.ndarray, data: ProblemData) -> tuple[np.ndarray, float]:
    hbar = hbar_from_u(u, data)
    return np.exp(g_apply(u, data) - hbar), hbar


def hbar_rate(m: np.ndarray, u: np.ndarray, data: ProblemData) -> float:
    """mean(hj - ln m): the running estimate of Hbar along the monotone flow.

    Subtracting it from the density block makes that block sum to zero, and it
    equals Hbar at a stationary solution.
    """
    m = _check_density(m)
    return float(np.mean(hj_block(u, m, data) - np.log(m)))


def pairing(first: tuple[np.ndarray, np.ndarray], second: tuple[np.ndarray, np.ndarray]) -> float:
    return float(np.sum(first[0] * second[0]) + np.sum(first[1] * second[1]))


def monotonicity_gap(m, u, theta, v, data: ProblemData) -> float:
    """<A[m;u] - A[theta;v], [m;u] - [theta;v]>."""
    a1, a2 = a_apply(_check_density(m), u, data)
    b1, b2 = a_apply(_check_density(theta, "theta"), v, data)
    return pairing((a1 - b1, a2 - b2), (m - theta, u - v))


def variational_inequality(state: MfgState, theta, v, data: ProblemData) -> float:
    """<A[theta;v] + [Hbar*1; 0], [theta;v] - [m;u]>.

    Nonnegative for every positive ``theta`` when ``state`` solves the
    stationary system.  For test densities with the same mass as ``state.m``
    the Hbar term drops out of the pairing.
    """
    t1, t2 = a_apply(_check_density(theta, "theta"), v, data)
    return pairing((t1 + state.hbar, t2), (theta - state.m, v - state.u))


def pairing_scale(*fields: np.ndarray) -> float:
    """Magnitude used to make pairing tolerances relative."""
    total = 1.0
    for f in fields:
        total = max(total, float(np.sum(np.abs(f))))
    return total

"""Gradient flow on the discrete energy and the mass-preserving monotone flow.

Gradient flow:   u' = -L*_u e^{G(u)}
Monotone flow:   m' = G(u) - ln m - Hbar(t),   u' = -L*_u m

with Hbar(t) chosen so that sum(m') = 0.  Both conserve sum(u); the gradient
flow decreases phi(u) = h sum e^{G(u)}.  The gradient-flow field is the
phi-gradient divided by the cell volume, which only rescales time.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np

from .hamiltonian import ProblemData, Variant, adjoint_with_grads, congestion_terms, hamiltonian_parts
from .integrators import (
    FlowConfig,
    IntegrationResult,
    Integrator,
    IntegrationStats,
    RankOneSparseJacobian,
    colored_fd_jacobian,
    greedy_column_groups,
    integrate,
)
from .operators import MfgState, density_from_u, energy_phi, hbar_rate, residual

logger = logging.getLogger(__name__)


@dataclass
class Trajectory:
    times: np.ndarray
    phi: np.ndarray
    residual: np.ndarray
    mass: np.ndarray
    sum_u: np.ndarray
    hbar: np.ndarray
    densities: list[np.ndarray]
    values: list[np.ndarray]
    final: MfgState
    reason: str
    stats: IntegrationStats = field(default_factory=IntegrationStats)

    @property
    def final_residual(self) -> float:
        return float(self.residual[-1])

    def rows(self):
        """(t, phi, residual_linf, mass, mean_u, hbar) per recorded time."""
        n = self.final.u.size
        for k in range(len(self.times)):
            yield (self.times[k], self.phi[k], self.residual[k], self.mass[k],
                   self.sum_u[k] / n, self.hbar[k])


def gradient_rhs(u: np.ndarray, data: ProblemData, tie_width: float = 0.0) -> np.ndarray:
    kinetic, drift_value, grads = hamiltonian_parts(u, data, tie_width=tie_width)
    weights = np.exp(kinetic + drift_value + data.V)
    return -adjoint_with_grads(grads, weights, data.grid.h)


def _unshifted_monotonic_rhs(m, u, data, tie_width):
    """The monotone flow without the mass-preserving shift: (hj - ln m, -fp)."""
    m = np.asarray(m, dtype=float)
    if np.any(m <= 0.0):
        raise ValueError("monotone flow needs a strictly positive density")
    if data.variant is Variant.CONGESTION:
        hj, fp = congestion_terms(u, m, data, tie_width=tie_width)
    else:
        kinetic, drift_value, grads = hamiltonian_parts(u, data, tie_width=tie_width)
        hj = kinetic + drift_value + data.V
        fp = adjoint_with_grads(grads, m, data.grid.h)
    return hj - np.log(m), -fp


def monotonic_rhs(
    m: np.ndarray, u: np.ndarray, data: ProblemData, tie_width: float = 0.0
) -> tuple[np.ndarray, np.ndarray]:
    gap, du = _unshifted_monotonic_rhs(m, u, data, tie_width)
    # subtracting Hbar(t) = mean(hj - ln m) removes the mean of the gap
    return gap - np.mean(gap), du


def stencil_pattern(grid, blocks: int = 1) -> np.ndarray:
    """Boolean Jacobian pattern of the flows: nodes interact within L1 distance 2.

    Unknowns are ``blocks`` stacked copies of the raveled grid.
    """
    coords = np.unravel_index(np.arange(grid.size), grid.shape)
    dist = np.zeros((grid.size, grid.size), dtype=int)
    for c in coords:
        d = np.abs(c[:, None] - c[None, :])
        dist += np.minimum(d, grid.n - d)
    near = dist <= 2
    return np.tile(near, (blocks, blocks))


def _resolve(cfg: FlowConfig, preferred: Integrator) -> FlowConfig:
    if cfg.integrator is Integrator.AUTO:
        return dataclasses.replace(cfg, integrator=preferred)
    return cfg


def _mean_zero(u: np.ndarray) -> np.ndarray:
    return u - np.mean(u)


def _normalize_density(m: np.ndarray, data: ProblemData) -> np.ndarray:
    m = np.array(m, dtype=float)
    if m.shape != data.grid.shape:
        raise ValueError(f"initial density has shape {m.shape}, expected {data.grid.shape}")
    if np.any(m <= 0.0):
        raise ValueError("initial density must be strictly positive")
    return m / data.grid.integrate(m)


def gradient_flow_state(u: np.ndarray, data: ProblemData) -> MfgState:
    m, hbar = density_from_u(u, data)
    return MfgState(data.grid, m, u, hbar)


def solve_gradient_flow(data: ProblemData, u0: np.ndarray, cfg: FlowConfig) -> tuple[MfgState, Trajectory]:
    if data.variant is not Variant.STANDARD:
        raise ValueError("the gradient flow is only available for the standard model")
    # Without drift the limit is u = 0, where every slope vanishes, and BDF
    # is much cheaper.  A drift puts the maximum of u on the p == q kink; the
    # flow then slides along a nearly discontinuous field, which makes BDF
    # chatter while backward Euler copes.
    cfg = _resolve(cfg, Integrator.IMPLICIT_EULER if data.has_drift else Integrator.BDF)
    shape = data.grid.shape
    u0 = _mean_zero(np.array(u0, dtype=float).reshape(shape))

    def rhs(y):
        return gradient_rhs(y.reshape(shape), data, cfg.tie_width).ravel()

    def monitor(t, y):
        return residual(gradient_flow_state(y.reshape(shape), data), data).max_norm

    pattern = stencil_pattern(data.grid)
    groups = greedy_column_groups(pattern)

    def jac(y, f0):
        return colored_fd_jacobian(rhs, y, f0, pattern, groups, cfg.atol)

    result = integrate(rhs, u0.ravel(), cfg, project=_mean_zero, monitor=monitor, jac=jac)
    states = [gradient_flow_state(y.reshape(shape), data) for y in result.record_states]
    return states[-1], _trajectory(result, states, data)


def solve_monotonic_flow(
    data: ProblemData, m0: np.ndarray, u0: np.ndarray, cfg: FlowConfig
) -> tuple[MfgState, Trajectory]:
    """Run the monotone flow from (m0, u0); m0 is rescaled to unit mass."""
    cfg = _resolve(cfg, Integrator.IMPLICIT_EULER)
    shape = data.grid.shape
    size = data.grid.size
    m0 = _normalize_density(m0, data)
    u0 = _mean_zero(np.array(u0, dtype=float).reshape(shape))

    def split(y):
        return y[:size].reshape(shape), y[size:].reshape(shape)

    def rhs(y):
        dm, du = monotonic_rhs(*split(y), data, cfg.tie_width)
        return np.concatenate([dm.ravel(), du.ravel()])

    def unshifted(y):
        gap, du = _unshifted_monotonic_rhs(*split(y), data, cfg.tie_width)
        return np.concatenate([gap.ravel(), du.ravel()])

    pattern = stencil_pattern(data.grid, blocks=2)
    groups = greedy_column_groups(pattern)

    # removing the mean of the density block is a rank-one correction:
    # J = S - e r^T with e the density indicator and r the mean of S's density rows
    e = np.concatenate([np.ones(size), np.zeros(size)])

    def jac(y, f0):
        S = colored_fd_jacobian(unshifted, y, unshifted(y), pattern, groups, cfg.atol, sparse=True)
        r = np.asarray(S[:size].sum(axis=0)).ravel() / size
        return RankOneSparseJacobian(S, e, r)

    def project(y):
        out = y.copy()
        out[size:] -= np.mean(out[size:])
        return out

    def to_state(y):
        m, u = split(y)
        return MfgState(data.grid, m.copy(), u.copy(), hbar_rate(m, u, data))

    def monitor(t, y):
        return residual(to_state(y), data).max_norm

    y0 = np.concatenate([m0.ravel(), u0.ravel()])
    result = integrate(
        rhs, y0, cfg, positive=slice(0, size), project=project, monitor=monitor, jac=jac
    )
    states = [to_state(y) for y in result.record_states]
    return states[-1], _trajectory(result, states, data)


solve_monotonic_flow_2d = solve_monotonic_flow


def _trajectory(result: IntegrationResult, states: list[MfgState], data: ProblemData) -> Trajectory:
    grid = data.grid
    res = [residual(s, data).max_norm for s in states]
    traj = Trajectory(
        times=np.array(result.record_times),
        phi=np.array([energy_phi(s.u, data) for s in states]),
        residual=np.array(res),
        mass=np.array([grid.integrate(s.m) for s in states]),
        sum_u=np.array([float(np.sum(s.u)) for s in states]),
        hbar=np.array([s.hbar for s in states]),
        densities=[s.m for s in states],
        values=[s.u for s in states],
        final=states[-1],
        reason=result.reason,
        stats=result.stats,
    )
    logger.info(
        "flow stopped at t=%.4g (%s), residual %.3e, %d steps, %d rejected",
        result.t, result.reason, res[-1], result.stats.steps, result.stats.rejected,
    )
    return traj

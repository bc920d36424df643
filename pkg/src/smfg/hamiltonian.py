"""Monotone numerical Hamiltonian and the discrete Hamilton-Jacobi operator.

The numerical Hamiltonian is F(p, q, x) = F^Q(p, q) + F^D(p, q, x) + V(x) with

    F^Q(p, q)    = 0.5 * max(p, q, 0)**2
    F^D(p, q, x) = -b(x) p   if b(x) <= 0
                   b(x) q    otherwise

evaluated on the difference quotients p = (u_i - u_{i+1})/h, q = (u_i - u_{i-1})/h.
In 2-D the quadratic part is applied along each axis and summed; there is no drift.

``adjoint_apply`` is the transpose of the linearization of G and serves as the
discrete Fokker-Planck operator.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .core_grid import (
    PeriodicGrid,
    PeriodicGrid1D,
    StencilPair,
    backward_quotient,
    forward_quotient,
)


class Variant(str, enum.Enum):
    STANDARD = "standard"
    CONGESTION = "congestion"


@dataclass(frozen=True)
class ProblemData:
    """Sampled potential and drift on a periodic grid.

    ``b`` must vanish identically for the congestion model and in 2-D.
    """

    grid: PeriodicGrid
    V: np.ndarray
    b: np.ndarray | None = None
    variant: Variant = Variant.STANDARD
    has_drift: bool = field(init=False, repr=False, default=False)

    def __post_init__(self):
        V = np.array(self.V, dtype=float)
        b = np.zeros(self.grid.shape) if self.b is None else np.array(self.b, dtype=float)
        if V.shape != self.grid.shape or b.shape != self.grid.shape:
            raise ValueError("V and b must be sampled on the problem grid")
        if not (np.all(np.isfinite(V)) and np.all(np.isfinite(b))):
            raise ValueError("V and b must be finite")
        variant = Variant(self.variant)
        if np.any(b != 0.0):
            if variant is Variant.CONGESTION:
                raise ValueError("the congestion model has no drift term (b must be 0)")
            if self.grid.ndim == 2:
                raise ValueError("the 2-D model has no drift term (b must be 0)")
        V.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "variant", variant)
        object.__setattr__(self, "has_drift", bool(np.any(b != 0.0)))

    @classmethod
    def from_functions(
        cls,
        grid: PeriodicGrid,
        V: Callable,
        b: Callable | None = None,
        variant: Variant | str = Variant.STANDARD,
    ) -> "ProblemData":
        b_vals = None if b is None else grid.sample(b)
        return cls(grid, grid.sample(V), b_vals, Variant(variant))


class GradPair(NamedTuple):
    dp: float
    dq: float


# -- scalar forms -------------------------------------------------------------

def fq(pair: StencilPair) -> float:
    s = max(pair[0], pair[1], 0.0)
    return 0.5 * s * s


def fq_grad(pair: StencilPair) -> GradPair:
    p, q = pair
    s = max(p, q, 0.0)
    if s == 0.0:
        return GradPair(0.0, 0.0)
    # tie p == q > 0 goes to the p slot
    if p >= q:
        return GradPair(s, 0.0)
    return GradPair(0.0, s)


def fd_and_grad(pair: StencilPair, b_val: float) -> tuple[float, GradPair]:
    p, q = pair
    if b_val <= 0.0:
        return -b_val * p, GradPair(-b_val, 0.0)
    return b_val * q, GradPair(0.0, b_val)


# -- vectorized kernels -------------------------------------------------------

def _shift(a: np.ndarray, k: int, axis: int) -> np.ndarray:
    """a[i - k] with wraparound; k is +1 or -1."""
    return np.roll(a, k, axis=axis) if a.ndim > 1 else (
        np.concatenate((a[-1:], a[:-1])) if k == 1 else np.concatenate((a[1:], a[:1]))
    )


def _fq_arrays(p: np.ndarray, q: np.ndarray, tie_width: float = 0.0):
    """Vectorized F^Q and the selected gradient.

    With ``tie_width == 0`` the selection matches ``fq_grad``.  A positive
    ``tie_width`` blends the two one-sided gradients linearly when
    |p - q| <= tie_width * max(p, q); exact ties then get (s/2, s/2).
    """
    s = np.maximum(np.maximum(p, q), 0.0)
    if tie_width > 0.0:
        band = tie_width * np.maximum(s, 1e-300)
        weight = np.clip(0.5 + (p - q) / (2.0 * band), 0.0, 1.0)
    else:
        weight = (p >= q).astype(float)
    dp = weight * s
    return 0.5 * s * s, dp, s - dp


def _drift_arrays(p, q, b):
    neg = b <= 0.0
    bn = np.where(neg, -b, 0.0)
    bp = np.where(neg, 0.0, b)
    return bn * p + bp * q, bn, bp


def hamiltonian_parts(u: np.ndarray, data: ProblemData, *, drift: bool = True, tie_width: float = 0.0):
    """Per-axis pieces of the scheme at ``u``.

    Returns ``(kinetic, drift_value, grads)`` where ``kinetic`` is the summed F^Q,
    ``drift_value`` the F^D contribution and ``grads`` a list of ``(dp, dq)``
    arrays, one pair per axis.  With ``drift=False`` the drift is left out of
    both the value and the gradients.
    """
    h = data.grid.h
    kinetic = None
    drift_value = 0.0
    grads = []
    for axis in range(u.ndim):
        p = (u - _shift(u, -1, axis)) / h
        q = (u - _shift(u, 1, axis)) / h
        val, dp, dq = _fq_arrays(p, q, tie_width)
        kinetic = val if kinetic is None else kinetic + val
        if drift and axis == 0 and data.has_drift:
            drift_value, ddp, ddq = _drift_arrays(p, q, data.b)
            dp = dp + ddp
            dq = dq + ddq
        grads.append((dp, dq))
    return kinetic, drift_value, grads


def g_apply(u: np.ndarray, data: ProblemData) -> np.ndarray:
    """G_i(u) = F(psi_i(u), x_i), summed over axes in 2-D."""
    kinetic, drift_value, _ = hamiltonian_parts(u, data)
    return kinetic + drift_value + data.V


g2_apply = g_apply


def _apply_with_grads(grads, v: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros(v.shape)
    for axis, (dp, dq) in enumerate(grads):
        out += dp * forward_quotient(v, h, axis) + dq * backward_quotient(v, h, axis)
    return out


def adjoint_with_grads(grads, w: np.ndarray, h: float) -> np.ndarray:
    """Transpose of ``v -> sum_axes dp * fwd(v) + dq * bwd(v)``."""
    out = 0.0
    for axis, (dp, dq) in enumerate(grads):
        a = dp * w
        c = dq * w
        # -a_{i-1} + a_i + c_i - c_{i+1}
        out = out + (a - _shift(a, 1, axis) + c - _shift(c, -1, axis)) / h
    return out


def linearize_apply(u: np.ndarray, v: np.ndarray, data: ProblemData) -> np.ndarray:
    """Directional derivative of G at ``u`` along ``v``."""
    _, _, grads = hamiltonian_parts(u, data)
    return _apply_with_grads(grads, v, data.grid.h)


def adjoint_apply(u: np.ndarray, w: np.ndarray, data: ProblemData) -> np.ndarray:
    """Transpose of ``linearize_apply`` in the Euclidean pairing."""
    _, _, grads = hamiltonian_parts(u, data)
    return adjoint_with_grads(grads, w, data.grid.h)


adjoint2_apply = adjoint_apply


def congestion_terms(u: np.ndarray, m: np.ndarray, data: ProblemData, *, tie_width: float = 0.0):
    """Hamilton-Jacobi and Fokker-Planck blocks of the congestion model.

    hj = F^Q(psi(u)) / sqrt(m) + V and fp = L^Q*_u sqrt(m), where L^Q* only
    uses the quadratic part of the Hamiltonian.
    """
    m = np.asarray(m, dtype=float)
    if np.any(m <= 0.0):
        raise ValueError("congestion terms need a strictly positive density")
    root = np.sqrt(m)
    kinetic, _, grads = hamiltonian_parts(u, data, drift=False, tie_width=tie_width)
    hj = kinetic / root + data.V
    fp = adjoint_with_grads(grads, root, data.grid.h)
    return hj, fp


def make_grid_data(n: int, V: Callable, b: Callable | None = None, variant="standard") -> ProblemData:
    """Shortcut for 1-D problems: ``make_grid_data(100, lambda x: np.sin(2*np.pi*x))``."""
    return ProblemData.from_functions(PeriodicGrid1D(n), V, b, variant)

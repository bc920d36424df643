"""Periodic grids on the unit torus and the discrete calculus shared by the solvers.

Nodes are x_i = i/n for i = 1..n, with the wraparound convention u_0 = u_n and
u_{n+1} = u_1.  Field values are stored as plain numpy arrays: shape ``(n,)`` in
1-D and ``(n, n)`` indexed ``[i, j]`` in 2-D.  Flattening a 2-D field uses
Fortran order so the x index runs fastest.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np


@dataclass(frozen=True)
class PeriodicGrid1D:
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"grid needs at least 3 nodes, got n={self.n}")

    ndim = 1

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,)

    @property
    def size(self) -> int:
        return self.n

    @property
    def cell_volume(self) -> float:
        return self.h

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(1, self.n + 1) / self.n

    def sample(self, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Evaluate a vectorized function of x at the nodes."""
        return np.broadcast_to(np.asarray(f(self.nodes), dtype=float), self.shape).copy()

    def integrate(self, values: np.ndarray) -> float:
        return self.h * float(np.sum(values))


@dataclass(frozen=True)
class PeriodicGrid2D:
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"grid needs at least 3 nodes per axis, got n={self.n}")

    ndim = 2

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n, self.n)

    @property
    def size(self) -> int:
        return self.n * self.n

    @property
    def cell_volume(self) -> float:
        return self.h * self.h

    @property
    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.arange(1, self.n + 1) / self.n
        return np.meshgrid(x, x, indexing="ij")

    def sample(self, f: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
        x, y = self.nodes
        return np.broadcast_to(np.asarray(f(x, y), dtype=float), self.shape).copy()

    def integrate(self, values: np.ndarray) -> float:
        return self.cell_volume * float(np.sum(values))

    def flatten(self, values: np.ndarray) -> np.ndarray:
        return np.reshape(values, -1, order="F")

    def unflatten(self, flat: np.ndarray) -> np.ndarray:
        return np.reshape(flat, self.shape, order="F")


PeriodicGrid = PeriodicGrid1D | PeriodicGrid2D


@dataclass(frozen=True)
class GridFunction:
    """Nodal values on a periodic grid.  The stored array is read-only."""

    grid: PeriodicGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ValueError(f"expected shape {self.grid.shape}, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def sample(cls, grid: PeriodicGrid, f: Callable) -> "GridFunction":
        return cls(grid, grid.sample(f))


GridFunction1D = GridFunction
GridFunction2D = GridFunction


class StencilPair(NamedTuple):
    p: float  # (u_i - u_{i+1}) / h
    q: float  # (u_i - u_{i-1}) / h


def forward_quotient(u: np.ndarray, h: float, axis: int = 0) -> np.ndarray:
    """(u_i - u_{i+1}) / h along ``axis`` with periodic wraparound."""
    return (u - np.roll(u, -1, axis=axis)) / h


def backward_quotient(u: np.ndarray, h: float, axis: int = 0) -> np.ndarray:
    """(u_i - u_{i-1}) / h along ``axis`` with periodic wraparound."""
    return (u - np.roll(u, 1, axis=axis)) / h


def stencil(u: GridFunction, i: int) -> StencilPair:
    """Difference quotients at the 1-based node ``i`` of a 1-D grid function."""
    n = u.grid.n
    if u.grid.ndim != 1:
        raise ValueError("stencil() is defined for 1-D grid functions")
    if not 1 <= i <= n:
        raise IndexError(f"node index {i} outside 1..{n}")
    vals = u.values
    h = u.grid.h
    here = vals[i - 1]
    right = vals[i % n]          # i+1, with n+1 -> 1
    left = vals[(i - 2) % n]     # i-1, with 0 -> n
    return StencilPair((here - right) / h, (here - left) / h)


def mass(f: GridFunction) -> float:
    return f.grid.integrate(f.values)


def mean_zero_project(u: GridFunction) -> GridFunction:
    return GridFunction(u.grid, u.values - np.mean(u.values))


def norms(f: GridFunction) -> tuple[float, float]:
    """Return the h-weighted l2 norm and the max norm."""
    v = f.values
    l2 = float(np.sqrt(f.grid.cell_volume * np.sum(v * v)))
    linf = float(np.max(np.abs(v))) if v.size else 0.0
    return l2, linf


def l2_norm(values: np.ndarray, grid: PeriodicGrid) -> float:
    return float(np.sqrt(grid.cell_volume * np.sum(values * values)))

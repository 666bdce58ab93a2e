"""Right-continuous step functions on a shared event grid.

Every curve produced by this package (at-risk processes, cumulative
hazards, occupation probabilities, cash flows) is piecewise constant
between observed event times.  This module provides the grid, one- and
two-argument step functions with cadlag evaluation semantics, and exact
Lebesgue-Stieltjes integration of one step function against another.
No interpolation ever happens: a value at ``t`` is the value at the
largest grid point not exceeding ``t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "EventGrid",
    "Step1D",
    "Step2D",
    "GridMismatchError",
    "stieltjes_integrate",
    "increment_2d",
]


class GridMismatchError(ValueError):
    """Raised when an operation combines curves living on different grids."""


class EventGrid:
    """Sorted event times ``0 = t_0 < t_1 < ... < t_M`` with ``t_M`` the horizon.

    Parameters
    ----------
    times : array_like
        Strictly increasing finite times starting at 0.
    """

    __slots__ = ("times",)

    def __init__(self, times):
        t = np.asarray(times, dtype=float)
        if t.ndim != 1 or t.size < 1:
            raise ValueError("grid needs at least one time point")
        if t[0] != 0.0:
            raise ValueError("grid must start at 0")
        if not np.all(np.isfinite(t)):
            raise ValueError("grid times must be finite")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("grid times must be strictly increasing")
        self.times = t
        self.times.setflags(write=False)

    @classmethod
    def from_events(cls, event_times, horizon: float) -> "EventGrid":
        """Merged grid of all event times in ``[0, horizon]`` plus 0 and the horizon.

        Duplicate times (ties across individuals) collapse to one point.
        """
        ev = np.asarray(event_times, dtype=float)
        ev = ev[(ev > 0.0) & (ev <= horizon)]
        t = np.unique(np.concatenate([[0.0, horizon], ev]))
        return cls(t)

    def __len__(self) -> int:
        return self.times.size

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def index_of(self, t) -> np.ndarray:
        """Largest grid index ``m`` with ``times[m] <= t`` (vectorized).

        Negative times are rejected: they indicate an indexing bug upstream.
        """
        tt = np.asarray(t, dtype=float)
        if np.any(tt < 0.0):
            raise ValueError("evaluation at t < 0")
        return np.searchsorted(self.times, tt, side="right") - 1

    def index_of_exact(self, t) -> np.ndarray:
        """Grid index of times that must lie exactly on the grid."""
        idx = np.searchsorted(self.times, np.asarray(t, dtype=float))
        ok = (idx < self.times.size) & (self.times[np.minimum(idx, self.times.size - 1)] == t)
        if not np.all(ok):
            raise ValueError("time not on grid")
        return idx

    def __eq__(self, other) -> bool:
        return isinstance(other, EventGrid) and np.array_equal(self.times, other.times)

    def __repr__(self) -> str:
        return f"EventGrid({self.times.size} points, horizon={self.horizon})"


@dataclass(frozen=True)
class Step1D:
    """Cadlag step function: ``values[m]`` holds on ``[t_m, t_{m+1})``."""

    grid: EventGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.grid),):
            raise ValueError("values length must equal grid length")
        object.__setattr__(self, "values", v)

    def __call__(self, t):
        return self.values[self.grid.index_of(t)]

    def left_limit(self, t):
        """Value just before ``t``; at ``t_0`` this is the value at ``t_0``."""
        idx = self.grid.index_of(t)
        on_grid = self.grid.times[idx] == np.asarray(t, dtype=float)
        return self.values[np.maximum(idx - np.where(on_grid, 1, 0), 0)]

    def increments(self) -> np.ndarray:
        """Jump sizes at each grid point; index 0 is 0 by convention."""
        d = np.empty_like(self.values)
        d[0] = 0.0
        d[1:] = np.diff(self.values)
        return d

    def to_csv(self, path) -> None:
        """Write ``(t, value)`` rows."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("t,value\n")
            for t, v in zip(self.grid.times, self.values):
                fh.write(f"{t!r},{v!r}\n")


@dataclass(frozen=True)
class Step2D:
    """Step surface over a product grid: ``values[m1, m2]`` on the half-open cell."""

    grid1: EventGrid
    grid2: EventGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.grid1), len(self.grid2)):
            raise ValueError("values shape must match the product grid")
        object.__setattr__(self, "values", v)

    def __call__(self, t1, t2):
        return self.values[self.grid1.index_of(t1), self.grid2.index_of(t2)]

    def to_csv(self, path) -> None:
        """Write long-format ``(t1, t2, value)`` rows."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("t1,t2,value\n")
            for i, t1 in enumerate(self.grid1.times):
                for j, t2 in enumerate(self.grid2.times):
                    fh.write(f"{t1!r},{t2!r},{self.values[i, j]!r}\n")


def stieltjes_integrate(integrand: Step1D, integrator: Step1D) -> float:
    """Integral of ``integrand(s-)`` against ``d integrator(s)`` over the grid.

    Exact for step functions: the result is
    ``sum_m integrand(t_m -) * (integrator(t_m) - integrator(t_{m-1}))``.
    """
    if integrand.grid != integrator.grid:
        raise GridMismatchError("integrand and integrator live on different grids")
    dmu = np.diff(integrator.values)
    return float(np.dot(integrand.values[:-1], dmu))


def increment_2d(f: Step2D, cell: tuple[int, int]) -> float:
    """Rectangular increment of ``f`` over the grid cell with lower corner ``cell``.

    ``cell = (m1, m2)`` refers to ``[t_{m1}, t_{m1+1}] x [t_{m2}, t_{m2+1}]``;
    the increment is ``f(++) - f(+.) - f(.+) + f(..)``.
    """
    m1, m2 = cell
    n1, n2 = len(f.grid1), len(f.grid2)
    if not (0 <= m1 < n1 - 1 and 0 <= m2 < n2 - 1):
        raise IndexError(f"cell {cell} out of range for {n1}x{n2} grid")
    v = f.values
    return float(v[m1 + 1, m2 + 1] - v[m1 + 1, m2] - v[m1, m2 + 1] + v[m1, m2])

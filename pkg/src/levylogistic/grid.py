"""Uniform 1D grids and fields on them."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Grid1D:
    """Interior nodes x_i = r1 + i h, i = 1..n, of the interval (r1, r2).

    With ``spacing="log"`` the nodes are uniform in ln x instead (needs r1 > 0)
    and ``h`` is the step in ln x.
    """

    r1: float
    r2: float
    n: int
    spacing: str = "linear"

    def __post_init__(self):
        if not self.r1 < self.r2:
            raise ValueError(f"need r1 < r2, got ({self.r1}, {self.r2})")
        if self.n < 1:
            raise ValueError("grid needs at least one interior node")
        if self.spacing not in ("linear", "log"):
            raise ValueError(f"unknown spacing {self.spacing!r}")
        if self.spacing == "log" and not self.r1 > 0:
            raise ValueError("log spacing needs r1 > 0")

    @property
    def h(self) -> float:
        if self.spacing == "log":
            return (np.log(self.r2) - np.log(self.r1)) / (self.n + 1)
        return (self.r2 - self.r1) / (self.n + 1)

    @property
    def x(self) -> np.ndarray:
        return self.x_full[1:-1]

    @property
    def x_full(self) -> np.ndarray:
        """Nodes including both boundary points."""
        if self.spacing == "log":
            x = np.exp(np.linspace(np.log(self.r1), np.log(self.r2), self.n + 2))
            x[0], x[-1] = self.r1, self.r2
            return x
        return np.linspace(self.r1, self.r2, self.n + 2)

    def refine(self) -> "Grid1D":
        """Halve the spacing; every old node is kept."""
        return Grid1D(self.r1, self.r2, 2 * self.n + 1, self.spacing)


@dataclass
class ScalarField:
    grid: Grid1D
    values: np.ndarray
    exterior_left: float = 0.0
    exterior_right: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} values, got shape {self.values.shape}")

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def full(self) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and values with the exterior data attached at r1 and r2."""
        v = np.concatenate([[self.exterior_left], self.values, [self.exterior_right]])
        return self.grid.x_full, v

    def at(self, x):
        """Piecewise-linear interpolation, boundary values included."""
        xs, vs = self.full()
        return np.interp(x, xs, vs)

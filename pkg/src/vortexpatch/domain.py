"""Rectangular grids, nodal scalar fields, and midpoint quadrature.

Everything downstream computes on a uniform tensor grid over a rectangle
with homogeneous Dirichlet boundary.  Gradients are cell-centred (average
of the two one-sided differences per axis), which makes each discrete
energy in :mod:`vortexpatch.energy` exactly consistent with its assembled
gradient.

Node (i, j) sits at ``(i*hx, j*hy)``.  Field arrays are indexed ``[j, i]``
(rows scan y, x runs fastest) and flatten row-major; the plain-text field
file stores exactly that ordering.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "Grid2D",
    "ScalarField",
    "make_grid",
    "gradient_field",
    "cell_average",
    "integrate_field",
    "zero_field",
    "field_from_function",
    "field_from_values",
    "random_field",
    "save_field",
    "load_field",
]


@dataclass(frozen=True)
class Grid2D:
    """Uniform nx-by-ny node grid on [0, lx] x [0, ly]."""

    nx: int
    ny: int
    lx: float
    ly: float

    def __post_init__(self) -> None:
        if self.nx < 3 or self.ny < 3:
            raise ValueError("need nx >= 3 and ny >= 3 so the grid has interior nodes")
        for name in ("lx", "ly"):
            side = getattr(self, name)
            if not np.isfinite(side) or side <= 0.0:
                raise ValueError(f"{name} must be finite and positive, got {side!r}")

    @property
    def hx(self) -> float:
        return self.lx / (self.nx - 1)

    @property
    def hy(self) -> float:
        return self.ly / (self.ny - 1)

    @property
    def shape(self) -> tuple[int, int]:
        """Array shape of a nodal field: (ny, nx)."""
        return (self.ny, self.nx)

    @property
    def cell_shape(self) -> tuple[int, int]:
        return (self.ny - 1, self.nx - 1)

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    def node_mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinate arrays (X, Y), each of shape (ny, nx)."""
        x = np.linspace(0.0, self.lx, self.nx)
        y = np.linspace(0.0, self.ly, self.ny)
        return np.meshgrid(x, y)

    def cell_mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-centre coordinate arrays, each of shape (ny-1, nx-1)."""
        x = (np.arange(self.nx - 1) + 0.5) * self.hx
        y = (np.arange(self.ny - 1) + 0.5) * self.hy
        return np.meshgrid(x, y)


def make_grid(nx: int, ny: int, lx: float, ly: float) -> Grid2D:
    """Build a validated grid; rejects non-positive sides and nx or ny < 3."""
    return Grid2D(operator.index(nx), operator.index(ny), float(lx), float(ly))


@dataclass
class ScalarField:
    """Nodal values on a grid; boundary entries are identically zero.

    ``values`` has shape ``(ny, nx)``; entry ``[j, i]`` belongs to the node
    at ``(i*hx, j*hy)``.
    """

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field contains non-finite entries")
        edge = max(
            np.abs(vals[0, :]).max(), np.abs(vals[-1, :]).max(),
            np.abs(vals[:, 0]).max(), np.abs(vals[:, -1]).max(),
        )
        if edge != 0.0:
            raise ValueError("boundary nodes must be identically zero (Dirichlet)")
        self.values = vals

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())


def zero_field(grid: Grid2D) -> ScalarField:
    return ScalarField(grid, np.zeros(grid.shape))


def field_from_function(grid: Grid2D, fn) -> ScalarField:
    """Sample ``fn(x, y)`` at the nodes, forcing the boundary to zero."""
    x, y = grid.node_mesh()
    vals = np.asarray(fn(x, y), dtype=float)
    vals = np.broadcast_to(vals, grid.shape).copy()
    vals[0, :] = vals[-1, :] = 0.0
    vals[:, 0] = vals[:, -1] = 0.0
    return ScalarField(grid, vals)


def field_from_values(grid: Grid2D, values: np.ndarray) -> ScalarField:
    """Wrap an array as a field after zeroing the boundary ring."""
    vals = np.array(values, dtype=float)
    if vals.shape != grid.shape:
        raise ValueError(f"values shape {vals.shape} does not match grid {grid.shape}")
    vals[0, :] = vals[-1, :] = 0.0
    vals[:, 0] = vals[:, -1] = 0.0
    return ScalarField(grid, vals)


def random_field(grid: Grid2D, rng: np.random.Generator, amplitude: float = 1.0) -> ScalarField:
    """Uniform random interior values in [-amplitude, amplitude], zero boundary."""
    vals = rng.uniform(-amplitude, amplitude, size=grid.shape)
    vals[0, :] = vals[-1, :] = 0.0
    vals[:, 0] = vals[:, -1] = 0.0
    return ScalarField(grid, vals)


def gradient_field(u: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    """Cell-centred gradient (gx, gy), each of shape (ny-1, nx-1).

    Per axis this is the average of the two one-sided differences across the
    cell, exact for affine fields.
    """
    vals = u.values
    g = u.grid
    dx = np.diff(vals, axis=1)
    dy = np.diff(vals, axis=0)
    gx = (dx[:-1, :] + dx[1:, :]) / (2.0 * g.hx)
    gy = (dy[:, :-1] + dy[:, 1:]) / (2.0 * g.hy)
    return gx, gy


def cell_average(u: ScalarField) -> np.ndarray:
    """Average of the four corner values per cell, shape (ny-1, nx-1)."""
    v = u.values
    return 0.25 * (v[:-1, :-1] + v[:-1, 1:] + v[1:, :-1] + v[1:, 1:])


def integrate_field(cell_values: np.ndarray, grid: Grid2D) -> float:
    """Midpoint-rule integral of per-cell values over the rectangle."""
    c = np.asarray(cell_values)
    if c.shape != grid.cell_shape:
        raise ValueError(f"cell array shape {c.shape} does not match grid cells {grid.cell_shape}")
    return float(c.sum() * grid.cell_area)


def save_field(u: ScalarField, path: str | Path) -> None:
    """Write a field file: header ``nx,ny,lx,ly`` then one nodal value per line."""
    g = u.grid
    lines = [f"{g.nx},{g.ny},{g.lx!r},{g.ly!r}"]
    lines.extend(f"{v:.17g}" for v in u.values.ravel())
    Path(path).write_text("\n".join(lines) + "\n")


def load_field(path: str | Path) -> ScalarField:
    """Read a field file written by :func:`save_field`."""
    text = Path(path).read_text().strip().splitlines()
    if not text:
        raise ValueError(f"{path}: empty field file")
    head = text[0].split(",")
    if len(head) != 4:
        raise ValueError(f"{path}: header must be 'nx,ny,lx,ly', got {text[0]!r}")
    try:
        nx, ny = int(head[0]), int(head[1])
        lx, ly = float(head[2]), float(head[3])
    except ValueError as exc:
        raise ValueError(f"{path}: bad header: {exc}") from exc
    grid = make_grid(nx, ny, lx, ly)
    body = text[1:]
    if len(body) != nx * ny:
        raise ValueError(f"{path}: expected {nx * ny} values, found {len(body)}")
    try:
        vals = np.array([float(s) for s in body], dtype=float)
    except ValueError as exc:
        raise ValueError(f"{path}: bad value: {exc}") from exc
    return ScalarField(grid, vals.reshape(grid.shape))

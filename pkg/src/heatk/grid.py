"""Rectangular domains, regular cell grids, and scalar fields sampled at cell centers.

Cells are ordered row-major with x varying fastest, and every module in the
package shares that flattening. Conductivity-tagged fields are checked for
strict positivity on construction; other roles carry no bound checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

_EDGES = frozenset({"left", "right", "bottom", "top"})
_ROLES = (None, "temperature", "conductivity", "coefficient")


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


class FieldFormatError(ValueError):
    """Malformed field file; the message carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EvaluationError(ValueError):
    """A sampled function is undefined or non-finite at a cell center."""


@dataclass(frozen=True)
class Domain:
    """Axis-aligned rectangle with temperature (Dirichlet) and flux (Neumann) edges.

    Defaults to the unit square with prescribed temperature on the vertical
    edges and prescribed flux on the horizontal ones.
    """

    x0: float = 0.0
    x1: float = 1.0
    y0: float = 0.0
    y1: float = 1.0
    dirichlet_edges: frozenset = frozenset({"left", "right"})
    neumann_edges: frozenset = frozenset({"bottom", "top"})

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError("domain must satisfy x0 < x1 and y0 < y1")
        d = frozenset(self.dirichlet_edges)
        n = frozenset(self.neumann_edges)
        if (d | n) != _EDGES or (d & n):
            raise ValueError(
                "dirichlet_edges and neumann_edges must partition {left,right,bottom,top}"
            )
        object.__setattr__(self, "dirichlet_edges", d)
        object.__setattr__(self, "neumann_edges", n)

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return self.width * self.height

    def contains(self, x, y):
        return (x >= self.x0) & (x <= self.x1) & (y >= self.y0) & (y <= self.y1)


@dataclass(frozen=True)
class Grid:
    """Regular nx-by-ny cell partition of a domain."""

    domain: Domain
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError("cell counts must be positive")

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def hx(self) -> float:
        return self.domain.width / self.nx

    @property
    def hy(self) -> float:
        return self.domain.height / self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @cached_property
    def centers(self) -> np.ndarray:
        """Cell-center coordinates, shape (size, 2), row-major with x fastest."""
        d = self.domain
        xs = d.x0 + (np.arange(self.nx) + 0.5) * self.hx
        ys = d.y0 + (np.arange(self.ny) + 0.5) * self.hy
        xx, yy = np.meshgrid(xs, ys)
        out = np.column_stack([xx.ravel(), yy.ravel()])
        out.flags.writeable = False
        return out

    def index(self, i: int, j: int) -> int:
        if not (0 <= i < self.nx and 0 <= j < self.ny):
            raise ValueError(f"cell ({i}, {j}) outside {self.nx}x{self.ny} grid")
        return j * self.nx + i

    def ij(self, index: int) -> tuple[int, int]:
        if not (0 <= index < self.size):
            raise ValueError(f"cell index {index} outside grid of {self.size} cells")
        return index % self.nx, index // self.nx


def build_grid(domain: Domain, nx: int, ny: int) -> Grid:
    """Partition the domain into nx*ny equal cells."""
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise ValueError(f"cell counts must be positive integers, got ({nx}, {ny})")
    return Grid(domain, int(nx), int(ny))


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Values of a scalar function at the cell centers of a grid (row-major)."""

    grid: Grid
    values: np.ndarray
    role: str | None = None

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).reshape(-1)
        if vals.shape != (self.grid.size,):
            raise ValueError(f"expected {self.grid.size} values, got {vals.size}")
        if self.role not in _ROLES:
            raise ValueError(f"unknown field role {self.role!r}")
        if self.role == "conductivity":
            if not np.all(np.isfinite(vals)) or vals.min() <= 0.0:
                raise ValueError("conductivity fields must be finite and strictly positive")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def as_matrix(self) -> np.ndarray:
        """Values reshaped to (ny, nx), row j holding the cells at the j-th y level."""
        return self.values.reshape(self.grid.ny, self.grid.nx)

    def with_values(self, values, role: str | None = "keep") -> "ScalarField":
        return ScalarField(self.grid, values, self.role if role == "keep" else role)


def sample_function(grid: Grid, f, role: str | None = None) -> ScalarField:
    """Evaluate f(x, y) at every cell center, row-major.

    Accepts vectorized or scalar-only callables; constants returned by f are
    broadcast. Non-finite samples raise EvaluationError naming the cell.
    """
    xs = grid.centers[:, 0]
    ys = grid.centers[:, 1]
    values = None
    try:
        out = np.asarray(f(xs, ys), dtype=float)
    except Exception:
        out = None
    if out is not None:
        if out.ndim == 0:
            values = np.full(grid.size, float(out))
        elif out.shape == xs.shape:
            values = out.astype(float)
    if values is None:
        values = np.empty(grid.size)
        for i in range(grid.size):
            try:
                values[i] = float(f(xs[i], ys[i]))
            except Exception as exc:
                raise EvaluationError(
                    f"evaluation failed at cell {i} (center ({xs[i]}, {ys[i]})): {exc}"
                ) from exc
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        i = int(bad[0])
        raise EvaluationError(f"non-finite value at cell {i} (center ({xs[i]}, {ys[i]}))")
    return ScalarField(grid, values, role=role)


def write_field(path, field: ScalarField) -> None:
    """Write the text field format: header line, then ny rows of nx values."""
    g = field.grid
    d = g.domain
    lines = [
        f"FIELD {g.nx} {g.ny} {_fmt(d.x0)} {_fmt(d.x1)} {_fmt(d.y0)} {_fmt(d.y1)}"
    ]
    for row in field.as_matrix():
        lines.append(" ".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_field(path, role: str | None = None) -> ScalarField:
    """Parse a field file, rejecting wrong counts with a line-numbered error."""
    text = Path(path).read_text().splitlines()
    if not text:
        raise FieldFormatError("empty file", line=1)
    head = text[0].split()
    if len(head) != 7 or head[0] != "FIELD":
        raise FieldFormatError("expected header 'FIELD nx ny x0 x1 y0 y1'", line=1)
    try:
        nx, ny = int(head[1]), int(head[2])
        x0, x1, y0, y1 = (float(t) for t in head[3:7])
        grid = build_grid(Domain(x0, x1, y0, y1), nx, ny)
    except ValueError as exc:
        raise FieldFormatError(f"bad header: {exc}", line=1) from exc
    values = np.empty(ny * nx)
    row = 0
    for lineno, line in enumerate(text[1:], start=2):
        tokens = line.split()
        if not tokens:
            if row == ny:
                continue
            raise FieldFormatError(f"blank line, expected data row {row + 1} of {ny}", line=lineno)
        if row >= ny:
            raise FieldFormatError(f"unexpected extra data, grid has {ny} rows", line=lineno)
        if len(tokens) != nx:
            raise FieldFormatError(f"expected {nx} values, found {len(tokens)}", line=lineno)
        try:
            values[row * nx:(row + 1) * nx] = [float(t) for t in tokens]
        except ValueError as exc:
            raise FieldFormatError(f"bad number: {exc}", line=lineno) from exc
        row += 1
    if row != ny:
        raise FieldFormatError(f"file ended after {row} of {ny} data rows", line=len(text) + 1)
    return ScalarField(grid, values, role=role)

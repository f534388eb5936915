"""Collocation assembly of the linear system tying cellwise conductivity to the data.

Each test function contributes one row: the matrix entry for cell l is
ux_l * vx(center_l) + uy_l * vy(center_l), and the right-hand side entry is
-sum_i c_i u_i v(center_i). The common cell-measure factor cancels on a
regular partition and is omitted, which also keeps the matrix well scaled.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .grid import EvaluationError, Grid, ScalarField, _fmt
from .testfuncs import TestFunction


class MatrixFormatError(ValueError):
    """Malformed matrix file; the message carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True, eq=False)
class DesignSystem:
    """Dense system A K = F relating cell conductivities to the projected data."""

    matrix: np.ndarray
    rhs: np.ndarray
    grid: Grid | None = None
    family: tuple = ()
    note: str = ""

    def __post_init__(self):
        A = np.array(self.matrix, dtype=float)
        F = np.array(self.rhs, dtype=float).reshape(-1)
        if A.ndim != 2:
            raise ValueError("matrix must be two-dimensional")
        if F.shape != (A.shape[0],):
            raise ValueError(f"rhs length {F.size} does not match {A.shape[0]} rows")
        if not np.all(np.isfinite(A)) or not np.all(np.isfinite(F)):
            raise ValueError("system entries must be finite")
        A.flags.writeable = False
        F.flags.writeable = False
        object.__setattr__(self, "matrix", A)
        object.__setattr__(self, "rhs", F)
        object.__setattr__(self, "family", tuple(self.family))

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def cols(self) -> int:
        return self.matrix.shape[1]


def _check_finite(field: ScalarField, name: str) -> None:
    bad = np.flatnonzero(~np.isfinite(field.values))
    if bad.size:
        raise EvaluationError(f"non-finite {name} sample at cell {int(bad[0])}")


def assemble(
    u: ScalarField,
    ux: ScalarField,
    uy: ScalarField,
    c: ScalarField,
    family: Sequence[TestFunction],
    note: str = "",
) -> DesignSystem:
    """Build one row per test function from the sampled data fields."""
    grid = u.grid
    for f, name in ((ux, "ux"), (uy, "uy"), (c, "c")):
        if f.grid != grid:
            raise ValueError(f"field {name} is sampled on a different grid")
    if not family:
        raise ValueError("test-function family must be non-empty")
    for f, name in ((u, "u"), (ux, "ux"), (uy, "uy"), (c, "c")):
        _check_finite(f, name)

    xs = grid.centers[:, 0]
    ys = grid.centers[:, 1]
    A = np.empty((len(family), grid.size))
    F = np.empty(len(family))
    cu = c.values * u.values
    for row, tf in enumerate(family):
        v, vx, vy = tf.value_grad(xs, ys)
        A[row] = ux.values * vx + uy.values * vy
        F[row] = -np.sum(cu * v)
    return DesignSystem(A, F, grid=grid, family=tuple(family), note=note)


def write_matrix(path, matrix) -> None:
    M = np.atleast_2d(np.asarray(matrix, dtype=float))
    lines = [f"MATRIX {M.shape[0]} {M.shape[1]}"]
    for row in M:
        lines.append(" ".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix(path) -> np.ndarray:
    text = Path(path).read_text().splitlines()
    if not text:
        raise MatrixFormatError("empty file", line=1)
    head = text[0].split()
    if len(head) != 3 or head[0] != "MATRIX":
        raise MatrixFormatError("expected header 'MATRIX rows cols'", line=1)
    try:
        rows, cols = int(head[1]), int(head[2])
    except ValueError as exc:
        raise MatrixFormatError(f"bad header: {exc}", line=1) from exc
    if rows < 1 or cols < 1:
        raise MatrixFormatError("matrix dimensions must be positive", line=1)
    out = np.empty((rows, cols))
    row = 0
    for lineno, line in enumerate(text[1:], start=2):
        tokens = line.split()
        if not tokens:
            if row == rows:
                continue
            raise MatrixFormatError(f"blank line, expected row {row + 1} of {rows}", line=lineno)
        if row >= rows:
            raise MatrixFormatError(f"unexpected extra data, matrix has {rows} rows", line=lineno)
        if len(tokens) != cols:
            raise MatrixFormatError(f"expected {cols} values, found {len(tokens)}", line=lineno)
        try:
            out[row] = [float(t) for t in tokens]
        except ValueError as exc:
            raise MatrixFormatError(f"bad number: {exc}", line=lineno) from exc
        row += 1
    if row != rows:
        raise MatrixFormatError(f"file ended after {row} of {rows} rows", line=len(text) + 1)
    return out


def write_vector(path, vector) -> None:
    write_matrix(path, np.asarray(vector, dtype=float).reshape(-1, 1))


def read_vector(path) -> np.ndarray:
    M = read_matrix(path)
    if M.shape[1] != 1:
        raise MatrixFormatError(f"expected a 1-column matrix, found {M.shape[1]} columns", line=1)
    return M.ravel()

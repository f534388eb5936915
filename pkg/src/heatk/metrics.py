"""Reconstruction quality measures and two-level classification."""

from __future__ import annotations

import numpy as np

from .grid import ScalarField
from .penalties import MaterialPair


def _values(obj) -> np.ndarray:
    return obj.values if isinstance(obj, ScalarField) else np.asarray(obj, dtype=float).reshape(-1)


def _check_same_grid(a, b) -> None:
    if isinstance(a, ScalarField) and isinstance(b, ScalarField) and a.grid != b.grid:
        raise ValueError("fields live on different grids")
    if _values(a).shape != _values(b).shape:
        raise ValueError("inputs have different lengths")


def relative_l2(k_rec, k_true) -> float:
    """|k_rec - k_true| / |k_true| over cell values."""
    _check_same_grid(k_rec, k_true)
    rec, true = _values(k_rec), _values(k_true)
    denom = np.linalg.norm(true)
    if denom == 0.0:
        raise ValueError("reference field has zero norm")
    return float(np.linalg.norm(rec - true) / denom)


def classify(K, pair: MaterialPair):
    """Map every cell to the nearer admissible value; exact midpoints go to k_low."""
    values = _values(K)
    if not np.all(np.isfinite(values)):
        raise ValueError("cannot classify non-finite values")
    out = np.where(values <= pair.midpoint, pair.k_low, pair.k_high)
    if isinstance(K, ScalarField):
        return ScalarField(K.grid, out, role="conductivity")
    return out


def misclassification_rate(class_rec, class_true, exclude=None) -> float:
    """Fraction of (non-excluded) cells whose classes differ.

    `exclude` is an optional binary field marking cells to leave out, e.g. the
    flat-gradient cells where the data carries no information.
    """
    _check_same_grid(class_rec, class_true)
    rec, true = _values(class_rec), _values(class_true)
    keep = np.ones(rec.size, dtype=bool)
    if exclude is not None:
        excluded = _values(exclude).astype(bool)
        if excluded.shape != keep.shape:
            raise ValueError("exclusion mask has the wrong length")
        keep = ~excluded
    if not keep.any():
        raise ValueError("exclusion mask removes every cell")
    return float(np.mean(rec[keep] != true[keep]))


def flat_gradient_mask(ux, uy, rel_tol: float = 1e-6) -> np.ndarray:
    """Binary marker of cells where the gradient magnitude is numerically zero.

    Those are the cells where the conductivity is not identifiable from the
    data, the usual home of reconstruction artifacts.
    """
    _check_same_grid(ux, uy)
    magnitude = np.hypot(_values(ux), _values(uy))
    return (magnitude <= rel_tol * magnitude.max()).astype(np.int8)


def report_text(entries: dict) -> str:
    """Flat key=value block."""
    return "".join(f"{k}={_fmt_value(v)}\n" for k, v in entries.items())


def report_csv(entries: dict) -> str:
    """Header plus one data row, for aggregating experiments."""
    header = ",".join(entries)
    row = ",".join(_fmt_value(v) for v in entries.values())
    return f"{header}\n{row}\n"


def _fmt_value(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)

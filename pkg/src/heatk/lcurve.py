"""Regularization-parameter selection by the corner of the L-curve.

Sweep alpha over a log-spaced range, record the (residual norm, penalty value)
pair for each solve, and pick the interior point of maximum discrete curvature
of the log-log polyline, restricted to corners with the convex (L-shaped)
turn orientation. Ties break toward the smaller alpha.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assembly import DesignSystem
from .grid import _fmt
from .penalties import GradientMask, MaterialPair
from .solvers import TikhonovProblem, solve


class SweepError(RuntimeError):
    """Too few valid sweep points to look for a corner."""


class NoCornerError(RuntimeError):
    """The swept curve has no convex corner; pick alpha manually."""


@dataclass
class LCurvePoint:
    alpha: float
    rho: float = np.nan
    eta: float = np.nan
    log_rho: float = np.nan
    log_eta: float = np.nan
    ok: bool = False
    note: str = ""


def thread_count() -> int:
    """Worker cap for internal parallelism, from HEATK_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("HEATK_THREADS", "1")))
    except ValueError:
        return 1


def default_alphas(sigma_max: float, count: int = 40,
                   low: float = 1e-10, high: float = 1e2) -> np.ndarray:
    """Log-spaced sweep values scaled by the squared largest singular value."""
    if sigma_max <= 0.0:
        raise ValueError("sigma_max must be positive")
    return np.geomspace(low * sigma_max**2, high * sigma_max**2, count)


def sweep(
    system: DesignSystem,
    penalty: str,
    pair: MaterialPair,
    alphas,
    mask: GradientMask | None = None,
    init=None,
    solver_options: dict | None = None,
    threads: int | None = None,
) -> list[LCurvePoint]:
    """Solve the penalized problem at each alpha, preserving sweep order.

    Failed solves yield flagged points; the sweep errors out only if fewer
    than three usable points remain.
    """
    alphas = np.asarray(alphas, dtype=float)
    if alphas.ndim != 1 or alphas.size < 3:
        raise ValueError("need at least three sweep values")
    if np.any(alphas <= 0.0) or np.any(np.diff(alphas) <= 0.0):
        raise ValueError("sweep values must be positive and strictly increasing")
    options = solver_options or {}

    def run(alpha: float) -> LCurvePoint:
        try:
            problem = TikhonovProblem(system, alpha, penalty, pair, mask)
            _, diag = solve(problem, init=init, **options)
            rho, eta = diag.residual_norm, diag.penalty_value
        except Exception as exc:
            return LCurvePoint(alpha=alpha, ok=False, note=f"failed: {exc}")
        point = LCurvePoint(alpha=alpha, rho=rho, eta=eta)
        if not (np.isfinite(rho) and np.isfinite(eta)):
            point.note = "non-finite"
        elif rho <= 0.0 or eta <= 0.0:
            point.note = "zero residual or penalty, log undefined"
        else:
            point.ok = True
            point.log_rho = float(np.log(rho))
            point.log_eta = float(np.log(eta))
        return point

    workers = thread_count() if threads is None else max(1, threads)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(run, alphas))
    else:
        points = [run(a) for a in alphas]
    if sum(p.ok for p in points) < 3:
        raise SweepError("fewer than three valid L-curve points")
    return points


def _signed_curvature(p0, p1, p2) -> float:
    """Menger curvature of three points, positive for a counterclockwise turn."""
    a = p1 - p0
    b = p2 - p1
    c = p2 - p0
    la, lb, lc = np.hypot(*a), np.hypot(*b), np.hypot(*c)
    if la == 0.0 or lb == 0.0 or lc == 0.0:
        return 0.0
    return float(2.0 * (a[0] * b[1] - a[1] * b[0]) / (la * lb * lc))


def select_corner(points: list[LCurvePoint]) -> tuple[float, np.ndarray]:
    """Pick the sweep alpha at the corner of maximal absolute curvature.

    Curvature is the discrete three-point (Menger) curvature of the log-log
    polyline after rescaling its bounding box to the unit square; without the
    rescaling the penalty axis, which can span tens of decades, drowns out the
    bend of the residual axis. Both bend orientations are admitted: penalties
    that vanish on admissible points have no terminal log-penalty plateau, so
    their genuine knee turns clockwise, while quadratic trade-off curves
    corner counterclockwise. Ties break toward the smaller alpha.

    Returns the chosen alpha and the per-point signed curvature array (nan at
    endpoints and at excluded points).
    """
    valid = [(i, p) for i, p in enumerate(points) if p.ok]
    if len(valid) < 3:
        raise NoCornerError("need at least three valid points")
    xy = np.array([(p.log_rho, p.log_eta) for _, p in valid])
    span = xy.max(axis=0) - xy.min(axis=0)
    xy = (xy - xy.min(axis=0)) / np.where(span > 0.0, span, 1.0)
    curvatures = np.full(len(points), np.nan)
    best_idx = None
    best_curv = 0.0
    for j in range(1, len(valid) - 1):
        kappa = _signed_curvature(xy[j - 1], xy[j], xy[j + 1])
        curvatures[valid[j][0]] = kappa
        if abs(kappa) > best_curv:
            best_curv = abs(kappa)
            best_idx = valid[j][0]
    if best_idx is None or best_curv <= 1e-14:
        raise NoCornerError("all points are collinear; pick alpha manually")
    return points[best_idx].alpha, curvatures


def write_csv(path, points: list[LCurvePoint], curvatures=None, selected: float | None = None) -> None:
    """Sweep table as CSV: alpha,rho,eta,curvature,selected."""
    if curvatures is None:
        curvatures = np.full(len(points), np.nan)
    lines = ["alpha,rho,eta,curvature,selected"]
    for p, kappa in zip(points, curvatures):
        chosen = int(selected is not None and p.alpha == selected)
        lines.append(
            f"{_fmt(p.alpha)},{_fmt(p.rho)},{_fmt(p.eta)},{_fmt(kappa)},{chosen}"
        )
    Path(path).write_text("\n".join(lines) + "\n")

"""Minimal-norm and penalized least-squares solvers for the conductivity system.

The data matrix is numerically rank deficient far beyond double precision, so
every direct solve goes through a truncated SVD: singular values at or below
eps * max(rows, cols) relative to the largest are treated as zero. The
masked-quadratic solve is the minimal-norm solution of the vertically stacked
least-squares problem [A; sqrt(alpha) B] K = [F; sqrt(alpha) B k_low 1]; it is
computed by an exact block reduction (project out the unmasked columns, then a
dual-form ridge solve on the mask) so the cost stays O(rows^2 * cols) instead
of a dense SVD of the stacked operator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .assembly import DesignSystem
from .grid import _fmt
from .penalties import (
    GradientMask,
    MaterialPair,
    indicator_polynomial,
    masked_penalty,
    two_well_penalty,
)

PENALTIES = ("none", "w1", "w2")


@dataclass
class SolveDiagnostics:
    """Per-solve report: fit quality, penalty value, and conditioning of the data matrix."""

    residual_norm: float
    penalty_value: float
    iterations: int
    converged: bool
    sigma_max: float
    sigma_min: float
    condition_number: float
    truncation: float
    degenerate: bool = False
    grad_norm: float | None = None
    objective_history: list | None = None

    def as_text(self) -> str:
        items = [
            ("residual_norm", self.residual_norm),
            ("penalty_value", self.penalty_value),
            ("iterations", self.iterations),
            ("converged", int(self.converged)),
            ("sigma_max", self.sigma_max),
            ("sigma_min", self.sigma_min),
            ("condition_number", self.condition_number),
            ("truncation", self.truncation),
            ("degenerate", int(self.degenerate)),
        ]
        if self.grad_norm is not None:
            items.append(("grad_norm", self.grad_norm))
        return "".join(f"{k}={_fmt(v)}\n" for k, v in items)


class ConditionReport(NamedTuple):
    sigma_max: float
    sigma_min: float
    condition_number: float
    truncation: float


@dataclass(frozen=True)
class TikhonovProblem:
    """One regularized inversion: the system, the weight alpha, and the penalty kind.

    penalty "none" is the plain minimal-norm least-squares problem (alpha must
    be 0); "w1" is the two-well quartic; "w2" the gradient-masked quadratic.
    """

    system: DesignSystem
    alpha: float
    penalty: str = "none"
    pair: MaterialPair | None = None
    mask: GradientMask | None = None

    def __post_init__(self):
        if self.penalty not in PENALTIES:
            raise ValueError(f"penalty must be one of {PENALTIES}, got {self.penalty!r}")
        if self.penalty == "none":
            if self.alpha != 0.0:
                raise ValueError("alpha must be 0 for the unpenalized problem")
        else:
            if not self.alpha > 0.0:
                raise ValueError("alpha must be positive for penalized problems")
            if self.pair is None:
                raise ValueError("penalized problems need a MaterialPair")
        if (self.mask is not None) != (self.penalty == "w2"):
            raise ValueError("a mask is required exactly when penalty='w2'")
        if self.mask is not None and self.mask.size != self.system.cols:
            raise ValueError("mask length does not match the system")


def _tsvd(A: np.ndarray):
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    sigma_max = float(s[0]) if s.size else 0.0
    tau = np.finfo(float).eps * max(A.shape) * sigma_max
    return U, s, Vt, tau, s > tau


def condition_numbers(system: DesignSystem) -> ConditionReport:
    """Extreme singular values of the data matrix and their ratio.

    sigma_min is the smallest computed singular value, reported even when it
    sits below the truncation threshold returned alongside.
    """
    _, s, _, tau, _ = _tsvd(system.matrix)
    sigma_max = float(s[0]) if s.size else 0.0
    sigma_min = float(s[-1]) if s.size else 0.0
    cond = sigma_max / sigma_min if sigma_min > 0.0 else np.inf
    return ConditionReport(sigma_max, sigma_min, cond, tau)


def min_norm_lstsq(system: DesignSystem) -> tuple[np.ndarray, SolveDiagnostics]:
    """Least-squares solution of minimal Euclidean norm via the truncated SVD."""
    A, F = system.matrix, system.rhs
    U, s, Vt, tau, keep = _tsvd(A)
    degenerate = not bool(keep.any())
    if degenerate:
        K = np.zeros(system.cols)
    else:
        K = Vt[keep].T @ ((U[:, keep].T @ F) / s[keep])
    sigma_max = float(s[0]) if s.size else 0.0
    sigma_min = float(s[-1]) if s.size else 0.0
    diag = SolveDiagnostics(
        residual_norm=float(np.linalg.norm(A @ K - F)),
        penalty_value=0.0,
        iterations=0,
        converged=True,
        sigma_max=sigma_max,
        sigma_min=sigma_min,
        condition_number=sigma_max / sigma_min if sigma_min > 0.0 else np.inf,
        truncation=tau,
        degenerate=degenerate,
    )
    return K, diag


def solve_masked(
    system: DesignSystem,
    alpha: float,
    pair: MaterialPair,
    mask: GradientMask,
    completion_rcond: float | None = None,
) -> tuple[np.ndarray, SolveDiagnostics]:
    """Tikhonov-Phillips solve with the gradient-masked quadratic penalty.

    Equals the minimal-norm least-squares solution of the stacked system
    [A; sqrt(alpha) B] K = [F; sqrt(alpha) B k_low 1] with B = diag(mask):
    the masked block is strictly convex so its part of the solution is unique,
    while the unmasked block is completed minimal-norm in the row space of its
    columns, which resolves cells the data never sees deterministically.

    completion_rcond truncates the unmasked-column pseudo-inverse at the given
    level relative to its largest singular value; None keeps everything above
    machine precision. On real sampled data the unmasked columns have a tail
    of near-zero singular directions carrying only discretization error, and
    inverting them swamps the completed cells, so callers working with sampled
    fields should pass a noise-floor value (the pipeline uses 1e-3).
    """
    if not alpha > 0.0:
        raise ValueError("alpha must be positive")
    A, F = system.matrix, system.rhs
    if mask.size != system.cols:
        raise ValueError("mask length does not match the system")
    on = mask.b.astype(bool)
    A_m = A[:, on]
    A_f = A[:, ~on]

    if A_f.shape[1]:
        Uf, sf, Vft, tau_f, keep_f = _tsvd(A_f)
        if completion_rcond is not None and sf.size:
            keep_f = sf > max(tau_f, completion_rcond * float(sf[0]))
        Ufk = Uf[:, keep_f]

        def drop_fitted(Y):
            # project onto the complement of the retained range of the free columns
            return Y - Ufk @ (Ufk.T @ Y)

    else:
        def drop_fitted(Y):
            return Y

    K = np.empty(system.cols)
    if A_m.shape[1]:
        At = drop_fitted(A_m)
        base = pair.k_low * np.ones(A_m.shape[1])
        rho = F - At @ base
        G = At @ At.T
        y = np.linalg.solve(alpha * np.eye(system.rows) + G, rho)
        K[on] = base + At.T @ y
    if A_f.shape[1]:
        r = F - A_m @ K[on] if A_m.shape[1] else F.copy()
        if keep_f.any():
            K[~on] = Vft[keep_f].T @ ((Ufk.T @ r) / sf[keep_f])
        else:
            K[~on] = 0.0

    report = condition_numbers(system)
    diag = SolveDiagnostics(
        residual_norm=float(np.linalg.norm(A @ K - F)),
        penalty_value=masked_penalty(K, mask, pair)[0],
        iterations=0,
        converged=True,
        sigma_max=report.sigma_max,
        sigma_min=report.sigma_min,
        condition_number=report.condition_number,
        truncation=report.truncation,
    )
    return K, diag


def two_well_objective(
    system: DesignSystem, alpha: float, pair: MaterialPair, K
) -> tuple[float, np.ndarray]:
    """Value and gradient of |AK - F|^2 + alpha * sum p(K_i)^2."""
    K = np.asarray(K, dtype=float)
    r = system.matrix @ K - system.rhs
    w, gw = two_well_penalty(K, pair)
    return float(r @ r) + alpha * w, 2.0 * (system.matrix.T @ r) + alpha * gw


def solve_two_well(
    system: DesignSystem,
    alpha: float,
    pair: MaterialPair,
    init,
    max_iters: int = 5000,
    grad_tol: float = 1e-8,
) -> tuple[np.ndarray, SolveDiagnostics]:
    """Steepest descent with backtracking on the two-well penalized objective.

    The objective is a nonconvex quartic; descent is guaranteed per accepted
    step (Armijo factor 1e-4, halving line search, doubled warm start), and
    the returned point is a local stationary point, not a certified global
    minimizer. Convergence means the gradient norm fell at or below
    grad_tol * (1 + |grad at init|).
    """
    if not alpha > 0.0:
        raise ValueError("alpha must be positive")
    K = np.array(init, dtype=float).reshape(-1)
    if K.shape != (system.cols,):
        raise ValueError(f"init length {K.size} does not match {system.cols} columns")

    A, F = system.matrix, system.rhs
    p = indicator_polynomial(pair)

    def value(K):
        r = A @ K - F
        pk = p(K)
        return float(r @ r) + alpha * float(pk @ pk)

    J, g = two_well_objective(system, alpha, pair, K)
    if not np.isfinite(J):
        raise ValueError("objective is not finite at the initial point")
    tol = grad_tol * (1.0 + float(np.linalg.norm(g)))

    step = 1.0
    iterations = 0
    history = [J]
    g_norm = float(np.linalg.norm(g))
    for iterations in range(1, max_iters + 1):
        if g_norm <= tol:
            iterations -= 1
            break
        step *= 2.0
        g2 = float(g @ g)
        stalled = False
        while True:
            K_new = K - step * g
            J_new = value(K_new)
            if np.isfinite(J_new) and J_new <= J - 1e-4 * step * g2:
                break
            step *= 0.5
            if step * g2 < 1e-30 * max(J, 1.0):
                stalled = True
                break
        if stalled:
            break
        K = K_new
        J = J_new
        history.append(J)
        _, g = two_well_objective(system, alpha, pair, K)
        g_norm = float(np.linalg.norm(g))

    report = condition_numbers(system)
    diag = SolveDiagnostics(
        residual_norm=float(np.linalg.norm(A @ K - F)),
        penalty_value=two_well_penalty(K, pair)[0],
        iterations=iterations,
        converged=g_norm <= tol,
        sigma_max=report.sigma_max,
        sigma_min=report.sigma_min,
        condition_number=report.condition_number,
        truncation=report.truncation,
        grad_norm=g_norm,
    )
    return K, diag


def default_two_well_init(system: DesignSystem, pair: MaterialPair) -> np.ndarray:
    """Unpenalized minimal-norm solution clipped to the admissible interval."""
    K0, _ = min_norm_lstsq(system)
    return np.clip(K0, pair.k_low, pair.k_high)


def solve(problem: TikhonovProblem, init=None, **options) -> tuple[np.ndarray, SolveDiagnostics]:
    """Dispatch a TikhonovProblem to the matching solver."""
    if problem.penalty == "none":
        return min_norm_lstsq(problem.system)
    if problem.penalty == "w2":
        return solve_masked(
            problem.system, problem.alpha, problem.pair, problem.mask, **options
        )
    if init is None:
        init = default_two_well_init(problem.system, problem.pair)
    return solve_two_well(problem.system, problem.alpha, problem.pair, init, **options)

"""Scikit-learn style front end for the whole reconstruction pipeline."""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import lcurve, metrics, solvers
from .assembly import assemble
from .grid import Domain, Grid, ScalarField, build_grid
from .penalties import MaterialPair, build_mask
from .testfuncs import enumerate_family

_SETTINGS = ("lsq", "w1", "w2")


class ConductivityReconstructor(BaseEstimator):
    """Recover a two-material conductivity map from a full-domain temperature field.

    The input is the temperature field sampled at the cell centers of a regular
    grid: value and both gradient components per cell. Fitting projects the
    steady-conduction optimality relation onto a polynomial test-function
    family, which yields one severely ill-conditioned linear system in the
    cellwise conductivities, and solves it in the requested setting.

    Parameters
    ----------
    k_low, k_high : float, default (1.0, 300.0)
        The two admissible conductivity values, 0 < k_low < k_high.
    setting : {"w2", "w1", "lsq"}, default "w2"
        "lsq" is the unpenalized minimal-norm least-squares solution; "w1"
        adds the two-well quartic penalty (iterative descent); "w2" adds the
        gradient-masked quadratic penalty (direct stacked least squares).
    family_size : int, default 5
        Test-function family parameter; the system has family_size**2 rows.
    alpha : float or "auto", default "auto"
        Regularization weight; "auto" picks the L-curve corner.
    gamma_fraction : float, default 0.01
        Mask threshold as a fraction of max |u| (setting "w2" only).
    c_value : float, default 1.0
        Reaction coefficient entering the right-hand side.
    grid : Grid, optional
        Geometry of the samples. When omitted, a square grid on the unit
        square is inferred from the number of rows of X.
    alphas : array-like, optional
        Explicit sweep values for alpha="auto"; defaults to 40 log-spaced
        values scaled by the squared largest singular value.
    max_iters, grad_tol : int, float
        Descent controls for setting "w1".
    completion_rcond : float or None, default 1e-3
        Relative truncation for the unmasked-cell completion in setting "w2";
        None inverts everything above machine precision, which amplifies
        discretization error on sampled data.

    Attributes
    ----------
    k_ : ndarray of shape (n_cells,)
        Raw reconstructed conductivities (not clipped to the admissible pair).
    material_map_ : ndarray of shape (n_cells,)
        k_ classified to the nearer of {k_low, k_high}.
    alpha_ : float
        The regularization weight actually used (0 for "lsq").
    diagnostics_ : SolveDiagnostics
        Residual, penalty value, iteration count, and conditioning report.
    mask_ : GradientMask or None
        The binary gradient mask (setting "w2").
    lcurve_ : list of LCurvePoint or None
        Sweep trace when alpha="auto".
    system_ : DesignSystem
        The assembled linear system.

    Examples
    --------
    >>> model = ConductivityReconstructor(k_low=1.0, k_high=300.0, setting="w2")
    >>> model.fit(X)                      # X columns: u, du/dx, du/dy
    >>> two_level = model.material_map_
    """

    def __init__(
        self,
        k_low: float = 1.0,
        k_high: float = 300.0,
        setting: str = "w2",
        family_size: int = 5,
        alpha="auto",
        gamma_fraction: float = 0.01,
        c_value: float = 1.0,
        grid: Grid | None = None,
        alphas=None,
        max_iters: int = 5000,
        grad_tol: float = 1e-8,
        completion_rcond: float | None = 1e-3,
    ):
        self.k_low = k_low
        self.k_high = k_high
        self.setting = setting
        self.family_size = family_size
        self.alpha = alpha
        self.gamma_fraction = gamma_fraction
        self.c_value = c_value
        self.grid = grid
        self.alphas = alphas
        self.max_iters = max_iters
        self.grad_tol = grad_tol
        self.completion_rcond = completion_rcond

    def _validate_X(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != 3:
            raise ValueError("X must have shape (n_cells, 3) with columns u, du/dx, du/dy")
        if not np.all(np.isfinite(X)):
            raise ValueError("X contains non-finite entries")
        return X

    def _resolve_grid(self, n_cells: int) -> Grid:
        if self.grid is not None:
            if self.grid.size != n_cells:
                raise ValueError(
                    f"grid has {self.grid.size} cells but X has {n_cells} rows"
                )
            return self.grid
        side = math.isqrt(n_cells)
        if side * side != n_cells:
            raise ValueError(
                "cannot infer a square grid from X; pass grid= explicitly"
            )
        return build_grid(Domain(), side, side)

    def fit(self, X, y=None):
        """Assemble the system from the samples in X and solve it."""
        if self.setting not in _SETTINGS:
            raise ValueError(f"setting must be one of {_SETTINGS}, got {self.setting!r}")
        X = self._validate_X(X)
        grid = self._resolve_grid(X.shape[0])
        pair = MaterialPair(self.k_low, self.k_high)
        u = ScalarField(grid, X[:, 0], role="temperature")
        ux = ScalarField(grid, X[:, 1])
        uy = ScalarField(grid, X[:, 2])
        c = ScalarField(grid, np.full(grid.size, float(self.c_value)), role="coefficient")
        system = assemble(u, ux, uy, c, enumerate_family(self.family_size))

        mask = None
        points = None
        if self.setting == "lsq":
            alpha = 0.0
            K, diag = solvers.min_norm_lstsq(system)
        else:
            if self.setting == "w2":
                mask = build_mask(ux, uy, u, self.gamma_fraction)
            init = solvers.default_two_well_init(system, pair) if self.setting == "w1" else None
            if self.setting == "w1":
                options = {"max_iters": self.max_iters, "grad_tol": self.grad_tol}
            else:
                options = {"completion_rcond": self.completion_rcond}
            alpha = self.alpha
            if alpha == "auto":
                sigma_max = solvers.condition_numbers(system).sigma_max
                grid_alphas = (
                    np.asarray(self.alphas, dtype=float)
                    if self.alphas is not None
                    else lcurve.default_alphas(sigma_max)
                )
                points = lcurve.sweep(
                    system, self.setting, pair, grid_alphas,
                    mask=mask, init=init, solver_options=options,
                )
                alpha, _ = lcurve.select_corner(points)
            alpha = float(alpha)
            problem = solvers.TikhonovProblem(system, alpha, self.setting, pair, mask)
            K, diag = solvers.solve(problem, init=init, **options)

        self.k_ = K
        self.material_map_ = metrics.classify(K, pair)
        self.alpha_ = alpha
        self.diagnostics_ = diag
        self.mask_ = mask
        self.lcurve_ = points
        self.system_ = system
        self.grid_ = grid
        self.n_features_in_ = 3
        return self

    def fit_predict(self, X, y=None) -> np.ndarray:
        """Fit and return the classified (two-level) conductivity map."""
        return self.fit(X).material_map_

    def predict(self, X=None) -> np.ndarray:
        """Classified conductivity map of the fitted field."""
        check_is_fitted(self, "material_map_")
        return self.material_map_

    def score(self, X, y) -> float:
        """Classification agreement with reference conductivities y, in [0, 1]."""
        self.fit(X)
        pair = MaterialPair(self.k_low, self.k_high)
        truth = metrics.classify(np.asarray(y, dtype=float).reshape(-1), pair)
        return 1.0 - metrics.misclassification_rate(self.material_map_, truth)

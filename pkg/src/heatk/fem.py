"""Bilinear (Q1) finite elements for steady conduction on a regular rectangle mesh.

Solves -div(k grad u) + c u = f with prescribed temperature on the vertical
edges and prescribed flux on the horizontal ones. Coefficients k and c are
taken elementwise constant (evaluated at element centroids), so discontinuous
two-material layouts are not smeared by nodal interpolation. Assembly and all
functionals use 2x2 Gauss quadrature, exact for the Q1 forms with constant
coefficients. The element order is a knob so higher-order elements can slot in
behind the same interface; only "q1" is implemented.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Domain, Grid, ScalarField

_G = 1.0 / np.sqrt(3.0)
_QP = np.array([(-_G, -_G), (_G, -_G), (_G, _G), (-_G, _G)])


class SolverError(RuntimeError):
    """Linear solve failed or did not reach the required residual."""


class OutOfDomainError(ValueError):
    """An evaluation point lies outside the domain."""


def _shape(xi, eta):
    """Q1 shape functions, corner order (-1,-1), (1,-1), (1,1), (-1,1)."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    return 0.25 * np.stack(
        [(1 - xi) * (1 - eta), (1 + xi) * (1 - eta), (1 + xi) * (1 + eta), (1 - xi) * (1 + eta)],
        axis=-1,
    )


def _shape_dxi(xi, eta):
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    one = np.ones_like(xi)
    return 0.25 * np.stack([-(1 - eta), (1 - eta), (1 + eta), -(1 + eta)], axis=-1) * one[..., None]


def _shape_deta(xi, eta):
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    one = np.ones_like(eta)
    return 0.25 * np.stack([-(1 - xi), -(1 + xi), (1 + xi), (1 - xi)], axis=-1) * one[..., None]


def _is_zero(coef) -> bool:
    return np.isscalar(coef) and float(coef) == 0.0


def _eval_coefficient(coef, x, y):
    """Evaluate a constant, callable, or cell-field coefficient at points."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if isinstance(coef, ScalarField):
        g = coef.grid
        d = g.domain
        i = np.clip(((x - d.x0) / g.hx).astype(int), 0, g.nx - 1)
        j = np.clip(((y - d.y0) / g.hy).astype(int), 0, g.ny - 1)
        return coef.values[j * g.nx + i]
    if callable(coef):
        try:
            out = np.asarray(coef(x, y), dtype=float)
        except Exception:
            out = None
        if out is not None and out.ndim == 0:
            return np.full(x.shape, float(out))
        if out is not None and out.shape == x.shape:
            return out
        flat_x = x.reshape(-1)
        flat_y = y.reshape(-1)
        vals = np.array([float(coef(px, py)) for px, py in zip(flat_x, flat_y)])
        return vals.reshape(x.shape)
    return np.full(x.shape, float(coef))


@dataclass(frozen=True)
class ForwardProblem:
    """Data for one forward conduction solve.

    k, c, f accept a constant, a callable f(x, y), or a ScalarField
    (looked up piecewise-constant on its own grid). g_left and g_right are the
    prescribed temperatures on x=x0 and x=x1 (constant or callable of y);
    h is the prescribed flux on the horizontal edges (constant or callable).
    """

    k: object = 1.0
    c: object = 1.0
    f: object = 0.0
    g_left: object = 1.0
    g_right: object = 0.0
    h: object = 0.0
    mesh_n: int = 200
    domain: Domain = Domain()
    element: str = "q1"

    def __post_init__(self):
        if self.mesh_n < 2:
            raise ValueError("mesh_n must be >= 2")
        if self.element != "q1":
            raise ValueError(f"unsupported element type {self.element!r}; only 'q1' is available")
        if self.domain.dirichlet_edges != frozenset({"left", "right"}):
            raise ValueError("temperature data must sit on the vertical edges")


@dataclass(frozen=True, eq=False)
class TemperatureSolution:
    """Nodal Q1 solution, evaluable with its gradient anywhere in the domain."""

    domain: Domain
    n: int
    node_values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.node_values, dtype=float).reshape(-1)
        if vals.shape != ((self.n + 1) ** 2,):
            raise ValueError(f"expected {(self.n + 1) ** 2} nodal values, got {vals.size}")
        vals.flags.writeable = False
        object.__setattr__(self, "node_values", vals)

    @property
    def hx(self) -> float:
        return self.domain.width / self.n

    @property
    def hy(self) -> float:
        return self.domain.height / self.n

    def _locate(self, x, y):
        # boundary points belong to the element with the smaller index
        d = self.domain
        ex = np.clip(np.ceil((x - d.x0) / self.hx).astype(int) - 1, 0, self.n - 1)
        ey = np.clip(np.ceil((y - d.y0) / self.hy).astype(int) - 1, 0, self.n - 1)
        return ex, ey

    def value_grad(self, x, y):
        """Return (u, du/dx, du/dy) arrays at the given coordinates."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        d = self.domain
        outside = ~d.contains(x, y)
        if np.any(outside):
            i = int(np.flatnonzero(np.atleast_1d(outside))[0])
            px = np.atleast_1d(x)[i]
            py = np.atleast_1d(y)[i]
            raise OutOfDomainError(f"point ({px}, {py}) lies outside the domain")
        ex, ey = self._locate(x, y)
        xi = 2.0 * (x - d.x0 - ex * self.hx) / self.hx - 1.0
        eta = 2.0 * (y - d.y0 - ey * self.hy) / self.hy - 1.0
        first = ey * (self.n + 1) + ex
        conn = np.stack([first, first + 1, first + self.n + 2, first + self.n + 1], axis=-1)
        vals = self.node_values[conn]
        u = np.sum(vals * _shape(xi, eta), axis=-1)
        ux = np.sum(vals * _shape_dxi(xi, eta), axis=-1) * (2.0 / self.hx)
        uy = np.sum(vals * _shape_deta(xi, eta), axis=-1) * (2.0 / self.hy)
        return u, ux, uy

    def evaluate(self, points):
        """Values and gradients at a list of (x, y) points: arrays (u, ux, uy)."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        return self.value_grad(pts[:, 0], pts[:, 1])

    def sample_on(self, grid: Grid):
        """Sample u and its gradient at the cell centers of a grid.

        Returns three ScalarFields (u tagged as temperature, the gradient
        components untagged).
        """
        u, ux, uy = self.value_grad(grid.centers[:, 0], grid.centers[:, 1])
        return (
            ScalarField(grid, u, role="temperature"),
            ScalarField(grid, ux),
            ScalarField(grid, uy),
        )

    def perturbed(self, direction, t: float) -> "TemperatureSolution":
        """Solution with nodal values shifted by t * direction."""
        return replace(self, node_values=self.node_values + t * np.asarray(direction, dtype=float))

    def basis_function(self, node: int):
        """value_grad callable of one nodal hat function (used for residual checks)."""

        def vg(x, y):
            x = np.asarray(x, dtype=float)
            y = np.asarray(y, dtype=float)
            ex, ey = self._locate(x, y)
            d = self.domain
            xi = 2.0 * (x - d.x0 - ex * self.hx) / self.hx - 1.0
            eta = 2.0 * (y - d.y0 - ey * self.hy) / self.hy - 1.0
            first = ey * (self.n + 1) + ex
            conn = np.stack([first, first + 1, first + self.n + 2, first + self.n + 1], axis=-1)
            hit = (conn == node).astype(float)
            v = np.sum(hit * _shape(xi, eta), axis=-1)
            vx = np.sum(hit * _shape_dxi(xi, eta), axis=-1) * (2.0 / self.hx)
            vy = np.sum(hit * _shape_deta(xi, eta), axis=-1) * (2.0 / self.hy)
            return v, vx, vy

        return vg

    def dirichlet_nodes(self) -> np.ndarray:
        side = self.n + 1
        j = np.arange(side)
        return np.sort(np.concatenate([j * side, j * side + self.n]))

    def free_nodes(self) -> np.ndarray:
        mask = np.ones((self.n + 1) ** 2, dtype=bool)
        mask[self.dirichlet_nodes()] = False
        return np.flatnonzero(mask)


def _connectivity(n: int) -> np.ndarray:
    ex, ey = np.meshgrid(np.arange(n), np.arange(n))
    first = (ey * (n + 1) + ex).ravel()
    return np.stack([first, first + 1, first + n + 2, first + n + 1], axis=1)


def _reference_matrices(hx: float, hy: float):
    S = np.zeros((4, 4))
    M = np.zeros((4, 4))
    w = hx * hy / 4.0
    for xi, eta in _QP:
        N = _shape(xi, eta)
        dNx = _shape_dxi(xi, eta) * (2.0 / hx)
        dNy = _shape_deta(xi, eta) * (2.0 / hy)
        S += w * (np.outer(dNx, dNx) + np.outer(dNy, dNy))
        M += w * np.outer(N, N)
    return S, M


def _element_centroids(domain: Domain, n: int):
    hx = domain.width / n
    hy = domain.height / n
    cx = domain.x0 + (np.arange(n) + 0.5) * hx
    cy = domain.y0 + (np.arange(n) + 0.5) * hy
    xx, yy = np.meshgrid(cx, cy)
    return xx.ravel(), yy.ravel()


def _boundary_load(b: np.ndarray, problem: ForwardProblem) -> None:
    """Add the flux line integrals over the horizontal edges to the load vector."""
    d = problem.domain
    n = problem.mesh_n
    hx = d.width / n
    xs = d.x0 + np.arange(n + 1) * hx
    left_nodes = np.arange(n)
    for edge_y, base in ((d.y0, 0), (d.y1, n * (n + 1))):
        for sign in (-1.0, 1.0):
            xg = xs[:-1] + hx / 2 + sign * hx / (2 * np.sqrt(3.0))
            hv = _eval_coefficient(problem.h, xg, np.full_like(xg, edge_y))
            w_left = (xs[1:] - xg) / hx
            np.add.at(b, base + left_nodes, (hx / 2) * hv * w_left)
            np.add.at(b, base + left_nodes + 1, (hx / 2) * hv * (1 - w_left))


def solve_forward(problem: ForwardProblem) -> TemperatureSolution:
    """Galerkin solution of the weak conduction problem on an n-by-n Q1 mesh."""
    d = problem.domain
    n = problem.mesh_n
    hx = d.width / n
    hy = d.height / n
    xc, yc = _element_centroids(d, n)
    k_e = _eval_coefficient(problem.k, xc, yc)
    c_e = _eval_coefficient(problem.c, xc, yc)
    if not np.all(np.isfinite(k_e)) or k_e.min() <= 0.0:
        raise ValueError("conductivity must be finite and strictly positive")
    if not np.all(np.isfinite(c_e)) or c_e.min() < 0.0:
        raise ValueError("reaction coefficient must be finite and nonnegative")

    S0, M0 = _reference_matrices(hx, hy)
    conn = _connectivity(n)
    Ke = k_e[:, None, None] * S0 + c_e[:, None, None] * M0
    rows = np.repeat(conn, 4, axis=1).ravel()
    cols = np.tile(conn, (1, 4)).ravel()
    n_nodes = (n + 1) ** 2
    A = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(n_nodes, n_nodes)).tocsr()

    b = np.zeros(n_nodes)
    if not _is_zero(problem.f):
        w = hx * hy / 4.0
        for xi, eta in _QP:
            xq = xc + xi * hx / 2.0
            yq = yc + eta * hy / 2.0
            fq = _eval_coefficient(problem.f, xq, yq)
            np.add.at(b, conn, w * fq[:, None] * _shape(xi, eta))
    if not _is_zero(problem.h):
        _boundary_load(b, problem)

    side = n + 1
    j = np.arange(side)
    left = j * side
    right = j * side + n
    ys = d.y0 + j * hy
    g_left = _eval_coefficient(problem.g_left, ys, ys) if callable(problem.g_left) \
        else np.full(side, float(problem.g_left))
    g_right = _eval_coefficient(problem.g_right, ys, ys) if callable(problem.g_right) \
        else np.full(side, float(problem.g_right))
    fixed = np.concatenate([left, right])
    fixed_vals = np.concatenate([g_left, g_right])

    free_mask = np.ones(n_nodes, dtype=bool)
    free_mask[fixed] = False
    free = np.flatnonzero(free_mask)
    K_ff = A[free][:, free].tocsc()
    rhs = b[free] - A[free][:, fixed] @ fixed_vals
    u_free = spla.spsolve(K_ff, rhs)
    if not np.all(np.isfinite(u_free)):
        raise SolverError("stiffness matrix is singular or indefinite")
    residual = np.linalg.norm(K_ff @ u_free - rhs)
    scale = max(np.linalg.norm(rhs), np.linalg.norm(K_ff @ u_free), 1e-300)
    if residual > 1e-10 * scale:
        raise SolverError(f"linear solve residual {residual / scale:.3e} exceeds 1e-10")

    node_values = np.empty(n_nodes)
    node_values[fixed] = fixed_vals
    node_values[free] = u_free
    return TemperatureSolution(domain=d, n=n, node_values=node_values)


def _as_value_grad(obj):
    if isinstance(obj, TemperatureSolution):
        return obj.value_grad
    vg = getattr(obj, "value_grad", None)
    if vg is not None:
        return vg
    if callable(obj):
        return obj
    raise TypeError(f"cannot interpret {type(obj).__name__} as a value/gradient function")


def perturbed(base, direction, t: float):
    """value_grad callable for base + t * direction."""
    bg = _as_value_grad(base)
    dg = _as_value_grad(direction)

    def vg(x, y):
        b0, b1, b2 = bg(x, y)
        d0, d1, d2 = dg(x, y)
        return b0 + t * d0, b1 + t * d1, b2 + t * d2

    return vg


def quadrature(domain: Domain, n: int):
    """All 2x2 Gauss points of the n-by-n element mesh: (points (m, 2), weights (m,))."""
    hx = domain.width / n
    hy = domain.height / n
    xc, yc = _element_centroids(domain, n)
    xq = (xc[:, None] + _QP[None, :, 0] * hx / 2.0).ravel()
    yq = (yc[:, None] + _QP[None, :, 1] * hy / 2.0).ravel()
    w = np.full(xq.size, hx * hy / 4.0)
    return np.column_stack([xq, yq]), w


def _functional_terms(vg_u, k, c, f, h, domain: Domain, n: int):
    """Quadrature values shared by the residual and energy functionals."""
    pts, w = quadrature(domain, n)
    xc, yc = _element_centroids(domain, n)
    k_e = np.repeat(_eval_coefficient(k, xc, yc), 4)
    c_e = np.repeat(_eval_coefficient(c, xc, yc), 4)
    u, ux, uy = vg_u(pts[:, 0], pts[:, 1])
    f_q = None if _is_zero(f) else _eval_coefficient(f, pts[:, 0], pts[:, 1])
    return pts, w, k_e, c_e, u, ux, uy, f_q


def _edge_integral(h, vg, domain: Domain, n: int) -> float:
    """Integral of h * v over the horizontal (flux) edges by 2-point Gauss."""
    if _is_zero(h):
        return 0.0
    hx = domain.width / n
    xs = domain.x0 + np.arange(n) * hx + hx / 2.0
    total = 0.0
    for edge_y in (domain.y0, domain.y1):
        for sign in (-1.0, 1.0):
            xg = xs + sign * hx / (2 * np.sqrt(3.0))
            yg = np.full_like(xg, edge_y)
            hv = _eval_coefficient(h, xg, yg)
            v = vg(xg, yg)[0]
            total += np.sum((hx / 2.0) * hv * v)
    return total


def variational_residual(sol: TemperatureSolution, k, c, f, h, v) -> float:
    """Weak-form residual F(u, v) by elementwise quadrature.

    For the Galerkin solution and v in the discrete test space this vanishes to
    solver precision; for other v it measures discretization error.
    """
    vg_v = _as_value_grad(v)
    pts, w, k_e, c_e, u, ux, uy, f_q = _functional_terms(
        sol.value_grad, k, c, f, h, sol.domain, sol.n
    )
    vv, vx, vy = vg_v(pts[:, 0], pts[:, 1])
    total = np.sum(w * (k_e * (ux * vx + uy * vy) + c_e * u * vv))
    if f_q is not None:
        total -= np.sum(w * f_q * vv)
    total -= _edge_integral(h, vg_v, sol.domain, sol.n)
    return float(total)


def energy(candidate, k, c, f, h, *, domain: Domain | None = None, mesh_n: int | None = None) -> float:
    """Energy functional J(v) = 0.5 * int(k |grad v|^2 + c v^2) - int(f v) - edge flux term.

    `candidate` may be a TemperatureSolution (integrated on its own mesh) or a
    value_grad-like object, in which case `mesh_n` (and optionally `domain`)
    must be given.
    """
    if isinstance(candidate, TemperatureSolution):
        domain = candidate.domain
        mesh_n = candidate.n
    elif mesh_n is None:
        raise ValueError("mesh_n is required when the candidate is not a mesh solution")
    domain = domain or Domain()
    vg = _as_value_grad(candidate)
    pts, w, k_e, c_e, u, ux, uy, f_q = _functional_terms(vg, k, c, f, h, domain, mesh_n)
    total = np.sum(w * (0.5 * (k_e * (ux * ux + uy * uy) + c_e * u * u)))
    if f_q is not None:
        total -= np.sum(w * f_q * u)
    total -= _edge_integral(h, vg, domain, mesh_n)
    return float(total)


def l2_error(sol: TemperatureSolution, exact) -> float:
    """L2 norm of (sol - exact) by the mesh quadrature; exact is a callable u(x, y)."""
    pts, w = quadrature(sol.domain, sol.n)
    u, _, _ = sol.value_grad(pts[:, 0], pts[:, 1])
    diff = u - _eval_coefficient(exact, pts[:, 0], pts[:, 1])
    return float(np.sqrt(np.sum(w * diff * diff)))

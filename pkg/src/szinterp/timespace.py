"""Space-time tensor interpolation and the averaged Taylor polynomial.

Space-time functions are handled as samples on a product of two quadrature
grids, one on the time mesh and one on the spatial mesh. Every operator is
then a pair of sparse matrices acting on the two axes of the sample array:

* ``W`` maps samples to node coefficients (the weight pairings),
* ``B`` maps node coefficients back to samples (basis evaluation).

With ``V`` the sample array (time x space), the time operator gives
``Wt @ V``, the spatial operator ``V @ Wx.T`` and the tensor operator
``Wt @ V @ Wx.T``.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial

import numpy as np
import scipy.sparse as sp
from numpy.polynomial import Polynomial
from sklearn.base import BaseEstimator

from .fespace import LagrangeSpace
from .mesh import SimplicialMesh
from .polyref import bernstein_grad_matrix, bernstein_matrix
from .quadrature import gauss_interval, simplex_rule
from .sz_ops import ScottZhangInterpolator, WeightSystem
from .validation import check_choice, check_degree, check_is_fitted, check_mesh


@dataclass(frozen=True)
class SampleGrid:
    """Quadrature points of every simplex of ``mesh``, element-major."""

    mesh: SimplicialMesh
    lam: np.ndarray
    points: np.ndarray
    weights: np.ndarray

    @classmethod
    def build(cls, mesh: SimplicialMesh, order: int) -> "SampleGrid":
        lam, w = simplex_rule(mesh.d, order)
        pts = mesh.quad_points(lam).reshape(-1, mesh.d)
        wts = (np.outer(mesh.volumes, w) * factorial(mesh.d)).ravel()
        return cls(mesh, lam, pts, wts)

    @property
    def nq(self) -> int:
        return len(self.lam)

    def __len__(self) -> int:
        return len(self.points)


def weight_matrix(weights: WeightSystem, grid: SampleGrid, active=None) -> sp.csr_matrix:
    """Sparse ``(n_nodes, n_points)`` matrix of the pairings ``<., psi_i>``."""
    if grid.mesh is not weights.space.mesh:
        raise ValueError("grid and weights must share a mesh")
    keep = np.ones(len(weights.node), bool) if active is None else active[weights.node]
    node, elem, coef = weights.node[keep], weights.elem[keep], weights.coef[keep]
    B = bernstein_matrix(grid.mesh.d, weights.degree, grid.lam)
    nq = grid.nq
    cols = elem[:, None] * nq + np.arange(nq)[None, :]
    vals = (coef @ B.T) * grid.weights[cols]
    rows = np.repeat(node, nq)
    return sp.csr_matrix((vals.ravel(), (rows, cols.ravel())), shape=(weights.space.n_nodes, len(grid)))


def basis_matrix(space: LagrangeSpace, grid: SampleGrid) -> sp.csr_matrix:
    """Sparse ``(n_points, n_nodes)`` evaluation matrix of the Bernstein basis."""
    B = bernstein_matrix(space.mesh.d, space.degree, grid.lam)
    nt, N = space.local_to_global.shape
    nq = grid.nq
    rows = np.repeat(np.arange(nt * nq), N)
    cols = np.repeat(space.local_to_global, nq, axis=0).ravel()
    vals = np.tile(B.ravel(), nt)
    return sp.csr_matrix((vals, (rows, cols)), shape=(len(grid), space.n_nodes))


def grad_basis_matrices(space: LagrangeSpace, grid: SampleGrid) -> list[sp.csr_matrix]:
    """One ``(n_points, n_nodes)`` matrix per spatial derivative direction."""
    mesh = space.mesh
    G = bernstein_grad_matrix(mesh.d, space.degree, grid.lam)  # (d+1, nq, N)
    nt, N = space.local_to_global.shape
    nq = grid.nq
    rows = np.repeat(np.arange(nt * nq), N)
    cols = np.repeat(space.local_to_global, nq, axis=0).ravel()
    out = []
    for c in range(mesh.d):
        vals = np.einsum("jqn,tj->tqn", G, mesh.grad_lambda[:, :, c])
        out.append(sp.csr_matrix((vals.ravel(), (rows, cols)), shape=(len(grid), space.n_nodes)))
    return out


class TimeMesh:
    """Partition of ``J = (0, T)`` with the time interpolation weights.

    ``weights="corrected"`` gives the projection onto all continuous
    piecewise polynomials of degree ``degree`` (no trace constraint at the
    end points); ``"raw"`` uses uncorrected weights at every node.
    """

    def __init__(self, mesh: SimplicialMesh, degree: int, weights: str = "corrected"):
        if mesh.d != 1:
            raise ValueError("a time mesh must be one-dimensional")
        check_choice(weights, ("corrected", "raw"), "weights")
        self.mesh = mesh
        self.degree = check_degree(degree, "time degree")
        self.interp = ScottZhangInterpolator(degree, weights).fit(mesh)
        self.space = self.interp.space_

    @property
    def h(self) -> np.ndarray:
        return self.mesh.diameters

    @property
    def patch_measures(self) -> np.ndarray:
        """``|omega_K|`` for every interval ``K``."""
        m = self.mesh
        return np.array([m.volumes[m.element_patch(t)].sum() for t in range(m.n_simplices)])

    @property
    def shape_ratio(self) -> float:
        return float(np.max(self.patch_measures / self.h))


@dataclass(frozen=True)
class TensorFunction:
    """Samples of a space-time function on a product grid, shape ``(n_time, n_space)``."""

    time_grid: SampleGrid
    space_grid: SampleGrid
    values: np.ndarray

    @classmethod
    def sample(cls, v, time_grid: SampleGrid, space_grid: SampleGrid) -> "TensorFunction":
        """``v(t, x)`` is called with ``t`` of shape (n,) and ``x`` of shape (n, d)."""
        nt, nx = len(time_grid), len(space_grid)
        t = np.repeat(time_grid.points[:, 0], nx)
        x = np.tile(space_grid.points, (nt, 1))
        vals = np.asarray(v(t, x), dtype=float)
        return cls(time_grid, space_grid, np.broadcast_to(vals, (nt * nx,)).reshape(nt, nx))

    def l2_norm(self) -> float:
        """``L2(J; L2)`` norm."""
        return float(np.sqrt(self.time_grid.weights @ (self.values**2) @ self.space_grid.weights))

    def __sub__(self, other: "TensorFunction") -> "TensorFunction":
        return TensorFunction(self.time_grid, self.space_grid, self.values - other.values)


class TensorInterpolator(BaseEstimator):
    """``Pi_t`` in time (all nodes), zero-trace ``Pi_0`` in space, and their composition.

    ``fit((time_mesh, space_mesh))`` builds the sample grids and the four
    sparse matrices ``Wt_, Bt_, Wx_, Bx_``.
    """

    def __init__(self, time_degree=1, space_degree=1, time_weights="corrected", space_quad_order=None):
        self.time_degree = time_degree
        self.space_degree = space_degree
        self.time_weights = time_weights
        self.space_quad_order = space_quad_order

    def fit(self, meshes, y=None):
        time_mesh, space_mesh = meshes
        check_mesh(space_mesh)
        kt = check_degree(self.time_degree, "time_degree")
        kx = check_degree(self.space_degree, "space_degree")
        self.time_mesh_ = TimeMesh(time_mesh, kt, self.time_weights)
        self.space_interp_ = ScottZhangInterpolator(kx, "zero").fit(space_mesh)
        # 2kt+4 Gauss points per time interval
        self.time_grid_ = SampleGrid.build(time_mesh, 2 * (2 * kt + 4) - 1)
        order = 6 * kx + 2 if self.space_quad_order is None else self.space_quad_order
        self.space_grid_ = SampleGrid.build(space_mesh, order)
        tm, sx = self.time_mesh_, self.space_interp_
        self.Wt_ = weight_matrix(tm.interp.weights_, self.time_grid_)
        self.Bt_ = basis_matrix(tm.space, self.time_grid_)
        self.Wx_ = weight_matrix(sx.weights_, self.space_grid_, active=sx.active_)
        self.Bx_ = basis_matrix(sx.space_, self.space_grid_)
        self.Gx_ = grad_basis_matrices(sx.space_, self.space_grid_)
        return self

    def sample(self, v) -> TensorFunction:
        check_is_fitted(self)
        return TensorFunction.sample(v, self.time_grid_, self.space_grid_)

    def _values(self, v) -> np.ndarray:
        if isinstance(v, TensorFunction):
            return v.values
        if callable(v):
            return self.sample(v).values
        return np.asarray(v, dtype=float)

    # coefficient forms -------------------------------------------------------
    def time_coefficients(self, v) -> np.ndarray:
        """``Pi_t v``: time node coefficients for every spatial sample, (n_t_nodes, n_space)."""
        return self.Wt_ @ self._values(v)

    def space_coefficients(self, v) -> np.ndarray:
        """``Pi_x v``: spatial node coefficients for every time sample, (n_time, n_x_nodes)."""
        return (self.Wx_ @ self._values(v).T).T

    def transform(self, v) -> np.ndarray:
        """``Pi_tensor v`` as coefficients over (time nodes) x (spatial nodes)."""
        check_is_fitted(self)
        return (self.Wx_ @ (self.Wt_ @ self._values(v)).T).T

    # sample forms --------------------------------------------------------------
    def apply_t(self, v) -> TensorFunction:
        return self._wrap(self.Bt_ @ self.time_coefficients(v))

    def apply_x(self, v) -> TensorFunction:
        return self._wrap((self.Bx_ @ self.space_coefficients(v).T).T)

    def to_samples(self, coeffs) -> TensorFunction:
        return self._wrap((self.Bx_ @ (self.Bt_ @ coeffs).T).T)

    def _wrap(self, values) -> TensorFunction:
        return TensorFunction(self.time_grid_, self.space_grid_, np.asarray(values))

    def errors(self, v, grad_x=None) -> dict[str, float]:
        """``L2(J;L2)`` and, given the spatial gradient of ``v``, ``L2(J;H1)`` errors of ``Pi_tensor v``."""
        check_is_fitted(self)
        C = self.transform(v)
        out = {"L2L2": (self.sample(v) - self.to_samples(C)).l2_norm()}
        if grad_x is not None:
            Ct = self.Bt_ @ C
            sq = np.zeros((len(self.time_grid_), len(self.space_grid_)))
            for c, G in enumerate(self.Gx_):
                exact = self.sample(lambda t, x, c=c: np.asarray(grad_x(t, x)).reshape(len(t), -1)[:, c]).values
                sq += (exact - (G @ Ct.T).T) ** 2
            out["L2H1"] = float(np.sqrt(self.time_grid_.weights @ sq @ self.space_grid_.weights))
        return out


def apply_Pi_t(v, op: TensorInterpolator) -> np.ndarray:
    return op.time_coefficients(v)


def apply_Pi_x(v, op: TensorInterpolator) -> np.ndarray:
    return op.space_coefficients(v)


def apply_Pi_tensor(v, op: TensorInterpolator) -> np.ndarray:
    return op.transform(v)


# ---------------------------------------------------------------------------
# averaged Taylor polynomial


def _bump_log_derivs(u: np.ndarray, n: int) -> list[np.ndarray]:
    """Derivatives of ``g(u) = -1/(1-u^2)`` of orders 1..n."""
    return [
        -0.5 * (factorial(m) / (1 - u) ** (m + 1) + (-1) ** m * factorial(m) / (1 + u) ** (m + 1))
        for m in range(1, n + 1)
    ]


def bump_derivatives(u: np.ndarray, n: int) -> np.ndarray:
    """``exp(-1/(1-u^2))`` and its first ``n`` derivatives on ``|u| < 1``, shape (n+1, len(u))."""
    u = np.asarray(u, dtype=float)
    out = np.zeros((n + 1,) + u.shape)
    inside = np.abs(u) < 1
    ui = u[inside]
    g = _bump_log_derivs(ui, n)
    eta = [np.exp(-1.0 / (1.0 - ui**2))]
    for m in range(n):
        # (e^g)^(m+1) = sum_j C(m, j) g^(j+1) (e^g)^(m-j)
        eta.append(sum(comb(m, j) * g[j] * eta[m - j] for j in range(m + 1)))
    for m in range(n + 1):
        out[m][inside] = eta[m]
    return out


def composite_gauss(a: float, b: float, panels: int, points: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = gauss_interval(points)
    edges = np.linspace(a, b, panels + 1)
    h = np.diff(edges)
    return (edges[:-1, None] + h[:, None] * x[None, :]).ravel(), (h[:, None] * w[None, :]).ravel()


class AvgTaylor(BaseEstimator):
    """Averaged Taylor polynomial of order ``order`` over an interval.

    The averaging density is the standard mollifier ``exp(-1/(1-u^2))``
    centred in the interval, with support a fraction ``support_ratio`` of its
    length, normalized to unit mass. Derivatives of the input are never
    formed; they are moved onto the density by integration by parts.
    """

    def __init__(self, order=1, support_ratio=0.5, panels=32, points=40):
        self.order = order
        self.support_ratio = support_ratio
        self.panels = panels
        self.points = points

    def fit(self, interval, y=None):
        a, b = map(float, interval)
        if not b > a:
            raise ValueError("interval must have positive length")
        if not 0 < self.support_ratio <= 1:
            raise ValueError("support_ratio must lie in (0, 1]")
        if int(self.order) < 0:
            raise ValueError("order must be non-negative")
        self.interval_ = (a, b)
        self.center_ = 0.5 * (a + b)
        self.radius_ = 0.5 * self.support_ratio * (b - a)
        u, wu = composite_gauss(-1.0, 1.0, int(self.panels), int(self.points))
        self.mass_ = float(wu @ bump_derivatives(u, 0)[0])
        self.nodes_ = self.center_ + self.radius_ * u
        self.qweights_ = self.radius_ * wu
        # eta^(q)(sigma) = bump^(q)(u) / (mass * r^(q+1))
        d = bump_derivatives(u, int(self.order))
        self.density_derivs_ = d / (self.mass_ * self.radius_ ** (np.arange(int(self.order) + 1)[:, None] + 1))
        return self

    def density(self, sigma) -> np.ndarray:
        check_is_fitted(self)
        sigma = np.asarray(sigma, dtype=float)
        u = (np.atleast_1d(sigma) - self.center_) / self.radius_
        return (bump_derivatives(u, 0)[0] / (self.mass_ * self.radius_)).reshape(sigma.shape)

    def transform(self, v) -> Polynomial:
        """``T^s v`` as a polynomial in ``tau`` (shifted to the interval centre)."""
        check_is_fitted(self)
        s = int(self.order)
        c = self.center_
        vals = np.asarray(v(self.nodes_), dtype=float) * self.qweights_
        rel = self.nodes_ - c
        # mom[q, j] = int v(sigma) (sigma-c)^j eta^(q)(sigma) dsigma
        powers = rel[None, :] ** np.arange(s + 1)[:, None]
        mom = self.density_derivs_ @ (vals[:, None] * powers.T)
        coef = np.zeros(s + 1)
        for ell in range(s + 1):
            for q in range(ell + 1):
                fac = (-1) ** q * comb(ell, q) / factorial(q)
                # (tau - sigma)^q = sum_p C(q, p) (tau-c)^p (-(sigma-c))^(q-p)
                for p in range(q + 1):
                    coef[p] += fac * comb(q, p) * (-1) ** (q - p) * mom[q, q - p]
        return Polynomial(coef, domain=[c - 1, c + 1], window=[-1, 1])


def taylor_avg(v, t: AvgTaylor) -> Polynomial:
    return t.transform(v)

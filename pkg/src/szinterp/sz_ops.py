"""Scott-Zhang type projections built from a biorthogonal dual basis.

Each node ``i`` of the degree-``k`` Lagrange space gets a weight function
``psi_i`` of degree ``3k``, supported on the simplices containing ``i``, with
``<b_j, psi_i> = delta_ij``. Weights are stored as a flat list of
``(node, simplex, Bernstein block)`` triples, so applying an operator reduces
to per-simplex moments of the input followed by scatter/gather.

Three node weightings are available:

* ``zero``: interior nodes with raw weights; images have zero trace.
* ``corrected``: all nodes, boundary weights replaced by zero-trace ones.
* ``raw``: all nodes with raw weights; preserves the integral.
"""
from __future__ import annotations

from math import factorial

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator

from .dualbasis import DualBasisTable, solve_dual_basis
from .fespace import FEFunction, LagrangeSpace
from .functional import bernstein_moments
from .mesh import SimplicialMesh
from .polyref import (
    bernstein_matrix,
    dim_poly,
    product_coeffs,
    raise_matrix,
    ref_mass_matrix,
    ref_triple,
    ref_volume,
)
from .validation import (
    check_choice,
    check_degree,
    check_density_only,
    check_functional,
    check_is_fitted,
    check_mesh,
)


class BoundaryCorrectionError(RuntimeError):
    """Local Gram system of the boundary correction is singular."""


class WeightSystem:
    """Piecewise degree-``3k`` weights stored as ``(node, elem, coeffs)`` blocks."""

    def __init__(self, space: LagrangeSpace, node, elem, coef):
        self.space = space
        self.node = np.asarray(node, dtype=np.int64)
        self.elem = np.asarray(elem, dtype=np.int64)
        self.coef = np.asarray(coef, dtype=float)
        for a in (self.node, self.elem, self.coef):
            a.flags.writeable = False

    @property
    def degree(self) -> int:
        return 3 * self.space.degree

    def node_moments(self, M: np.ndarray) -> np.ndarray:
        """``<xi, psi_i>`` for every node, from per-simplex degree-3k moments ``M``."""
        vals = np.einsum("bg,bg->b", self.coef, M[self.elem])
        return np.bincount(self.node, weights=vals, minlength=self.space.n_nodes)

    def combine(self, c: np.ndarray) -> np.ndarray:
        """Per-simplex coefficients of ``sum_i c_i psi_i``, shape (nt, N_3k)."""
        out = np.zeros((self.space.mesh.n_simplices, self.coef.shape[1]))
        np.add.at(out, self.elem, c[self.node][:, None] * self.coef)
        return out

    def blocks(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Simplices and coefficient blocks of ``psi_i``."""
        sel = self.node == i
        return self.elem[sel], self.coef[sel]


def gram_with_basis(weights: WeightSystem) -> np.ndarray:
    """Dense matrix ``G[i, j] = <psi_i, b_j>`` over all nodes, integrated exactly."""
    space = weights.space
    mesh = space.mesh
    k = space.degree
    Mref = ref_mass_matrix(mesh.d, 3 * k, k)
    vals = (weights.coef @ Mref) * (mesh.volumes * factorial(mesh.d))[weights.elem][:, None]
    G = np.zeros((space.n_nodes, space.n_nodes))
    np.add.at(G, (weights.node[:, None], space.local_to_global[weights.elem]), vals)
    return G


def trace_values(weights: WeightSystem, points_per_facet: int = 5) -> np.ndarray:
    """Values of every weight block at sample points of the boundary facets of its simplex."""
    mesh = weights.space.mesh
    d = mesh.d
    out = []
    for j in range(d + 1):
        on = mesh._boundary_local[weights.elem, j]
        if not on.any():
            continue
        # sample points with lambda_j = 0
        rng = np.random.default_rng(j)
        lam = rng.dirichlet(np.ones(d), points_per_facet) if d > 1 else np.ones((1, 1))
        lam = np.insert(lam, j, 0.0, axis=1)
        B = bernstein_matrix(d, weights.degree, lam)
        out.append((weights.coef[on] @ B.T).ravel())
    return np.concatenate(out) if out else np.zeros(0)


def assemble_psi(space: LagrangeSpace, table: DualBasisTable | None = None) -> WeightSystem:
    """Raw weights ``psi_i|_T = (|T_ref|/|omega_i|) p_alpha(i,T)``."""
    mesh = space.mesh
    k = space.degree
    if table is None:
        table = solve_dual_basis(mesh.d, k)
    if (table.d, table.k) != (mesh.d, k):
        raise ValueError(f"dual table is for (d, k) = ({table.d}, {table.k}), space needs ({mesh.d}, {k})")
    nt, N = space.local_to_global.shape
    node = space.local_to_global.ravel()
    elem = np.repeat(np.arange(nt), N)
    local = np.tile(np.arange(N), nt)
    scale = ref_volume(mesh.d) / space.support_measure
    coef = scale[node][:, None] * table.p[local]
    return WeightSystem(space, node, elem, coef)


def cutoff_coeffs(mesh: SimplicialMesh) -> np.ndarray:
    """Per-simplex linear coefficients of the sum of interior vertex hats."""
    return (~mesh.boundary_vertices[mesh.simplices]).astype(float)


def boundary_correction(space: LagrangeSpace, raw: WeightSystem) -> WeightSystem:
    """Replace boundary-node weights by zero-trace weights ``b_i eta rho_i``.

    ``rho_i`` is the continuous degree-``k`` function on the support of node
    ``i`` for which ``<b_i eta rho_i, b_l> = <psi_i, b_l>`` for all nodes ``l``
    of that support. The result is raised from degree ``2k+1`` to ``3k``.
    """
    mesh = space.mesh
    d, k = mesh.d, space.degree
    Nk = dim_poly(d, k)
    eta = cutoff_coeffs(mesh)
    T3 = ref_triple(d, k + 1, k, k)
    R = raise_matrix(d, 2 * k + 1, 3 * k)
    vol = mesh.volumes * factorial(d)
    eye = np.eye(Nk)

    keep = ~space.boundary_mask[raw.node]
    nodes, elems, coefs = [raw.node[keep]], [raw.elem[keep]], [raw.coef[keep]]
    for i in space.boundary_nodes:
        els, locs = space.node_support(i)
        L = space.nodes_in(els)
        pos = {int(g): p for p, g in enumerate(L)}
        G = np.zeros((len(L), len(L)))
        weights = []
        for t, a in zip(els, locs):
            w = product_coeffs(d, k, 1, eye[a], eta[t])
            weights.append(w)
            idx = [pos[int(g)] for g in space.local_to_global[t]]
            G[np.ix_(idx, idx)] += vol[t] * np.einsum("g,glm->lm", w, T3)
        rhs = np.zeros(len(L))
        rhs[pos[int(i)]] = 1.0
        try:
            cf = scipy.linalg.cho_factor(G)
        except np.linalg.LinAlgError as exc:
            raise BoundaryCorrectionError(
                f"singular local Gram for boundary node {i} at {space.node_coords[i]}: "
                "some simplex of its support has all vertices on the boundary"
            ) from exc
        rho = scipy.linalg.cho_solve(cf, rhs)
        for t, w in zip(els, weights):
            rho_t = rho[[pos[int(g)] for g in space.local_to_global[t]]]
            nodes.append([i])
            elems.append([t])
            coefs.append((R @ product_coeffs(d, k + 1, k, w, rho_t))[None, :])
    return WeightSystem(space, np.concatenate(nodes), np.concatenate(elems), np.vstack(coefs))


def node_moments_bernstein(xi, space: LagrangeSpace, quad_order: int | None = None) -> np.ndarray:
    """``<xi, b_i>`` for every node of ``space``."""
    M = bernstein_moments(xi, space.mesh, space.degree, quad_order)
    return np.bincount(space.local_to_global.ravel(), weights=M.ravel(), minlength=space.n_nodes)


BOUNDARY_MODES = ("zero", "corrected", "raw")


class ScottZhangInterpolator(BaseEstimator):
    """Quasi-interpolation onto continuous degree-``degree`` Lagrange functions.

    Parameters
    ----------
    degree : polynomial degree ``k`` in {1, 2, 3}
    boundary : ``"zero"`` for the zero-trace operator, ``"corrected"`` for
        the boundary-corrected projection onto the full space, ``"raw"`` for
        the integral-preserving variant using raw weights at every node.
    quad_order : quadrature order for callable inputs (default ``6k + 2``).

    ``fit(mesh)`` assembles the weights; ``transform(xi)`` returns the image
    as an :class:`FEFunction` of degree ``k``; ``adjoint(xi)`` returns the
    image of the L2-adjoint as an :class:`FEFunction` of degree ``3k``.
    """

    def __init__(self, degree=1, boundary="zero", quad_order=None):
        self.degree = degree
        self.boundary = boundary
        self.quad_order = quad_order

    def fit(self, mesh, y=None):
        mesh = check_mesh(mesh)
        k = check_degree(self.degree)
        check_choice(self.boundary, BOUNDARY_MODES, "boundary")
        self.mesh_ = mesh
        self.space_ = LagrangeSpace(mesh, k)
        self.table_ = solve_dual_basis(mesh.d, k)
        self.raw_weights_ = assemble_psi(self.space_, self.table_)
        if self.boundary == "corrected":
            self.weights_ = boundary_correction(self.space_, self.raw_weights_)
        else:
            self.weights_ = self.raw_weights_
        self.active_ = ~self.space_.boundary_mask if self.boundary == "zero" else np.ones(self.space_.n_nodes, bool)
        self._adjoint_space = None
        return self

    @property
    def adjoint_space_(self) -> LagrangeSpace:
        check_is_fitted(self)
        if self._adjoint_space is None:
            self._adjoint_space = LagrangeSpace(self.mesh_, 3 * self.space_.degree)
        return self._adjoint_space

    def _order(self):
        return self.quad_order

    def coefficients(self, xi) -> np.ndarray:
        check_is_fitted(self)
        xi = check_functional(xi)
        M = bernstein_moments(xi, self.mesh_, 3 * self.space_.degree, self._order())
        c = self.weights_.node_moments(M)
        c[~self.active_] = 0.0
        return c

    def transform(self, xi) -> FEFunction:
        check_is_fitted(self)
        return FEFunction(self.space_, self.coefficients(xi))

    def adjoint(self, xi) -> FEFunction:
        check_is_fitted(self)
        xi = check_density_only(xi) if self.boundary != "zero" else check_functional(xi)
        ell = node_moments_bernstein(xi, self.space_, self._order())
        ell[~self.active_] = 0.0
        return FEFunction.from_local(self.adjoint_space_, self.weights_.combine(ell))

    def weight_function(self, i: int) -> FEFunction:
        """``psi_i`` (or its corrected version) as a degree-``3k`` FE function."""
        check_is_fitted(self)
        e = np.zeros(self.space_.n_nodes)
        e[i] = 1.0
        return FEFunction.from_local(self.adjoint_space_, self.weights_.combine(e))


def apply_Pi0(xi, mesh: SimplicialMesh, k: int) -> FEFunction:
    return ScottZhangInterpolator(k, "zero").fit(mesh).transform(xi)


def apply_Pi0_star(xi, mesh: SimplicialMesh, k: int) -> FEFunction:
    return ScottZhangInterpolator(k, "zero").fit(mesh).adjoint(xi)


def apply_Pi(xi, mesh: SimplicialMesh, k: int) -> FEFunction:
    return ScottZhangInterpolator(k, "corrected").fit(mesh).transform(xi)


def apply_Pi_star(v, mesh: SimplicialMesh, k: int) -> FEFunction:
    return ScottZhangInterpolator(k, "corrected").fit(mesh).adjoint(v)


def apply_P_raw(xi, mesh: SimplicialMesh, k: int) -> FEFunction:
    return ScottZhangInterpolator(k, "raw").fit(mesh).transform(xi)

"""Comparison operators: the L2 projection and a self-adjoint Clement-type operator."""
from __future__ import annotations

from math import factorial

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from sklearn.base import BaseEstimator

from .assembly import mass_matrix
from .fespace import FEFunction, LagrangeSpace
from .mesh import SimplicialMesh
from .polyref import dim_poly, product_coeffs, ref_triple
from .sz_ops import node_moments_bernstein
from .validation import check_degree, check_functional, check_is_fitted, check_mesh


class L2Projector(BaseEstimator):
    """L2-orthogonal projection onto zero-trace Lagrange functions of degree ``degree``."""

    def __init__(self, degree=1, quad_order=None):
        self.degree = degree
        self.quad_order = quad_order

    def fit(self, mesh, y=None):
        mesh = check_mesh(mesh)
        k = check_degree(self.degree)
        self.space_ = LagrangeSpace(mesh, k)
        inner = self.space_.interior_nodes
        if len(inner) == 0:
            raise ValueError("mesh has no interior nodes for this degree")
        self.mass_ = mass_matrix(self.space_)
        self.solver_ = spla.splu(self.mass_[inner][:, inner].tocsc())
        return self

    def transform(self, xi) -> FEFunction:
        check_is_fitted(self)
        xi = check_functional(xi)
        ell = node_moments_bernstein(xi, self.space_, self.quad_order)
        c = np.zeros(self.space_.n_nodes)
        inner = self.space_.interior_nodes
        c[inner] = self.solver_.solve(ell[inner])
        return FEFunction(self.space_, c)


def apply_Pi2(v, mesh: SimplicialMesh, k: int) -> FEFunction:
    return L2Projector(k).fit(mesh).transform(v)


def clement_local_nodes(space_low: LagrangeSpace | None, mesh: SimplicialMesh, j: int) -> np.ndarray:
    """Degree-(k-1) nodes spanning the local space of vertex ``j``.

    Nodes on a boundary facet through ``j`` are dropped, so that the hat
    function of ``j`` times any local function has zero trace. For ``k = 1``
    the local space is the constants (index ``0``) when ``j`` is interior and
    empty otherwise.
    """
    if space_low is None:
        return np.array([], dtype=np.int64) if mesh.boundary_vertices[j] else np.array([0])
    cand = space_low.nodes_in(mesh.vertex_patch(j))
    facets = [set(f) for f in mesh.boundary_facets if j in f]
    keep = [g for g in cand if not any(set(space_low.node_vertex_set(g)) <= f for f in facets)]
    return np.array(keep, dtype=np.int64)


class ClementInterpolator(BaseEstimator):
    """Self-adjoint local operator ``C = sum_j phi_j C_j`` onto zero-trace degree-``k`` functions.

    ``C_j`` is the ``phi_j``-weighted L2 projection onto the local
    degree-``(k-1)`` space of vertex ``j``. The operator is assembled as the
    symmetric matrix ``K`` with ``coeffs(C xi) = K @ <xi, b_i>``.
    """

    def __init__(self, degree=1, quad_order=None):
        self.degree = degree
        self.quad_order = quad_order

    def fit(self, mesh, y=None):
        mesh = check_mesh(mesh)
        k = check_degree(self.degree)
        d = mesh.d
        space = LagrangeSpace(mesh, k)
        low = LagrangeSpace(mesh, k - 1) if k > 1 else None
        Nlow = dim_poly(d, k - 1)
        T3 = ref_triple(d, 1, k - 1, k - 1)
        vol = mesh.volumes * factorial(d)
        eye1, eyel = np.eye(d + 1), np.eye(Nlow)

        rows, cols, vals = [], [], []
        for j in range(mesh.n_vertices):
            loc_nodes = clement_local_nodes(low, mesh, j)
            if len(loc_nodes) == 0:
                continue
            pos = {int(g): p for p, g in enumerate(loc_nodes)}
            G = np.zeros((len(loc_nodes), len(loc_nodes)))
            E = {}
            for t in mesh.vertex_patch(j):
                lj = int(np.nonzero(mesh.simplices[t] == j)[0][0])
                glob = low.local_to_global[t] if low is not None else np.zeros(1, dtype=np.int64)
                idx = np.array([pos.get(int(g), -1) for g in glob])
                act = np.nonzero(idx >= 0)[0]
                Gt = vol[t] * T3[lj]
                G[np.ix_(idx[act], idx[act])] += Gt[np.ix_(act, act)]
                for a in act:
                    # phi_j * u_a in degree-k Bernstein form on simplex t
                    prod = product_coeffs(d, 1, k - 1, eye1[lj], eyel[a])
                    for g, v in zip(space.local_to_global[t], prod):
                        if v != 0.0:
                            E[(int(g), int(idx[a]))] = v
            Ginv = np.linalg.inv(G)
            keys = np.array(list(E.keys()), dtype=np.int64).reshape(-1, 2)
            Em = sp.csr_matrix(
                (np.array(list(E.values())), (keys[:, 0], keys[:, 1])), shape=(space.n_nodes, len(loc_nodes))
            )
            blk = (Em @ sp.csr_matrix(Ginv) @ Em.T).tocoo()
            rows.append(blk.row)
            cols.append(blk.col)
            vals.append(blk.data)
        n = space.n_nodes
        if rows:
            K = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
        else:
            K = sp.csr_matrix((n, n))
        self.space_ = space
        self.matrix_ = K
        return self

    def transform(self, xi) -> FEFunction:
        check_is_fitted(self)
        xi = check_functional(xi)
        ell = node_moments_bernstein(xi, self.space_, self.quad_order)
        return FEFunction(self.space_, self.matrix_ @ ell)


def apply_clement(xi, mesh: SimplicialMesh, k: int) -> FEFunction:
    return ClementInterpolator(k).fit(mesh).transform(xi)


def ellipticity_ratio(matrix, mass, v: np.ndarray) -> float:
    """``<C v, v> / ||v||^2`` for coefficient vector ``v``."""
    ell = mass @ v
    return float(ell @ (matrix @ ell)) / float(v @ ell)

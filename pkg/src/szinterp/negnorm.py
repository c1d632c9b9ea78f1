"""Discrete W^{-1,2} norms via Riesz representatives on enriched spaces.

For a functional ``xi`` and a zero-trace Lagrange space ``V`` we solve
``(grad w, grad v) = xi(v)`` for all ``v`` in ``V`` and report ``|grad w|``.
This is the dual norm of ``xi`` restricted to ``V``, a lower bound for the
continuous norm that increases as ``V`` grows.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse.linalg as spla
from sklearn.base import BaseEstimator

from .assembly import stiffness_matrix
from .fespace import LagrangeSpace
from .mesh import SimplicialMesh, refine_n
from .sz_ops import node_moments_bernstein
from .validation import check_functional, check_is_fitted, check_mesh


class RieszSolver:
    """Factorized zero-trace stiffness matrix of a Lagrange space."""

    def __init__(self, space: LagrangeSpace):
        self.space = space
        self.inner = space.interior_nodes
        if len(self.inner) == 0:
            raise ValueError("evaluation space has no interior nodes")
        A = stiffness_matrix(space)[self.inner][:, self.inner].tocsc()
        self.lu = spla.splu(A)

    def norm(self, xi, quad_order: int | None = None) -> float:
        ell = node_moments_bernstein(xi, self.space, quad_order)[self.inner]
        u = self.lu.solve(ell)
        return float(np.sqrt(max(float(ell @ u), 0.0)))


class NegativeNormEvaluator(BaseEstimator):
    """Discrete ``W^{-1,2}`` norms on a mesh and on its vertex patches.

    Parameters
    ----------
    degree : polynomial degree of the evaluation space
    refinements : extra uniform refinements of the evaluation mesh
    quad_order : quadrature order for callable parts of the functional
    """

    def __init__(self, degree=2, refinements=2, quad_order=None):
        self.degree = degree
        self.refinements = refinements
        self.quad_order = quad_order

    def fit(self, mesh, y=None):
        self.mesh_ = check_mesh(mesh)
        if int(self.degree) < 1 or int(self.refinements) < 0:
            raise ValueError("need degree >= 1 and refinements >= 0")
        self.solver_ = self._solver(mesh)
        return self

    def _solver(self, region: SimplicialMesh) -> RieszSolver:
        return RieszSolver(LagrangeSpace(refine_n(region, int(self.refinements)), int(self.degree)))

    def norm(self, xi) -> float:
        check_is_fitted(self)
        return self.solver_.norm(check_functional(xi), self.quad_order)

    def patch_norm(self, xi, elems) -> float:
        """Norm over the union of the listed simplices, with zero trace on its boundary."""
        check_is_fitted(self)
        elems = np.asarray(elems)
        if elems.size == 0:
            raise ValueError("empty patch")
        solver = self._solver(self.mesh_.submesh(elems))
        return solver.norm(check_functional(xi), self.quad_order)

    def patch_norms(self, xi, kind: str = "vertex") -> np.ndarray:
        """One value per vertex: patch ``omega_j`` (``vertex``) or ``omega_j^2`` (``vertex2``)."""
        check_is_fitted(self)
        m = self.mesh_
        if kind == "vertex":
            patches = [m.vertex_patch(j) for j in range(m.n_vertices)]
        elif kind == "vertex2":
            patches = [m.vertex_patch2(j) for j in range(m.n_vertices)]
        else:
            raise ValueError(f"unknown patch kind {kind!r}")
        return np.array([self.patch_norm(xi, p) for p in patches])


def neg_norm_global(xi, mesh: SimplicialMesh, degree: int = 2, refinements: int = 2) -> float:
    return NegativeNormEvaluator(degree, refinements).fit(mesh).norm(xi)


def neg_norm_patch(xi, mesh: SimplicialMesh, elems, degree: int = 2, refinements: int = 2) -> float:
    return NegativeNormEvaluator(degree, refinements).fit(mesh).patch_norm(xi, elems)


def localized_sum(values, p: float = 2.0) -> float:
    v = np.abs(np.asarray(values, dtype=float))
    if v.size == 0:
        return 0.0
    return float(np.sum(v**p) ** (1.0 / p))

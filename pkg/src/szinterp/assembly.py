"""Global mass and stiffness matrices in the Bernstein basis, integrated exactly."""
from __future__ import annotations

from functools import lru_cache
from math import factorial

import numpy as np
import scipy.sparse as sp

from .fespace import LagrangeSpace
from .polyref import dim_poly, index_map, multi_indices, ref_mass_matrix


def _scatter(space: LagrangeSpace, local: np.ndarray) -> sp.csr_matrix:
    l2g = space.local_to_global
    N = l2g.shape[1]
    rows = np.repeat(l2g, N, axis=1).ravel()
    cols = np.tile(l2g, (1, N)).ravel()
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(space.n_nodes, space.n_nodes))


def mass_matrix(space: LagrangeSpace) -> sp.csr_matrix:
    mesh = space.mesh
    M = ref_mass_matrix(mesh.d, space.degree, space.degree)
    return _scatter(space, (mesh.volumes * factorial(mesh.d))[:, None, None] * M[None])


@lru_cache(maxsize=None)
def _ref_grad_products(d: int, m: int) -> np.ndarray:
    """``S[i, j, a, b] = int d b_a/d lambda_i * d b_b/d lambda_j`` on the reference simplex."""
    N = dim_poly(d, m)
    low = ref_mass_matrix(d, m - 1, m - 1)
    imap = index_map(d, m - 1)
    D = np.zeros((d + 1, N, dim_poly(d, m - 1)))
    for a, alpha in enumerate(multi_indices(d, m)):
        for i in range(d + 1):
            if alpha[i] > 0:
                beta = list(alpha)
                beta[i] -= 1
                D[i, a, imap[tuple(beta)]] = m
    S = np.einsum("iap,pq,jbq->ijab", D, low, D)
    S.flags.writeable = False
    return S


def stiffness_matrix(space: LagrangeSpace) -> sp.csr_matrix:
    mesh = space.mesh
    S = _ref_grad_products(mesh.d, space.degree)
    gl = np.einsum("tid,tjd->tij", mesh.grad_lambda, mesh.grad_lambda)
    local = np.einsum("tij,ijab->tab", gl, S) * (mesh.volumes * factorial(mesh.d))[:, None, None]
    return _scatter(space, local)

"""Continuous Lagrange spaces in Bernstein form, finite element functions and norms."""
from __future__ import annotations

import itertools
from functools import cached_property
from math import factorial

import numpy as np

from .mesh import SimplicialMesh
from .polyref import (
    bernstein_grad_matrix,
    bernstein_matrix,
    dim_poly,
    lattice_points,
    multi_indices,
    nodal_to_bernstein,
    raise_matrix,
)
from .quadrature import simplex_rule


class LagrangeSpace:
    """Globally continuous piecewise polynomials of degree ``degree``.

    Global nodes sit at the barycentric lattice points ``alpha/degree`` of the
    simplices; each node carries one Bernstein coefficient. A node is
    identified by the vertices with positive lattice weight, so two simplices
    sharing a face agree on the nodes of that face.
    """

    def __init__(self, mesh: SimplicialMesh, degree: int):
        if degree < 1:
            raise ValueError("Lagrange degree must be >= 1")
        self.mesh = mesh
        self.degree = m = int(degree)
        d = mesh.d
        A = np.array(multi_indices(d, m))
        S = mesh.simplices
        nt, N = len(S), len(A)

        # key per (simplex, local node): vertex ids with positive weight, sorted,
        # padded with a sentinel, followed by the matching weights
        vids = np.broadcast_to(S[:, None, :], (nt, N, d + 1))
        alph = np.broadcast_to(A[None, :, :], (nt, N, d + 1))
        sentinel = mesh.n_vertices
        v = np.where(alph > 0, vids, sentinel)
        order = np.argsort(v, axis=2, kind="stable")
        vs = np.take_along_axis(v, order, axis=2)
        as_ = np.take_along_axis(alph, order, axis=2)
        keys = np.concatenate([vs, as_], axis=2).reshape(nt * N, 2 * (d + 1))
        uniq, first, inv = np.unique(keys, axis=0, return_index=True, return_inverse=True)
        self.local_to_global = l2g = inv.reshape(nt, N)
        l2g.flags.writeable = False
        self.n_nodes = len(uniq)

        t_first, a_first = np.divmod(first, N)
        lam = lattice_points(d, m)[a_first]
        self.node_coords = mesh.to_physical(t_first, lam)
        self.node_coords.flags.writeable = False

        bnd_faces = set()
        for f in mesh.boundary_facets:
            for r in range(1, d + 1):
                bnd_faces.update(itertools.combinations(tuple(f), r))
        size = (uniq[:, : d + 1] < sentinel).sum(axis=1)
        is_bnd = np.zeros(self.n_nodes, dtype=bool)
        for i in np.nonzero(size <= d)[0]:
            is_bnd[i] = tuple(int(x) for x in uniq[i, : size[i]]) in bnd_faces
        self.boundary_mask = is_bnd
        is_bnd.flags.writeable = False
        self.interior_nodes = np.nonzero(~is_bnd)[0]
        self.boundary_nodes = np.nonzero(is_bnd)[0]
        self._node_vertices = uniq[:, : d + 1]
        self._node_weights = uniq[:, d + 1 :]

    @property
    def dim(self) -> int:
        return self.mesh.d

    @property
    def n_local(self) -> int:
        return dim_poly(self.mesh.d, self.degree)

    def node_vertex_set(self, i: int) -> tuple[int, ...]:
        """Mesh vertices with positive lattice weight for node ``i``."""
        row = self._node_vertices[i]
        return tuple(int(v) for v in row[row < self.mesh.n_vertices])

    @cached_property
    def _support(self):
        flat = self.local_to_global.ravel()
        order = np.argsort(flat, kind="stable")
        bounds = np.searchsorted(flat[order], np.arange(self.n_nodes + 1))
        elems, local = np.divmod(order, self.n_local)
        return bounds, elems, local

    def node_support(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Simplices containing node ``i`` and the node's local index in each."""
        bounds, elems, local = self._support
        sl = slice(bounds[i], bounds[i + 1])
        return elems[sl], local[sl]

    @cached_property
    def support_measure(self) -> np.ndarray:
        """``|omega_i|``: total measure of the simplices containing each node."""
        w = np.repeat(self.mesh.volumes, self.n_local)
        out = np.bincount(self.local_to_global.ravel(), weights=w, minlength=self.n_nodes)
        out.flags.writeable = False
        return out

    def nodes_in(self, elems) -> np.ndarray:
        return np.unique(self.local_to_global[np.asarray(elems)])

    def __repr__(self) -> str:
        return f"LagrangeSpace(degree={self.degree}, nodes={self.n_nodes}, mesh={self.mesh!r})"


def lagrange_space(mesh: SimplicialMesh, degree: int) -> LagrangeSpace:
    return LagrangeSpace(mesh, degree)


def _as_values(out, shape) -> np.ndarray:
    out = np.asarray(out, dtype=float)
    return np.broadcast_to(out, shape) if out.ndim == 0 else out.reshape(shape)


def eval_callable(f, x: np.ndarray) -> np.ndarray:
    """Evaluate ``f`` on points ``x`` of shape (..., d); ``f`` receives (n, d)."""
    flat = x.reshape(-1, x.shape[-1])
    return _as_values(f(flat), x.shape[:-1])


def eval_vector_callable(F, x: np.ndarray) -> np.ndarray:
    flat = x.reshape(-1, x.shape[-1])
    out = np.asarray(F(flat), dtype=float)
    if out.ndim == 0:
        out = np.full(flat.shape, float(out))
    elif out.ndim == 1 and flat.shape[1] == 1:
        out = out[:, None]
    return out.reshape(x.shape)


class FEFunction:
    """Element of a :class:`LagrangeSpace`, stored as global Bernstein coefficients."""

    def __init__(self, space: LagrangeSpace, coeffs):
        c = np.array(coeffs, dtype=float)
        if c.shape != (space.n_nodes,):
            raise ValueError(f"expected {space.n_nodes} coefficients, got {c.shape}")
        self.space = space
        self.coeffs = c

    @property
    def mesh(self) -> SimplicialMesh:
        return self.space.mesh

    @property
    def degree(self) -> int:
        return self.space.degree

    @classmethod
    def zeros(cls, space: LagrangeSpace) -> "FEFunction":
        return cls(space, np.zeros(space.n_nodes))

    @classmethod
    def from_local(cls, space: LagrangeSpace, local, tol: float = 1e-9) -> "FEFunction":
        """Glue per-simplex coefficient blocks, checking they agree on shared nodes."""
        local = np.asarray(local, dtype=float)
        if local.shape != space.local_to_global.shape:
            raise ValueError(f"local coefficients must have shape {space.local_to_global.shape}")
        flat = space.local_to_global.ravel()
        vals = local.ravel()
        cnt = np.bincount(flat, minlength=space.n_nodes)
        mean = np.bincount(flat, weights=vals, minlength=space.n_nodes) / np.maximum(cnt, 1)
        dev = np.abs(vals - mean[flat])
        scale = max(1.0, float(np.abs(vals).max(initial=0.0)))
        if dev.max(initial=0.0) > tol * scale:
            raise ValueError(f"local blocks are discontinuous (mismatch {dev.max():.3e})")
        return cls(space, mean)

    @classmethod
    def interpolate(cls, space: LagrangeSpace, f) -> "FEFunction":
        """Nodal interpolant of a callable (or of an FEFunction on a related mesh)."""
        mesh = space.mesh
        lam = lattice_points(mesh.d, space.degree)
        if isinstance(f, FEFunction):
            vals = f.values_at(mesh, lam)
        else:
            vals = eval_callable(f, mesh.quad_points(lam))
        local = vals @ nodal_to_bernstein(mesh.d, space.degree).T
        return cls.from_local(space, local, tol=1e-8)

    def local_coeffs(self) -> np.ndarray:
        return self.coeffs[self.space.local_to_global]

    def raise_degree(self, space: LagrangeSpace) -> "FEFunction":
        if space.mesh is not self.mesh or space.degree < self.degree:
            raise ValueError("target must be a space of higher degree on the same mesh")
        R = raise_matrix(self.mesh.d, self.degree, space.degree)
        return FEFunction.from_local(space, self.local_coeffs() @ R.T)

    # arithmetic -------------------------------------------------------------
    def _check(self, other):
        if not isinstance(other, FEFunction) or other.space is not self.space:
            raise ValueError("FE arithmetic needs functions from the same space")

    def __add__(self, other):
        self._check(other)
        return FEFunction(self.space, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return FEFunction(self.space, self.coeffs - other.coeffs)

    def __mul__(self, s):
        return FEFunction(self.space, float(s) * self.coeffs)

    __rmul__ = __mul__

    def __neg__(self):
        return FEFunction(self.space, -self.coeffs)

    # evaluation --------------------------------------------------------------
    def _host(self, mesh: SimplicialMesh, lam):
        """Map reference points in every simplex of ``mesh`` to (simplex, barycentric) here."""
        lam = np.atleast_2d(lam)
        nt, nq = mesh.n_simplices, len(lam)
        if mesh is self.mesh:
            return None
        up = mesh.ancestor_map(self.mesh)
        x = mesh.quad_points(lam).reshape(-1, mesh.d)
        if up is not None:
            elems = np.repeat(up, nq)
            return elems, self.mesh.barycentric(elems, x)
        return self.mesh.locate(x)

    def values_at(self, mesh: SimplicialMesh, lam) -> np.ndarray:
        """Values at reference points ``lam`` of every simplex of ``mesh``, shape (nt, nq)."""
        lam = np.atleast_2d(lam)
        host = self._host(mesh, lam)
        if host is None:
            return self.local_coeffs() @ bernstein_matrix(mesh.d, self.degree, lam).T
        elems, hl = host
        return self._eval_local(elems, hl).reshape(mesh.n_simplices, len(lam))

    def grads_at(self, mesh: SimplicialMesh, lam) -> np.ndarray:
        """Gradients at reference points of every simplex of ``mesh``, shape (nt, nq, d)."""
        lam = np.atleast_2d(lam)
        host = self._host(mesh, lam)
        if host is None:
            G = bernstein_grad_matrix(mesh.d, self.degree, lam)
            dl = np.einsum("tn,jqn->tqj", self.local_coeffs(), G)
            return np.einsum("tqj,tjd->tqd", dl, self.mesh.grad_lambda)
        elems, hl = host
        return self._grad_local(elems, hl).reshape(mesh.n_simplices, len(lam), mesh.d)

    def _eval_local(self, elems, lam) -> np.ndarray:
        B = bernstein_matrix(self.mesh.d, self.degree, lam)
        return np.einsum("nk,nk->n", B, self.coeffs[self.space.local_to_global[elems]])

    def _grad_local(self, elems, lam) -> np.ndarray:
        G = bernstein_grad_matrix(self.mesh.d, self.degree, lam)
        c = self.coeffs[self.space.local_to_global[elems]]
        dl = np.einsum("jnk,nk->nj", G, c)
        return np.einsum("nj,njd->nd", dl, self.mesh.grad_lambda[elems])

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        pts = x.reshape(-1, self.mesh.d)
        elems, lam = self.mesh.locate(pts)
        return self._eval_local(elems, lam).reshape(x.shape[:-1] if x.ndim > 1 else x.shape[:1])

    def grad(self, x) -> np.ndarray:
        pts = np.asarray(x, dtype=float).reshape(-1, self.mesh.d)
        elems, lam = self.mesh.locate(pts)
        return self._grad_local(elems, lam)

    def __repr__(self) -> str:
        return f"FEFunction(degree={self.degree}, nodes={self.space.n_nodes})"


def eval_fe(f: FEFunction, x) -> np.ndarray:
    return f(x)


def grad_fe(f: FEFunction, x) -> np.ndarray:
    return f.grad(x)


def _default_order(*parts) -> int:
    degs = [p.degree for p in parts if isinstance(p, FEFunction)]
    return 2 * max(degs, default=1) + 8


def _field(f, mesh, lam, which, grad):
    if f is None:
        return 0.0
    if isinstance(f, FEFunction):
        return f.values_at(mesh, lam) if which == "L2" else f.grads_at(mesh, lam)
    x = mesh.quad_points(lam)
    if which == "L2":
        return eval_callable(f, x)
    if grad is None:
        raise ValueError("H1 seminorm of a callable needs its gradient via grad=")
    return eval_vector_callable(grad, x)


def norm(f, which: str = "L2", mesh: SimplicialMesh | None = None, quad_order: int | None = None,
         grad=None, minus=None, minus_grad=None) -> float:
    """``L2`` norm or ``H1semi`` seminorm of ``f`` (optionally of ``f - minus``).

    ``f`` and ``minus`` may be FE functions or callables taking points of
    shape (n, d). The mesh defaults to the one of the first FE argument.
    """
    if which not in ("L2", "H1semi"):
        raise ValueError(f"unknown norm {which!r}")
    if mesh is None:
        mesh = next((g.mesh for g in (f, minus) if isinstance(g, FEFunction)), None)
        if mesh is None:
            raise ValueError("a mesh is required when no FE function is given")
    order = quad_order if quad_order is not None else _default_order(f, minus)
    lam, w = simplex_rule(mesh.d, order)
    vals = np.asarray(_field(f, mesh, lam, which, grad), dtype=float)
    if minus is not None:
        vals = vals - _field(minus, mesh, lam, which, minus_grad)
    sq = vals**2 if which == "L2" else (vals**2).sum(axis=-1)
    sq = np.broadcast_to(sq, (mesh.n_simplices, len(w)))
    per_elem = (sq @ w) * mesh.volumes * factorial(mesh.d)
    return float(np.sqrt(per_elem.sum()))


def norms(f, which: str, quad_order: int | None = None, mesh=None, grad=None) -> float:
    return norm(f, which, mesh=mesh, quad_order=quad_order, grad=grad)

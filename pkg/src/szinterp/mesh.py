"""Conforming simplicial meshes of intervals and triangles."""
from __future__ import annotations

import itertools
import json
import warnings
from functools import cached_property
from math import factorial
from pathlib import Path

import numpy as np

BARY_SLACK = 1e-12


class MeshError(ValueError):
    """Invalid or non-conforming mesh input."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


class SimplicialMesh:
    """Immutable conforming triangulation in ``d`` = 1 or 2 space dimensions.

    Parameters
    ----------
    vertices : array (nv, d)
    simplices : int array (nt, d+1)
    parent, parent_elem : optional coarser mesh and, for each simplex here,
        the simplex of ``parent`` containing it. Set by refinement and
        :meth:`submesh`.
    trusted : skip the geometric conformity probe (used by refinement, whose
        output is conforming by construction).
    """

    def __init__(self, vertices, simplices, *, parent=None, parent_elem=None, trusted=False):
        V = np.array(vertices, dtype=float)
        if V.ndim == 1:
            V = V[:, None]
        S = np.array(simplices, dtype=np.int64)
        if V.ndim != 2 or V.shape[1] not in (1, 2):
            raise MeshError(f"vertices must have shape (nv, d) with d in (1, 2), got {V.shape}")
        d = V.shape[1]
        if S.ndim != 2 or S.shape[1] != d + 1 or S.shape[0] == 0:
            raise MeshError(f"simplices must have shape (nt, {d + 1}), got {S.shape}")
        if S.min() < 0 or S.max() >= len(V):
            raise MeshError("simplex refers to a vertex index out of range")
        if np.any(np.diff(np.sort(S, axis=1), axis=1) == 0):
            raise MeshError("simplex with a repeated vertex")
        srt = np.sort(S, axis=1)
        if len(np.unique(srt, axis=0)) != len(S):
            raise MeshError("duplicate simplex")

        self.d = d
        B = np.stack([V[S[:, j]] - V[S[:, 0]] for j in range(1, d + 1)], axis=-1)
        det = np.linalg.det(B)
        diam = np.zeros(len(S))
        for a, b in itertools.combinations(range(d + 1), 2):
            diam = np.maximum(diam, np.linalg.norm(V[S[:, a]] - V[S[:, b]], axis=1))
        if np.any(np.abs(det) <= 1e-13 * diam**d):
            bad = int(np.argmin(np.abs(det) / diam**d))
            raise MeshError(f"simplex {bad} has zero measure")
        flip = det < 0
        self.reoriented = bool(flip.any())
        if self.reoriented:
            warnings.warn(f"{int(flip.sum())} simplices reoriented to positive orientation")
            S[flip, -2:] = S[flip, -1:-3:-1].copy()
            B = np.stack([V[S[:, j]] - V[S[:, 0]] for j in range(1, d + 1)], axis=-1)
            det = np.linalg.det(B)

        self.vertices = _readonly(V)
        self.simplices = _readonly(S)
        self.jacobians = _readonly(B)
        self.volumes = _readonly(det / factorial(d))
        self.diameters = _readonly(diam)
        Binv = np.linalg.inv(B)
        grad = np.empty((len(S), d + 1, d))
        grad[:, 1:, :] = Binv
        grad[:, 0, :] = -Binv.sum(axis=1)
        self.grad_lambda = _readonly(grad)
        self._binv = Binv

        self.parent = parent
        self.parent_elem = None if parent_elem is None else _readonly(np.asarray(parent_elem, dtype=np.int64))
        if (parent is None) != (parent_elem is None):
            raise MeshError("parent and parent_elem must be given together")
        if parent_elem is not None and len(self.parent_elem) != len(S):
            raise MeshError("parent_elem must have one entry per simplex")

        self._build_facets()
        if not trusted:
            self._check_conformity()

    # ------------------------------------------------------------------ topology
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_simplices(self) -> int:
        return len(self.simplices)

    def _build_facets(self):
        d, S = self.d, self.simplices
        # facet j of a simplex is the one opposite local vertex j
        faces = np.stack([np.sort(np.delete(S, j, axis=1), axis=1) for j in range(d + 1)], axis=1)
        flat = faces.reshape(-1, d)
        uniq, inv, counts = np.unique(flat, axis=0, return_inverse=True, return_counts=True)
        inv = inv.reshape(-1)
        if np.any(counts > 2):
            raise MeshError("non-conforming mesh: a facet is shared by more than two simplices")
        self.facets = _readonly(uniq)
        self.simplex_facets = _readonly(inv.reshape(len(S), d + 1))
        self.boundary_facets = _readonly(uniq[counts == 1])
        on_bnd = counts[inv] == 1
        self._boundary_local = on_bnd.reshape(len(S), d + 1)
        bv = np.zeros(self.n_vertices, dtype=bool)
        bv[self.boundary_facets.ravel()] = True
        self.boundary_vertices = _readonly(bv)

    def _check_conformity(self):
        """Probe just outside every boundary facet; hitting another simplex means overlap or a hanging node."""
        d = self.d
        el, loc = np.nonzero(self._boundary_local)
        pts = []
        weights = [np.full(d, 1.0 / d)]
        if d == 2:
            weights += [np.array([0.75, 0.25]), np.array([0.25, 0.75])]
        for w in weights:
            for e, j in zip(el, loc):
                verts = self.vertices[np.delete(self.simplices[e], j)]
                normal = -self.grad_lambda[e, j] / np.linalg.norm(self.grad_lambda[e, j])
                pts.append(w @ verts + 1e-7 * self.diameters[e] * normal)
        if not pts:
            return
        hits = self._containing(np.array(pts), slack=BARY_SLACK)
        if np.any(hits >= 0):
            raise MeshError("non-conforming mesh: overlapping simplices or hanging node")

    @cached_property
    def vertex_patches(self) -> tuple[np.ndarray, ...]:
        """``vertex_patches[j]``: sorted simplex ids of the patch around vertex ``j``."""
        return _invert(self.simplices, self.n_vertices)

    def vertex_patch(self, j: int) -> np.ndarray:
        return self.vertex_patches[j]

    def vertex_patch2(self, j: int) -> np.ndarray:
        """Simplices touching the vertex patch of ``j``."""
        verts = np.unique(self.simplices[self.vertex_patches[j]])
        return np.unique(np.concatenate([self.vertex_patches[v] for v in verts]))

    def element_patch(self, t: int) -> np.ndarray:
        """Simplices sharing at least a vertex with simplex ``t``."""
        return np.unique(np.concatenate([self.vertex_patches[v] for v in self.simplices[t]]))

    def patch_diameter(self, j: int) -> float:
        pts = self.vertices[np.unique(self.simplices[self.vertex_patches[j]])]
        diff = pts[:, None, :] - pts[None, :, :]
        return float(np.sqrt((diff**2).sum(-1)).max())

    @cached_property
    def patch_diameters(self) -> np.ndarray:
        return _readonly(np.array([self.patch_diameter(j) for j in range(self.n_vertices)]))

    @cached_property
    def interior_simplices(self) -> np.ndarray:
        """Mask of simplices with no vertex on the boundary."""
        return _readonly(~self.boundary_vertices[self.simplices].any(axis=1))

    @property
    def h(self) -> float:
        return float(self.diameters.max())

    @property
    def shape_regularity(self) -> float:
        """``max_T h_T^d / (d! |T|)``; invariant under similarity."""
        return float(np.max(self.diameters**self.d / (factorial(self.d) * self.volumes)))

    # ------------------------------------------------------------------ geometry
    def to_physical(self, elems, lam) -> np.ndarray:
        """Points with barycentric ``lam`` in simplices ``elems``; both of length n."""
        elems = np.asarray(elems)
        lam = np.asarray(lam, dtype=float)
        return np.einsum("nj,njd->nd", lam, self.vertices[self.simplices[elems]])

    def quad_points(self, lam) -> np.ndarray:
        """Physical images of reference points ``lam`` (nq, d+1) in every simplex, (nt, nq, d)."""
        return np.einsum("qj,tjd->tqd", lam, self.vertices[self.simplices])

    def barycentric(self, elems, x) -> np.ndarray:
        elems = np.asarray(elems)
        x = np.atleast_2d(np.asarray(x, dtype=float))
        rel = x - self.vertices[self.simplices[elems, 0]]
        tail = np.einsum("nij,nj->ni", self._binv[elems], rel)
        return np.column_stack([1.0 - tail.sum(axis=1), tail])

    def _containing(self, x, slack=BARY_SLACK, chunk=2_000_000) -> np.ndarray:
        """Lowest-id simplex containing each point, -1 if none."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.full(len(x), -1, dtype=np.int64)
        nt = self.n_simplices
        step = max(1, chunk // max(nt, 1))
        x0 = self.vertices[self.simplices[:, 0]]
        for s in range(0, len(x), step):
            xs = x[s : s + step]
            rel = xs[:, None, :] - x0[None, :, :]
            tail = np.einsum("tij,ntj->nti", self._binv, rel)
            lam0 = 1.0 - tail.sum(axis=2)
            inside = (lam0 >= -slack) & np.all(tail >= -slack, axis=2)
            found = inside.any(axis=1)
            out[s : s + step] = np.where(found, inside.argmax(axis=1), -1)
        return out

    def locate(self, x, slack=BARY_SLACK) -> tuple[np.ndarray, np.ndarray]:
        """Containing simplex (lowest id on ties) and barycentric coordinates."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.d:
            raise ValueError(f"points must have {self.d} coordinates")
        elems = self._containing(x, slack)
        if np.any(elems < 0):
            bad = x[np.argmax(elems < 0)]
            raise ValueError(f"point {bad} lies outside the mesh")
        return elems, self.barycentric(elems, x)

    def ancestor_map(self, other: "SimplicialMesh") -> np.ndarray | None:
        """Simplex of ``other`` containing each simplex here, if ``other`` is an ancestor."""
        if other is self:
            return np.arange(self.n_simplices)
        m, idx = self, np.arange(self.n_simplices)
        while m.parent is not None:
            idx = m.parent_elem[idx]
            m = m.parent
            if m is other:
                return idx
        return None

    def submesh(self, elems) -> "SimplicialMesh":
        """Mesh made of the listed simplices, with this mesh recorded as parent."""
        elems = np.asarray(elems, dtype=np.int64)
        if elems.size == 0:
            raise MeshError("empty submesh")
        used, inv = np.unique(self.simplices[elems], return_inverse=True)
        return SimplicialMesh(
            self.vertices[used], inv.reshape(len(elems), self.d + 1), parent=self, parent_elem=elems, trusted=True
        )

    def to_dict(self) -> dict:
        return {"d": self.d, "vertices": self.vertices.tolist(), "simplices": self.simplices.tolist()}

    def __repr__(self) -> str:
        return f"SimplicialMesh(d={self.d}, vertices={self.n_vertices}, simplices={self.n_simplices})"


def _invert(table: np.ndarray, n: int) -> tuple[np.ndarray, ...]:
    rows = np.repeat(np.arange(len(table)), table.shape[1])
    flat = table.ravel()
    order = np.argsort(flat, kind="stable")
    bounds = np.searchsorted(flat[order], np.arange(n + 1))
    return tuple(np.unique(rows[order[bounds[i] : bounds[i + 1]]]) for i in range(n))


def build_mesh(vertices, simplices) -> SimplicialMesh:
    return SimplicialMesh(vertices, simplices)


def interval(n: int, a: float = 0.0, b: float = 1.0) -> SimplicialMesh:
    return interval_from_points(np.linspace(a, b, n + 1))


def interval_from_points(points) -> SimplicialMesh:
    x = np.asarray(points, dtype=float)
    if np.any(np.diff(x) <= 0):
        raise MeshError("interval points must be strictly increasing")
    n = len(x) - 1
    return SimplicialMesh(x[:, None], np.column_stack([np.arange(n), np.arange(1, n + 1)]), trusted=True)


def square(n: int) -> SimplicialMesh:
    """Unit square, ``n x n`` cells, each split into two triangles.

    Diagonals point toward the centre of the square, so every corner cell is
    cut through its corner and no triangle has all three vertices on the
    boundary when ``n >= 2``.
    """
    if n < 1:
        raise MeshError("square needs n >= 1")
    g = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(g, g, indexing="ij")
    V = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return i * (n + 1) + j

    tris = []
    for i in range(n):
        for j in range(n):
            a, b, c, e = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            if (2 * i + 1 < n) == (2 * j + 1 < n):
                tris += [(a, b, c), (a, c, e)]
            else:
                tris += [(a, b, e), (b, c, e)]
    return SimplicialMesh(V, tris, trusted=True)


def uniform_refine(mesh: SimplicialMesh) -> SimplicialMesh:
    """Bisect every interval (d=1) or red-refine every triangle (d=2)."""
    V, S = mesh.vertices, mesh.simplices
    nv = mesh.n_vertices
    edges = sorted({tuple(sorted(e)) for s in S for e in itertools.combinations(s, 2)})
    mid = {e: nv + i for i, e in enumerate(edges)}
    newV = np.vstack([V, [(V[a] + V[b]) / 2 for a, b in edges]])

    def m(a, b):
        return mid[(a, b) if a < b else (b, a)]

    children, parent = [], []
    for t, s in enumerate(S):
        if mesh.d == 1:
            a, b = s
            ab = m(a, b)
            kids = [(a, ab), (ab, b)]
        else:
            a, b, c = s
            ab, bc, ca = m(a, b), m(b, c), m(c, a)
            kids = [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
        children += kids
        parent += [t] * len(kids)
    return SimplicialMesh(newV, children, parent=mesh, parent_elem=parent, trusted=True)


def refine_n(mesh: SimplicialMesh, times: int) -> SimplicialMesh:
    for _ in range(times):
        mesh = uniform_refine(mesh)
    return mesh


def local_refine_1d(mesh: SimplicialMesh, marked) -> tuple[SimplicialMesh, dict[int, int]]:
    """Bisect the marked intervals only.

    Returns the refined mesh and a map from each unrefined fine simplex to the
    coarse simplex it equals.
    """
    if mesh.d != 1:
        raise MeshError("local_refine_1d requires d = 1")
    marked = set(int(t) for t in np.atleast_1d(marked))
    if any(t < 0 or t >= mesh.n_simplices for t in marked):
        raise MeshError("marked simplex out of range")
    V = [row for row in mesh.vertices]
    simp, parent, same = [], [], {}
    for t, (a, b) in enumerate(mesh.simplices):
        if t in marked:
            V.append((mesh.vertices[a] + mesh.vertices[b]) / 2)
            c = len(V) - 1
            simp += [(a, c), (c, b)]
            parent += [t, t]
        else:
            same[len(simp)] = t
            simp.append((a, b))
            parent.append(t)
    fine = SimplicialMesh(np.array(V), simp, parent=mesh, parent_elem=parent, trusted=True)
    return fine, same


def read_mesh(path) -> SimplicialMesh:
    data = json.loads(Path(path).read_text())
    V = np.asarray(data["vertices"], dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    if "d" in data and V.shape[1] != data["d"]:
        raise MeshError(f"declared d={data['d']} does not match vertex coordinates")
    return build_mesh(V, data["simplices"])


def write_mesh(mesh: SimplicialMesh, path) -> None:
    Path(path).write_text(json.dumps(mesh.to_dict()))

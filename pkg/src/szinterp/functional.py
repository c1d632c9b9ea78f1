"""Linear functionals on zero-trace Lipschitz functions.

A :class:`DualFunctional` is a finite sum of three kinds of parts:

* densities ``f`` acting as ``w -> int f w`` (callables or FE functions),
* fluxes ``F`` acting as ``w -> int F . grad w`` (divergence-form data),
* atoms ``(x, c)`` acting as ``w -> c w(x)``.

Everything downstream only needs the per-simplex moments of a functional
against the Bernstein basis of some degree, computed by :func:`bernstein_moments`.
"""
from __future__ import annotations

from math import factorial

import numpy as np

from .fespace import FEFunction, eval_callable, eval_vector_callable
from .mesh import SimplicialMesh
from .polyref import bernstein_grad_matrix, bernstein_matrix, ref_mass_matrix
from .quadrature import simplex_rule


class DualFunctional:
    """Immutable sum of density, flux and atom parts, each with a scalar weight."""

    __slots__ = ("densities", "fluxes", "atoms")

    def __init__(self, density=None, flux=None, atoms=None, *, _parts=None):
        if _parts is not None:
            dens, flx, ats = _parts
        else:
            dens = () if density is None else ((1.0, density),)
            flx = () if flux is None else ((1.0, flux),)
            ats = tuple((np.atleast_1d(np.asarray(x, dtype=float)), float(c)) for x, c in (atoms or ()))
        object.__setattr__(self, "densities", tuple(dens))
        object.__setattr__(self, "fluxes", tuple(flx))
        object.__setattr__(self, "atoms", tuple(ats))

    @classmethod
    def zero(cls) -> "DualFunctional":
        return cls(_parts=((), (), ()))

    @property
    def is_density_only(self) -> bool:
        return not self.fluxes and not self.atoms

    @property
    def is_zero(self) -> bool:
        return not (self.densities or self.fluxes or self.atoms)

    def __add__(self, other: "DualFunctional") -> "DualFunctional":
        if not isinstance(other, DualFunctional):
            return NotImplemented
        return DualFunctional(
            _parts=(self.densities + other.densities, self.fluxes + other.fluxes, self.atoms + other.atoms)
        )

    def __mul__(self, s) -> "DualFunctional":
        s = float(s)
        return DualFunctional(
            _parts=(
                tuple((s * c, f) for c, f in self.densities),
                tuple((s * c, F) for c, F in self.fluxes),
                tuple((x, s * c) for x, c in self.atoms),
            )
        )

    __rmul__ = __mul__

    def __setattr__(self, name, value):
        raise AttributeError("DualFunctional is immutable")

    def __neg__(self):
        return -1.0 * self

    def __sub__(self, other):
        return self + (-1.0) * other


def as_functional(xi) -> DualFunctional:
    """Wrap an FE function or callable density; functionals pass through."""
    if isinstance(xi, DualFunctional):
        return xi
    if isinstance(xi, FEFunction) or callable(xi):
        return DualFunctional(density=xi)
    raise TypeError(f"cannot interpret {type(xi).__name__} as a functional")


def bernstein_moments(xi, mesh: SimplicialMesh, n: int, quad_order: int | None = None) -> np.ndarray:
    """``M[t, g] = xi(b_g^(n) on simplex t)``, shape ``(nt, N_n)``.

    Callable parts use a quadrature of order ``quad_order`` (default
    ``2n + 2``); FE densities are integrated exactly.
    """
    xi = as_functional(xi)
    d = mesh.d
    order = 2 * n + 2 if quad_order is None else quad_order
    scale = mesh.volumes * factorial(d)
    lam, w = simplex_rule(d, order)
    B = bernstein_matrix(d, n, lam)
    out = np.zeros((mesh.n_simplices, B.shape[1]))

    callables = [(c, f) for c, f in xi.densities if not isinstance(f, FEFunction)]
    if callables:
        x = mesh.quad_points(lam)
        vals = sum(c * eval_callable(f, x) for c, f in callables)
        out += ((vals * w) @ B) * scale[:, None]

    for c, f in xi.densities:
        if isinstance(f, FEFunction):
            out += c * _fe_moments(f, mesh, n)

    if xi.fluxes:
        x = mesh.quad_points(lam)
        F = sum(c * eval_vector_callable(Fn, x) for c, Fn in xi.fluxes)
        G = bernstein_grad_matrix(d, n, lam)
        # grad b_g at (t, q) = sum_j G[j, q, g] * grad_lambda[t, j]
        Fl = np.einsum("tqd,tjd->tqj", F, mesh.grad_lambda)
        out += np.einsum("tqj,jqg,q->tg", Fl, G, w) * scale[:, None]

    if xi.atoms:
        pts = np.array([np.broadcast_to(x, (d,)) for x, _ in xi.atoms])
        elems, lam_a = mesh.locate(pts)
        Ba = bernstein_matrix(d, n, lam_a)
        for (_, c), t, row in zip(xi.atoms, elems, Ba):
            out[t] += c * row
    return out


def _fe_moments(f: FEFunction, mesh: SimplicialMesh, n: int) -> np.ndarray:
    d, m = mesh.d, f.degree
    if f.mesh is mesh:
        return (f.local_coeffs() @ ref_mass_matrix(d, m, n)) * (mesh.volumes * factorial(d))[:, None]
    lam, w = simplex_rule(d, m + n)
    down = f.mesh.ancestor_map(mesh)
    if down is not None:
        # f lives on a refinement: integrate over its simplices, accumulate upward
        fine = f.mesh
        x = fine.quad_points(lam).reshape(-1, d)
        host = np.repeat(down, len(lam))
        B = bernstein_matrix(d, n, mesh.barycentric(host, x)).reshape(fine.n_simplices, len(lam), -1)
        vals = f.local_coeffs() @ bernstein_matrix(d, m, lam).T
        contrib = np.einsum("tq,tqg,q->tg", vals, B, w) * (fine.volumes * factorial(d))[:, None]
        out = np.zeros((mesh.n_simplices, B.shape[2]))
        np.add.at(out, down, contrib)
        return out
    # ancestor or unrelated mesh: sample f at quadrature points of this mesh
    vals = f.values_at(mesh, lam)
    B = bernstein_matrix(d, n, lam)
    return ((vals * w) @ B) * (mesh.volumes * factorial(d))[:, None]


def local_moments(xi, mesh: SimplicialMesh, ref_coeffs, n: int, quad_order: int | None = None) -> np.ndarray:
    """Moments against reference polynomials given by rows of ``ref_coeffs`` (degree ``n``)."""
    return bernstein_moments(xi, mesh, n, quad_order) @ np.asarray(ref_coeffs).T


def pair(xi, w: FEFunction, quad_order: int | None = None) -> float:
    """Dual pairing of ``xi`` with the continuous piecewise polynomial ``w``."""
    M = bernstein_moments(xi, w.mesh, w.degree, quad_order)
    return float(np.einsum("tg,tg->", M, w.local_coeffs()))

"""Bernstein polynomial algebra on the reference d-simplex.

Polynomials are stored as dense coefficient vectors in the Bernstein basis
``b_alpha = (|alpha|!/alpha!) * lambda**alpha`` of a fixed degree. The
ordering of the multi-indices returned by :func:`multi_indices` is the single
layout contract for every coefficient vector in the package.

All integrals are evaluated with exact combinatorial formulas, so no
quadrature enters any reference-simplex construction.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import comb, factorial, prod

import numpy as np

BARY_TOL = 1e-12


@lru_cache(maxsize=None)
def multi_indices(d: int, m: int) -> tuple[tuple[int, ...], ...]:
    """All multi-indices of length ``d + 1`` summing to ``m``.

    Ordered lexicographically descending, e.g. ``(2,0,0), (1,1,0), (1,0,1),
    (0,2,0), ...``.
    """
    if d < 1 or m < 0:
        raise ValueError(f"need d >= 1 and m >= 0, got d={d}, m={m}")
    out = [
        a for a in itertools.product(range(m, -1, -1), repeat=d + 1) if sum(a) == m
    ]
    return tuple(out)


@lru_cache(maxsize=None)
def index_map(d: int, m: int) -> dict[tuple[int, ...], int]:
    return {a: i for i, a in enumerate(multi_indices(d, m))}


def dim_poly(d: int, m: int) -> int:
    return comb(m + d, d)


def _multinomial(alpha) -> int:
    return factorial(sum(alpha)) // prod(factorial(a) for a in alpha)


def ref_volume(d: int) -> float:
    return 1.0 / factorial(d)


def c_const(d: int, m: int) -> float:
    """Integral of any degree-``m`` Bernstein polynomial over the reference simplex."""
    return factorial(m) / factorial(d + m)


@dataclass(frozen=True, eq=False)
class BPoly:
    """Polynomial of degree ``degree`` on the reference ``dim``-simplex."""

    dim: int
    degree: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape != (dim_poly(self.dim, self.degree),):
            raise ValueError(
                f"expected {dim_poly(self.dim, self.degree)} coefficients, got {c.shape}"
            )
        c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def basis(cls, d: int, alpha) -> "BPoly":
        alpha = tuple(alpha)
        m = sum(alpha)
        c = np.zeros(dim_poly(d, m))
        c[index_map(d, m)[alpha]] = 1.0
        return cls(d, m, c)

    @classmethod
    def constant(cls, d: int, value: float = 1.0, degree: int = 0) -> "BPoly":
        return cls(d, degree, np.full(dim_poly(d, degree), float(value)))

    def __call__(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        return bernstein_matrix(self.dim, self.degree, lam) @ self.coeffs

    def __add__(self, other: "BPoly") -> "BPoly":
        m = max(self.degree, other.degree)
        a, b = degree_raise(self, m), degree_raise(other, m)
        return BPoly(self.dim, m, a.coeffs + b.coeffs)

    def __sub__(self, other: "BPoly") -> "BPoly":
        return self + (-1.0) * other

    def __rmul__(self, s: float) -> "BPoly":
        return BPoly(self.dim, self.degree, s * self.coeffs)

    def __mul__(self, other):
        if isinstance(other, BPoly):
            return bernstein_product(self, other)
        return BPoly(self.dim, self.degree, other * self.coeffs)

    def __neg__(self) -> "BPoly":
        return (-1.0) * self


def check_barycentric(lam) -> np.ndarray:
    lam = np.atleast_2d(np.asarray(lam, dtype=float))
    err = np.abs(lam.sum(axis=-1) - 1.0)
    if np.any(err > BARY_TOL):
        raise ValueError(f"barycentric coordinates must sum to 1 (deviation {err.max():.3e})")
    return lam


def bernstein_eval(alpha, lam) -> float | np.ndarray:
    """Value of ``b_alpha`` at the barycentric point(s) ``lam``."""
    alpha = tuple(int(a) for a in alpha)
    single = np.ndim(lam) == 1
    lam = check_barycentric(lam)
    if lam.shape[-1] != len(alpha):
        raise ValueError("length of lambda does not match the multi-index")
    val = _multinomial(alpha) * np.prod(lam ** np.array(alpha), axis=-1)
    return float(val[0]) if single else val


@lru_cache(maxsize=None)
def _exponents(d: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    idx = multi_indices(d, m)
    return (
        np.array(idx, dtype=float).reshape(len(idx), d + 1),
        np.array([_multinomial(a) for a in idx], dtype=float),
    )


def bernstein_matrix(d: int, m: int, lam) -> np.ndarray:
    """Values of all degree-``m`` Bernstein polynomials, shape ``(npts, N)``.

    No barycentric validation is done here; this is the hot path for
    quadrature.
    """
    lam = np.asarray(lam, dtype=float)
    single = lam.ndim == 1
    lam = np.atleast_2d(lam)
    exps, mult = _exponents(d, m)
    if m == 0:
        out = np.ones((lam.shape[0], 1))
    else:
        out = mult * np.prod(lam[:, None, :] ** exps[None, :, :], axis=-1)
    return out[0] if single else out


def bernstein_grad_matrix(d: int, m: int, lam) -> np.ndarray:
    """Derivatives ``d b_alpha / d lambda_j``, shape ``(d+1, npts, N)``."""
    lam = np.atleast_2d(np.asarray(lam, dtype=float))
    N = dim_poly(d, m)
    out = np.zeros((d + 1, lam.shape[0], N))
    if m == 0:
        return out
    lower = bernstein_matrix(d, m - 1, lam)
    imap = index_map(d, m - 1)
    for a, alpha in enumerate(multi_indices(d, m)):
        for j in range(d + 1):
            if alpha[j] > 0:
                beta = list(alpha)
                beta[j] -= 1
                out[j, :, a] = m * lower[:, imap[tuple(beta)]]
    return out


@lru_cache(maxsize=None)
def product_tensor(d: int, m: int, n: int) -> np.ndarray:
    """``P[t, a, b]``: coefficient of ``b_t^(m+n)`` in ``b_a^(m) * b_b^(n)``."""
    A = multi_indices(d, m)
    B = multi_indices(d, n)
    target = index_map(d, m + n)
    P = np.zeros((dim_poly(d, m + n), len(A), len(B)))
    denom = comb(m + n, m)
    for i, a in enumerate(A):
        for j, b in enumerate(B):
            s = tuple(x + y for x, y in zip(a, b))
            P[target[s], i, j] = prod(comb(x + y, x) for x, y in zip(a, b)) / denom
    P.flags.writeable = False
    return P


def product_coeffs(d: int, m: int, n: int, a, b) -> np.ndarray:
    """Product of coefficient arrays; ``a`` (..., N_m) and ``b`` (..., N_n) broadcast."""
    return np.einsum("tab,...a,...b->...t", product_tensor(d, m, n), a, b)


def bernstein_product(a: BPoly, b: BPoly) -> BPoly:
    """Exact product in Bernstein form (degree ``a.degree + b.degree``)."""
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    c = product_coeffs(a.dim, a.degree, b.degree, a.coeffs, b.coeffs)
    return BPoly(a.dim, a.degree + b.degree, c)


@lru_cache(maxsize=None)
def raise_matrix(d: int, m: int, target: int) -> np.ndarray:
    """Matrix ``R`` with ``coeffs_target = R @ coeffs_m``."""
    if target < m:
        raise ValueError(f"cannot lower degree {m} to {target}")
    if target == m:
        R = np.eye(dim_poly(d, m))
    else:
        one = np.ones(dim_poly(d, target - m))
        R = np.zeros((dim_poly(d, target), dim_poly(d, m)))
        for a in range(dim_poly(d, m)):
            e = np.zeros(dim_poly(d, m))
            e[a] = 1.0
            R[:, a] = product_coeffs(d, m, target - m, e, one)
    R.flags.writeable = False
    return R


def degree_raise(p: BPoly, target: int) -> BPoly:
    return BPoly(p.dim, target, raise_matrix(p.dim, p.degree, target) @ p.coeffs)


def bernstein_grad(p: BPoly) -> list[BPoly]:
    """Barycentric partial derivatives ``d p / d lambda_j`` for ``j = 0..d``."""
    d, m = p.dim, p.degree
    if m < 1:
        raise ValueError("gradient requires degree >= 1")
    imap = index_map(d, m)
    out = []
    for j in range(d + 1):
        c = np.zeros(dim_poly(d, m - 1))
        for b, beta in enumerate(multi_indices(d, m - 1)):
            alpha = list(beta)
            alpha[j] += 1
            c[b] = m * p.coeffs[imap[tuple(alpha)]]
        out.append(BPoly(d, m - 1, c))
    return out


def integrate_ref(p: BPoly) -> float:
    return c_const(p.dim, p.degree) * float(np.sum(p.coeffs))


def multi_integral(d: int, *alphas) -> float:
    """Exact ``int_ref prod_i b_{alpha_i}`` for any number of multi-indices."""
    total = [sum(col) for col in zip(*alphas)]
    num = prod(_multinomial(a) for a in alphas) * prod(factorial(t) for t in total)
    den = factorial(d + sum(total))
    return num / den


@lru_cache(maxsize=None)
def ref_mass_matrix(d: int, m: int, n: int) -> np.ndarray:
    """``M[a, b] = <b_a^(m), b_b^(n)>`` over the reference simplex."""
    A, B = multi_indices(d, m), multi_indices(d, n)
    M = np.array([[multi_integral(d, a, b) for b in B] for a in A])
    M.flags.writeable = False
    return M


@lru_cache(maxsize=None)
def ref_triple(d: int, l: int, m: int, n: int) -> np.ndarray:
    """``T[g, a, b] = int b_g^(l) b_a^(m) b_b^(n)`` over the reference simplex."""
    G, A, B = multi_indices(d, l), multi_indices(d, m), multi_indices(d, n)
    T = np.array([[[multi_integral(d, g, a, b) for b in B] for a in A] for g in G])
    T.flags.writeable = False
    return T


@lru_cache(maxsize=None)
def ref_quadruple(d: int, k: int) -> np.ndarray:
    """``Q[a, m, g, b] = int b_a b_m b_g b_b`` for four degree-``k`` indices."""
    A = multi_indices(d, k)
    N = len(A)
    Q = np.empty((N, N, N, N))
    for i, j, l, r in itertools.product(range(N), repeat=4):
        if i <= j <= l <= r:
            v = multi_integral(d, A[i], A[j], A[l], A[r])
            for perm in set(itertools.permutations((i, j, l, r))):
                Q[perm] = v
    Q.flags.writeable = False
    return Q


def permute_index(alpha, perm) -> tuple[int, ...]:
    """Multi-index with entries relabelled: ``out[j] = alpha[perm[j]]``."""
    return tuple(alpha[p] for p in perm)


@lru_cache(maxsize=None)
def lattice_points(d: int, m: int) -> np.ndarray:
    """Barycentric coordinates ``alpha / m`` of the degree-``m`` lattice, shape ``(N, d+1)``."""
    A = np.array(multi_indices(d, m), dtype=float)
    if m == 0:
        return np.full((1, d + 1), 1.0 / (d + 1))
    out = A / m
    out.flags.writeable = False
    return out


@lru_cache(maxsize=None)
def nodal_to_bernstein(d: int, m: int) -> np.ndarray:
    """Matrix mapping values at lattice points to Bernstein coefficients."""
    V = bernstein_matrix(d, m, lattice_points(d, m))
    out = np.linalg.inv(np.atleast_2d(V))
    out.flags.writeable = False
    return out

"""Reference-simplex dual basis biorthogonal to the Bernstein basis.

For each multi-index ``alpha`` of degree ``k`` we construct ``p_alpha`` of degree
``3k`` with ``<p_alpha, b_beta> = delta_{alpha beta}`` on the reference simplex.
The ansatz is ``p_alpha = b_alpha * z_alpha`` where

    z_alpha = C + q_alpha - sum_mu b_mu q_mu,   C = (d+k)!/k!,

and the unknown ``q_alpha`` are degree-``k`` polynomials determined up to a
common additive polynomial. We fix that freedom by requiring the
coefficient-wise sum of all ``q_alpha`` to vanish, which keeps the solved
representative symmetric under relabelling of barycentric coordinates.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np
import scipy.linalg

from .polyref import (
    BPoly,
    dim_poly,
    index_map,
    multi_indices,
    product_coeffs,
    ref_mass_matrix,
    ref_quadruple,
    ref_triple,
)

SUPPORTED_D = (1, 2)
SUPPORTED_K = (1, 2, 3)
RESIDUAL_TOL = 1e-11
VERIFY_TOL = 1e-10


class DualBasisError(RuntimeError):
    """The dual system could not be solved or its solution failed verification."""


def _check_envelope(d: int, k: int) -> None:
    if d not in SUPPORTED_D or k not in SUPPORTED_K:
        raise ValueError(f"unsupported (d, k) = ({d}, {k}); need d in {SUPPORTED_D}, k in {SUPPORTED_K}")


def sum_constant(d: int, k: int) -> float:
    return factorial(d + k) / factorial(k)


@dataclass(frozen=True)
class DualSystem:
    """Gauged square system ``A x = rhs`` for the stacked coefficients of ``q``.

    The unknown ``x`` has layout ``x[alpha * N + gamma]`` (coefficient
    ``gamma`` of ``q_alpha``). The first ``N*N - N`` rows are the
    off-diagonal biorthogonality equations in ``pairs`` order, the last ``N``
    rows the gauge.
    """

    d: int
    k: int
    matrix: np.ndarray
    rhs: np.ndarray
    pairs: tuple[tuple[int, int], ...]

    @property
    def n_equations(self) -> int:
        return len(self.pairs)

    @property
    def n_gauge(self) -> int:
        return self.matrix.shape[0] - len(self.pairs)


@dataclass(frozen=True, eq=False)
class DualBasisTable:
    """Coefficient arrays of ``q`` (degree k), ``z`` (2k) and ``p`` (3k), one row per alpha."""

    d: int
    k: int
    q: np.ndarray
    z: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        for name in ("q", "z", "p"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def indices(self):
        return multi_indices(self.d, self.k)

    def p_poly(self, alpha) -> BPoly:
        return BPoly(self.d, 3 * self.k, self.p[index_map(self.d, self.k)[tuple(alpha)]])

    def z_poly(self, alpha) -> BPoly:
        return BPoly(self.d, 2 * self.k, self.z[index_map(self.d, self.k)[tuple(alpha)]])

    def q_poly(self, alpha) -> BPoly:
        return BPoly(self.d, self.k, self.q[index_map(self.d, self.k)[tuple(alpha)]])

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "k": self.k,
            "multi_indices": [list(a) for a in self.indices],
            "p_degree": 3 * self.k,
            "p_multi_indices": [list(a) for a in multi_indices(self.d, 3 * self.k)],
            "p": self.p.tolist(),
        }


def build_dual_system(d: int, k: int) -> DualSystem:
    _check_envelope(d, k)
    N = dim_poly(d, k)
    C = sum_constant(d, k)
    T3 = ref_triple(d, k, k, k)
    Q4 = ref_quadruple(d, k)
    M = ref_mass_matrix(d, k, k)

    pairs = tuple((a, b) for a in range(N) for b in range(N) if a != b)
    A = np.zeros((N * N, N * N))
    rhs = np.zeros(N * N)
    for row, (a, b) in enumerate(pairs):
        # <b_a q_a, b_b>
        A[row, a * N : (a + 1) * N] += T3[a, :, b]
        # -<b_a sum_mu b_mu q_mu, b_b>
        A[row] -= Q4[a, :, :, b].reshape(-1)
        rhs[row] = -C * M[a, b]
    for g in range(N):
        A[len(pairs) + g, g::N] = 1.0
    A.flags.writeable = False
    rhs.flags.writeable = False
    return DualSystem(d, k, A, rhs, pairs)


def system_residual(system: DualSystem, x: np.ndarray) -> np.ndarray:
    return system.matrix @ x - system.rhs


def assemble_table(d: int, k: int, q: np.ndarray, symmetric: bool = True) -> DualBasisTable:
    """Form ``z`` and ``p`` from the ``q`` coefficients (rows indexed by alpha).

    With ``symmetric=True`` every array is projected onto the
    permutation-invariant subspace, which removes the rounding asymmetry of
    the linear solve.
    """
    N = dim_poly(d, k)
    q = np.asarray(q, dtype=float).reshape(N, N)
    if not symmetric:
        return _assemble(d, k, q)
    q = symmetrize(d, k, k, q)
    t = _assemble(d, k, q)
    return DualBasisTable(d, k, q, symmetrize(d, k, 2 * k, t.z), symmetrize(d, k, 3 * k, t.p))


def _assemble(d: int, k: int, q: np.ndarray) -> DualBasisTable:
    N = dim_poly(d, k)
    C = sum_constant(d, k)
    eye = np.eye(N)
    # qbar = sum_mu b_mu q_mu, degree 2k
    qbar = product_coeffs(d, k, k, eye, q).sum(axis=0)
    q2 = product_coeffs(d, k, k, q, np.ones(N))
    z = C + q2 - qbar
    p = product_coeffs(d, k, 2 * k, eye, z)
    return DualBasisTable(d, k, q, z, p)


def symmetrize(d: int, k: int, m: int, rows: np.ndarray) -> np.ndarray:
    """Average ``rows[alpha, gamma]`` over all relabellings of barycentric coordinates.

    Values are sorted before summation so every member of an orbit receives a
    bit-identical result.
    """
    stack = np.stack(
        [rows[np.ix_(pk, pm)] for pk, pm in zip(_permutation_maps(d, k), _permutation_maps(d, m))]
    )
    return np.sort(stack, axis=0).sum(axis=0) / stack.shape[0]


@lru_cache(maxsize=None)
def solve_dual_basis(d: int, k: int) -> DualBasisTable:
    """Solve the gauged system and return a verified table (cached per ``(d, k)``)."""
    system = build_dual_system(d, k)
    try:
        lu = scipy.linalg.lu_factor(system.matrix, check_finite=True)
        x = scipy.linalg.lu_solve(lu, system.rhs)
        ok = np.all(np.isfinite(x))
    except (np.linalg.LinAlgError, ValueError):
        ok = False
    if not ok or np.max(np.abs(system_residual(system, x))) > RESIDUAL_TOL:
        x, *_ = np.linalg.lstsq(system.matrix, system.rhs, rcond=None)
    res = system_residual(system, x)
    worst = int(np.argmax(np.abs(res)))
    if abs(res[worst]) > RESIDUAL_TOL:
        raise DualBasisError(_describe_row(system, worst, res[worst]))

    table = assemble_table(d, k, x)
    report = verify_dual_basis(table)
    if not report.passed(VERIFY_TOL):
        raise DualBasisError(f"dual basis verification failed for d={d}, k={k}: {report}")
    return table


def _describe_row(system: DualSystem, row: int, value: float) -> str:
    idx = multi_indices(system.d, system.k)
    if row < len(system.pairs):
        a, b = system.pairs[row]
        return f"residual {value:.3e} in equation alpha={idx[a]}, beta={idx[b]}"
    return f"residual {value:.3e} in gauge row {row - len(system.pairs)}"


def closed_form_q_constant(d: int) -> float:
    """Factor ``(d+1)(d+3)(d+4)/2`` of the closed-form ``k = 1`` weights.

    It refers to weights normalized as ``psi = p / |omega|``. This package
    uses ``psi = |T_ref| p / |omega|``, so tables here carry an extra ``d!``.
    """
    return (d + 1) * (d + 3) * (d + 4) / 2


def closed_form_k1_table(d: int) -> DualBasisTable:
    """Closed-form lowest-order table, rescaled to this package's normalization."""
    _check_envelope(d, 1)
    c = factorial(d) * closed_form_q_constant(d)
    # degree-1 Bernstein basis is lambda itself, ordered e_0, e_1, ...
    return assemble_table(d, 1, c * np.eye(d + 1), symmetric=False)


def closed_form_k1(d: int, lam) -> np.ndarray:
    """``p_l(lam)`` for all vertices ``l``, shape ``(npts, d+1)``.

    ``(d+1) lam_l (1 + (d+3)(d+4)/2 (lam_l - sum_j lam_j^2))``, times ``d!``.
    """
    lam = np.atleast_2d(np.asarray(lam, dtype=float))
    s = np.sum(lam**2, axis=1, keepdims=True)
    c = (d + 3) * (d + 4) / 2
    return factorial(d) * (d + 1) * lam * (1 + c * (lam - s))


@dataclass(frozen=True)
class DualBasisReport:
    biorthogonality: float
    sum_identity: float
    symmetry: float
    product_identity: float
    worst_pair: tuple

    def passed(self, tol: float = VERIFY_TOL, symmetry_tol: float | None = None) -> bool:
        stol = tol if symmetry_tol is None else symmetry_tol
        return (
            self.biorthogonality <= tol
            and self.sum_identity <= tol
            and self.symmetry <= stol
            and self.product_identity <= tol
        )

    def as_dict(self) -> dict:
        return {
            "biorthogonality": self.biorthogonality,
            "sum_identity": self.sum_identity,
            "symmetry": self.symmetry,
            "product_identity": self.product_identity,
        }


@lru_cache(maxsize=None)
def _permutation_maps(d: int, m: int) -> tuple[np.ndarray, ...]:
    """For each coordinate permutation, the induced index permutation on degree-m multi-indices."""
    idx = multi_indices(d, m)
    imap = index_map(d, m)
    return tuple(
        np.array([imap[tuple(a[s] for s in perm)] for a in idx])
        for perm in itertools.permutations(range(d + 1))
    )


def verify_dual_basis(t: DualBasisTable) -> DualBasisReport:
    d, k = t.d, t.k
    N = dim_poly(d, k)
    G = t.p @ ref_mass_matrix(d, 3 * k, k)
    dev = np.abs(G - np.eye(N))
    a, b = np.unravel_index(int(np.argmax(dev)), dev.shape)
    idx = multi_indices(d, k)

    # Bernstein coefficients bound the sup norm, so this is a pointwise bound.
    sum_err = float(np.max(np.abs(t.p.sum(axis=0) - sum_constant(d, k))))

    sym = 0.0
    for pk, p3 in zip(_permutation_maps(d, k), _permutation_maps(d, 3 * k)):
        permuted = t.p[np.ix_(pk, p3)]
        sym = max(sym, float(np.max(np.abs(permuted - t.p))))

    prod_err = float(np.max(np.abs(product_coeffs(d, k, 2 * k, np.eye(N), t.z) - t.p)))
    return DualBasisReport(float(dev.max()), sum_err, sym, prod_err, (idx[a], idx[b]))

import time
from math import factorial

import numpy as np
import pytest
import scipy.linalg

from oracles import bernstein, indices, random_barycentric, ref_integral
from szinterp.dualbasis import (
    DualBasisError,
    assemble_table,
    build_dual_system,
    solve_dual_basis,
    sum_constant,
    system_residual,
    closed_form_k1,
    closed_form_k1_table,
    closed_form_q_constant,
    verify_dual_basis,
)
from szinterp.polyref import BPoly, bernstein_matrix, dim_poly, integrate_ref

SUPPORTED = [(d, k) for d in (1, 2) for k in (1, 2, 3)]


@pytest.mark.parametrize("d,k,eqs,gauge", [(1, 1, 2, 2), (2, 1, 6, 3), (1, 2, 6, 3)])
def test_system_sizes(d, k, eqs, gauge):
    s = build_dual_system(d, k)
    assert s.n_equations == eqs
    assert s.n_gauge == gauge
    N = dim_poly(d, k)
    assert s.matrix.shape[1] == N * N


@pytest.mark.parametrize("d,k", [(0, 1), (3, 1), (1, 0), (1, 4)])
def test_envelope_rejected(d, k):
    with pytest.raises(ValueError):
        build_dual_system(d, k)


@pytest.mark.parametrize("d,k", SUPPORTED)
def test_local_identities(d, k):
    t = solve_dual_basis(d, k)
    rep = verify_dual_basis(t)
    assert rep.biorthogonality <= 1e-10
    assert rep.sum_identity <= 1e-10
    assert rep.symmetry <= 1e-12
    assert rep.product_identity <= 1e-10


def test_sum_constant_values():
    assert sum_constant(1, 1) == 2
    assert sum_constant(2, 1) == 6
    assert sum_constant(2, 3) == 20


@pytest.mark.parametrize("d,k", SUPPORTED)
def test_sum_is_constant_pointwise(d, k, rng):
    t = solve_dual_basis(d, k)
    lam = random_barycentric(rng, d, 50)
    vals = bernstein_matrix(d, 3 * k, lam) @ t.p.sum(axis=0)
    assert np.abs(vals - factorial(d + k) / factorial(k)).max() <= 1e-10


@pytest.mark.parametrize("d,k", [(1, 2), (2, 1), (2, 2)])
def test_biorthogonality_against_adaptive_quadrature(d, k):
    t = solve_dual_basis(d, k)
    A, P = indices(d, k), indices(d, 3 * k)

    def p_val(row, lam):
        return sum(c * bernstein(a, lam) for c, a in zip(t.p[row], P))

    for i in range(len(A)):
        for j in (0, len(A) - 1):
            val = ref_integral(lambda lam: p_val(i, lam) * bernstein(A[j], lam), d)
            assert val == pytest.approx(float(i == j), abs=1e-9)


def test_closed_form_d1_literal(rng):
    t = solve_dual_basis(1, 1)
    lam = random_barycentric(rng, 1, 50)
    solved = bernstein_matrix(1, 3, lam) @ t.p.T
    literal = np.stack([2 * l * (1 + 10 * (l - (lam**2).sum(axis=1))) for l in lam.T], axis=1)
    assert np.abs(solved - literal).max() <= 1e-11


def test_closed_form_d2_rescaled(rng):
    t = solve_dual_basis(2, 1)
    lam = random_barycentric(rng, 2, 50)
    solved = bernstein_matrix(2, 3, lam) @ t.p.T
    # weights normalized by |omega| alone, times d! = 2 for this package's scaling
    s = (lam**2).sum(axis=1)
    literal = np.stack([3 * l * (1 + 15 * (l - s)) for l in lam.T], axis=1)
    assert np.abs(solved - 2 * literal).max() <= 1e-10
    assert np.abs(solved - closed_form_k1(2, lam)).max() <= 1e-10


def test_unscaled_normalization_has_half_moments_in_2d():
    # independent evidence for the d! factor: the literal d=2 weight pairs to 1/2 with its vertex
    val = ref_integral(lambda lam: 3 * lam[0] * (1 + 15 * (lam[0] - sum(x * x for x in lam))) * lam[0], 2)
    assert val == pytest.approx(0.5, abs=1e-9)


def test_closed_form_constants_and_tables():
    assert closed_form_q_constant(1) == 20
    assert closed_form_q_constant(2) == 45
    for d in (1, 2):
        closed = closed_form_k1_table(d)
        rep = verify_dual_basis(closed)
        assert rep.passed(1e-10)
        assert np.abs(closed.p - solve_dual_basis(d, 1).p).max() <= 1e-10
        assert np.allclose(closed.q, factorial(d) * closed_form_q_constant(d) * np.eye(d + 1))
    assert verify_dual_basis(closed_form_k1_table(1)).symmetry <= 1e-13


@pytest.mark.parametrize("d,k", SUPPORTED)
def test_coset_invariance(d, k, rng):
    t = solve_dual_basis(d, k)
    r = rng.standard_normal(dim_poly(d, k))
    shifted = assemble_table(d, k, (t.q + r[None, :]).ravel(), symmetric=False)
    assert np.abs(shifted.z - t.z).max() <= 1e-12 * max(1, np.abs(t.z).max())
    assert np.abs(shifted.p - t.p).max() <= 1e-12 * max(1, np.abs(t.p).max())


@pytest.mark.parametrize("d,k", SUPPORTED)
def test_diagonal_identity_holds(d, k):
    # built from q alone, never from the assembled p
    t = solve_dual_basis(d, k)
    C = factorial(d + k) / factorial(k)
    idx = indices(d, k)
    qbar = sum((BPoly.basis(d, mu) * t.q_poly(mu) for mu in idx), BPoly(d, 2 * k, np.zeros(dim_poly(d, 2 * k))))
    for beta in idx:
        b = BPoly.basis(d, beta)
        lhs = integrate_ref(b * (t.q_poly(beta) - qbar) * b)
        assert lhs == pytest.approx(1 - C * integrate_ref(b * b), abs=1e-11)


@pytest.mark.parametrize("d,k", SUPPORTED)
def test_system_residual_small(d, k):
    s = build_dual_system(d, k)
    x = scipy.linalg.solve(s.matrix, s.rhs)
    assert np.abs(system_residual(s, x)).max() <= 1e-11


def test_perturbation_is_detected():
    t = solve_dual_basis(2, 2)
    p = t.p.copy()
    p[0, 0] += 1e-3
    bad = type(t)(t.d, t.k, t.q, t.z, p)
    assert verify_dual_basis(bad).biorthogonality >= 1e-5
    assert not verify_dual_basis(bad).passed()


def test_table_is_immutable_and_serializable():
    t = solve_dual_basis(1, 2)
    with pytest.raises(ValueError):
        t.p[0, 0] = 1.0
    d = t.to_dict()
    assert d["p_degree"] == 6 and len(d["p"]) == 3
    assert t.p_poly((2, 0)).degree == 6 and t.z_poly((2, 0)).degree == 4 and t.q_poly((2, 0)).degree == 2


def test_all_tables_under_one_second():
    solve_dual_basis.cache_clear()
    start = time.perf_counter()
    for d, k in SUPPORTED:
        solve_dual_basis(d, k)
    assert time.perf_counter() - start < 1.0


def test_error_type_is_runtime_error():
    assert issubclass(DualBasisError, RuntimeError)

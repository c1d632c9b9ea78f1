import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import hat
from szinterp.fespace import FEFunction, LagrangeSpace
from szinterp.functional import DualFunctional, as_functional, bernstein_moments, local_moments, pair
from szinterp.mesh import interval, interval_from_points, refine_n, square


@pytest.fixture
def mid_hat():
    sp = LagrangeSpace(interval(2), 1)
    c = np.zeros(sp.n_nodes)
    c[np.argmin(np.abs(sp.node_coords[:, 0] - 0.5))] = 1.0
    return FEFunction(sp, c)


def test_density_one_pairs_to_half(mid_hat):
    assert pair(DualFunctional(density=lambda x: np.ones(len(x))), mid_hat) == pytest.approx(0.5, abs=1e-14)


def test_atom_pairs_to_value(mid_hat):
    assert pair(DualFunctional(atoms=[([0.5], 1.0)]), mid_hat) == pytest.approx(1.0, abs=1e-14)


def test_constant_flux_pairs_to_zero(mid_hat):
    assert pair(DualFunctional(flux=lambda x: np.ones_like(x)), mid_hat) == pytest.approx(0.0, abs=1e-14)


def test_atom_outside_domain(mid_hat):
    with pytest.raises(ValueError, match="outside"):
        pair(DualFunctional(atoms=[([1.5], 1.0)]), mid_hat)


def test_fe_density_is_integrated_exactly(rng):
    m = interval_from_points([0, 0.15, 0.5, 0.8, 1])
    f = FEFunction(LagrangeSpace(m, 3), rng.standard_normal(LagrangeSpace(m, 3).n_nodes))
    w = FEFunction(LagrangeSpace(m, 2), rng.standard_normal(LagrangeSpace(m, 2).n_nodes))
    # high-order quadrature of the product as a reference
    exact = pair(DualFunctional(density=lambda x: f(x) * w(x)), FEFunction.interpolate(LagrangeSpace(m, 1), lambda x: np.ones(len(x))), quad_order=30)
    assert pair(DualFunctional(density=f), w) == pytest.approx(exact, abs=1e-12)


def test_fe_density_from_finer_and_coarser_mesh(rng):
    coarse = square(2)
    fine = refine_n(coarse, 1)
    fc = FEFunction(LagrangeSpace(coarse, 2), rng.standard_normal(LagrangeSpace(coarse, 2).n_nodes))
    ff = FEFunction.interpolate(LagrangeSpace(fine, 2), fc)
    # same function stored on two nested meshes gives the same moments
    M1 = bernstein_moments(DualFunctional(density=fc), coarse, 3)
    M2 = bernstein_moments(DualFunctional(density=ff), coarse, 3)
    assert np.abs(M1 - M2).max() < 1e-12
    M3 = bernstein_moments(DualFunctional(density=fc), fine, 2)
    M4 = bernstein_moments(DualFunctional(density=ff), fine, 2)
    assert np.abs(M3 - M4).max() < 1e-12


def test_hat_pairings_against_closed_form():
    m = interval_from_points([0.0, 0.3, 1.0])
    sp = LagrangeSpace(m, 1)
    c = np.zeros(sp.n_nodes)
    c[np.argmin(np.abs(sp.node_coords[:, 0] - 0.3))] = 1.0
    w = FEFunction(sp, c)
    x = np.linspace(0, 1, 11)
    assert np.allclose(w(x[:, None]), hat(x, 0.0, 0.3, 1.0))
    # int x * hat = (0.3^2/3) + (1 - 0.3)(1 + 2*0.3)/6
    exact = 0.3**2 / 3 + 0.7 * (1 + 2 * 0.3) / 6
    assert pair(DualFunctional(density=lambda x: x[:, 0]), w) == pytest.approx(exact, abs=1e-14)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 10_000))
def test_bilinearity(a, b, seed):
    r = np.random.default_rng(seed)
    m = square(2)
    sp = LagrangeSpace(m, 2)
    w1, w2 = FEFunction(sp, r.standard_normal(sp.n_nodes)), FEFunction(sp, r.standard_normal(sp.n_nodes))
    x0 = r.uniform(0.1, 0.9, 2)
    xi = DualFunctional(density=lambda x: np.sin(x[:, 0]) + x[:, 1], flux=lambda x: np.stack([x[:, 1], -x[:, 0]], 1),
                        atoms=[(x0, 0.7)])
    eta = DualFunctional(density=w1)
    lhs = pair(a * xi + b * eta, w2)
    assert lhs == pytest.approx(a * pair(xi, w2) + b * pair(eta, w2), abs=1e-11 * (1 + abs(lhs)))
    assert pair(xi, a * w1 + b * w2) == pytest.approx(a * pair(xi, w1) + b * pair(xi, w2), abs=1e-11 * (1 + abs(lhs)))


def test_functional_algebra_and_immutability():
    f = DualFunctional(density=lambda x: x[:, 0])
    z = DualFunctional.zero()
    assert z.is_zero and not f.is_zero
    assert f.is_density_only and not DualFunctional(atoms=[([0.5], 1.0)]).is_density_only
    g = f - f
    assert len(g.densities) == 2
    with pytest.raises(AttributeError):
        f.densities = ()
    assert as_functional(f) is f
    assert isinstance(as_functional(lambda x: x[:, 0]), DualFunctional)


def test_atom_on_shared_vertex_uses_lowest_simplex():
    m = interval(2)
    M = bernstein_moments(DualFunctional(atoms=[([0.5], 2.0)]), m, 1)
    assert M[:, :].sum() == pytest.approx(2.0)
    assert np.count_nonzero(M.sum(axis=1)) == 1


def test_local_moments_shape(square8):
    M = local_moments(DualFunctional(density=lambda x: np.ones(len(x))), square8, np.eye(3), 1)
    assert M.shape == (8, 3)
    assert np.allclose(M.sum(axis=1), square8.volumes)

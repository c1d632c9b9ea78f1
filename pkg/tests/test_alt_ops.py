import numpy as np
import pytest

from szinterp.alt_ops import ClementInterpolator, L2Projector, apply_clement, apply_Pi2, ellipticity_ratio
from szinterp.assembly import mass_matrix
from szinterp.fespace import FEFunction, LagrangeSpace, norm
from szinterp.functional import DualFunctional, pair
from szinterp.mesh import interval_from_points, square
from szinterp.sz_ops import apply_Pi0

CASES = [(1, k) for k in (1, 2, 3)] + [(2, k) for k in (1, 2, 3)]


def mesh_for(d):
    return interval_from_points([0.0, 0.1, 0.25, 0.3, 0.55, 0.7, 0.92, 1.0]) if d == 1 else square(4)


def random_fe(space, rng):
    c = rng.standard_normal(space.n_nodes)
    c[space.boundary_mask] = 0.0
    return FEFunction(space, c)


def smooth(rng, d):
    a = rng.uniform(-3, 3, d)
    b = rng.uniform(-1, 1)
    return lambda x: np.sin(x @ a + b) + x[:, 0] ** 2


def inner(xi, fe):
    return pair(DualFunctional(density=xi), fe, quad_order=24)


@pytest.mark.parametrize("d,k", CASES)
def test_l2_projection_reproduces_and_is_self_adjoint(d, k, rng):
    op = L2Projector(k, quad_order=24).fit(mesh_for(d))
    v = random_fe(op.space_, rng)
    assert np.abs(op.transform(v).coeffs - v.coeffs).max() <= 1e-10
    for _ in range(5):
        f, g = smooth(rng, d), smooth(rng, d)
        lhs, rhs = inner(f, op.transform(g)), inner(g, op.transform(f))
        assert abs(lhs - rhs) <= 1e-10 * max(1, abs(lhs))


@pytest.mark.parametrize("d,k", [(1, 1), (1, 2), (2, 1)])
def test_l2_projection_is_best_approximation(d, k, rng):
    mesh = mesh_for(d)
    for _ in range(3):
        f = smooth(rng, d)
        e2 = norm(apply_Pi2(f, mesh, k), minus=f)
        e0 = norm(apply_Pi0(f, mesh, k), minus=f)
        assert e2 <= e0 * (1 + 1e-12)


@pytest.mark.parametrize("d", [1, 2])
def test_clement_lowest_order_formula(d, rng):
    mesh = mesh_for(d)
    op = ClementInterpolator(1).fit(mesh)
    sp = op.space_
    one = FEFunction(sp, np.ones(sp.n_nodes))
    f = smooth(rng, d)
    expected = np.zeros(sp.n_nodes)
    for i in sp.interior_nodes:
        e = np.zeros(sp.n_nodes)
        e[i] = 1.0
        bi = FEFunction(sp, e)
        expected[i] = inner(f, bi) / pair(DualFunctional(density=one), bi)
    got = ClementInterpolator(1, quad_order=24).fit(mesh).transform(f).coeffs
    assert np.abs(got - expected).max() <= 1e-12


@pytest.mark.parametrize("d,k", [c for c in CASES if c[1] > 1])
def test_clement_identity_on_lower_degree(d, k, rng):
    mesh = mesh_for(d)
    op = ClementInterpolator(k).fit(mesh)
    vl = random_fe(LagrangeSpace(mesh, k - 1), rng)
    vh = vl.raise_degree(op.space_)
    assert np.abs(op.transform(vh).coeffs - vh.coeffs).max() <= 1e-10


@pytest.mark.parametrize("d,k", CASES)
def test_clement_structure(d, k, rng):
    mesh = mesh_for(d)
    op = ClementInterpolator(k).fit(mesh)
    sp = op.space_
    K = op.matrix_
    assert np.abs((K - K.T).toarray()).max() <= 1e-10
    # constants preserved on interior simplices
    c1 = op.transform(lambda x: np.ones(len(x))).local_coeffs()[mesh.interior_simplices]
    assert c1.size and np.abs(c1 - 1.0).max() <= 1e-10
    # codomain has zero trace
    assert np.all(op.transform(smooth(rng, d)).coeffs[sp.boundary_mask] == 0)


@pytest.mark.parametrize("d,k", CASES)
def test_clement_self_adjoint_on_l2(d, k, rng):
    op = ClementInterpolator(k, quad_order=24).fit(mesh_for(d))
    for _ in range(5):
        f, g = smooth(rng, d), smooth(rng, d)
        lhs, rhs = inner(f, op.transform(g)), inner(g, op.transform(f))
        assert abs(lhs - rhs) <= 1e-10 * max(1, abs(lhs))


@pytest.mark.parametrize("d,k", CASES)
def test_clement_ellipticity(d, k, rng):
    op = ClementInterpolator(k).fit(mesh_for(d))
    M = mass_matrix(op.space_)
    ratios = [ellipticity_ratio(op.matrix_, M, random_fe(op.space_, rng).coeffs) for _ in range(50)]
    assert min(ratios) >= k / (2 * k + d)
    assert max(ratios) <= 1 + 1e-12


@pytest.mark.parametrize("d,k", [(1, 2), (2, 1), (2, 2)])
def test_clement_commutes_with_l2_projection(d, k, rng):
    mesh = mesh_for(d)
    C = ClementInterpolator(k, quad_order=24).fit(mesh)
    P = L2Projector(k, quad_order=24).fit(mesh)
    f = smooth(rng, d)
    cf = C.transform(f).coeffs
    scale = np.abs(cf).max()
    assert np.abs(C.transform(P.transform(f)).coeffs - cf).max() <= 1e-9 * scale
    assert np.abs(P.transform(C.transform(f)).coeffs - cf).max() <= 1e-9 * scale


@pytest.mark.parametrize("k", [1, 2])
def test_clement_locality(k):
    mesh = square(4)
    op = ClementInterpolator(k).fit(mesh)
    t = int(np.nonzero(mesh.interior_simplices)[0][0])
    sub = mesh.submesh([t])
    dens = FEFunction.interpolate(LagrangeSpace(sub, 1), lambda x: 1 + x[:, 0])
    c = op.transform(DualFunctional(density=dens)).coeffs
    allowed = set(op.space_.nodes_in(mesh.element_patch(t)).tolist())
    assert set(np.nonzero(np.abs(c) > 1e-14)[0].tolist()) <= allowed


@pytest.mark.parametrize("d,k", CASES)
def test_clement_is_not_a_projection(d, k, rng):
    op = ClementInterpolator(k).fit(mesh_for(d))
    v = random_fe(op.space_, rng)
    assert norm(op.transform(v), minus=v) > 1e-6


def test_wrappers(rng):
    mesh = mesh_for(1)
    f = smooth(rng, 1)
    assert np.allclose(apply_clement(f, mesh, 2).coeffs, ClementInterpolator(2).fit(mesh).transform(f).coeffs)
    assert apply_Pi2(f, mesh, 1).degree == 1


def test_l2_projector_needs_interior_nodes():
    with pytest.raises(ValueError):
        L2Projector(1).fit(interval_from_points([0.0, 1.0]))

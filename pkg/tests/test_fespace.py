import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from szinterp.fespace import FEFunction, LagrangeSpace, eval_fe, grad_fe, norm, norms
from szinterp.mesh import interval, refine_n, square, uniform_refine


@pytest.mark.parametrize("k,nodes,interior", [(1, 3, 1), (2, 5, 3)])
def test_space_sizes_1d(k, nodes, interior):
    sp = LagrangeSpace(interval(2), k)
    assert sp.n_nodes == nodes
    assert len(sp.interior_nodes) == interior


def test_two_triangles_have_no_interior_nodes(two_triangles):
    sp = LagrangeSpace(two_triangles, 1)
    assert sp.n_nodes == 4 and len(sp.interior_nodes) == 0


@pytest.mark.parametrize("k", [1, 2, 3])
def test_space_counts_2d(k):
    n = 4
    sp = LagrangeSpace(square(n), k)
    assert sp.n_nodes == (k * n + 1) ** 2
    assert len(sp.interior_nodes) == (k * n - 1) ** 2
    assert sp.local_to_global.shape == (2 * n * n, (k + 1) * (k + 2) // 2)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_boundary_nodes_lie_on_boundary(k, square32):
    sp = LagrangeSpace(square32, k)
    x = sp.node_coords
    on = np.isclose(x, 0).any(axis=1) | np.isclose(x, 1).any(axis=1)
    assert np.array_equal(on, sp.boundary_mask)


def test_node_supports(square32):
    sp = LagrangeSpace(square32, 2)
    for i in (0, 7, sp.n_nodes - 1):
        elems, local = sp.node_support(i)
        assert np.all(sp.local_to_global[elems, local] == i)
        assert sp.support_measure[i] == pytest.approx(square32.volumes[elems].sum())


def test_hat_and_gradient():
    sp = LagrangeSpace(interval(2), 1)
    c = np.zeros(sp.n_nodes)
    mid = int(np.argmin(np.abs(sp.node_coords[:, 0] - 0.5)))
    c[mid] = 1.0
    hat = FEFunction(sp, c)
    assert eval_fe(hat, [[0.5]])[0] == pytest.approx(1.0)
    ident = FEFunction.interpolate(sp, lambda x: x[:, 0])
    assert np.allclose(grad_fe(ident, [[0.1], [0.5], [0.9]]), 1.0)


def test_gradient_finite_differences(square32, rng):
    f = FEFunction.interpolate(LagrangeSpace(square32, 3), lambda x: np.sin(3 * x[:, 0]) * np.exp(x[:, 1]))
    x = rng.uniform(0.05, 0.95, (10, 2))
    g = f.grad(x)
    for j in range(2):
        e = np.zeros(2)
        e[j] = 1e-6
        fd = (f(x + e) - f(x - e)) / 2e-6
        # points that cross an element face make the quotient one-sided; keep the smooth ones
        assert np.median(np.abs(fd - g[:, j])) < 1e-6


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("d", [1, 2])
def test_interpolation_reproduces_polynomials(d, k, rng):
    mesh = interval(3) if d == 1 else square(3)
    powers = [(a, b) for a in range(k + 1) for b in range(k + 1 - a)] if d == 2 else [(a, 0) for a in range(k + 1)]
    coef = rng.standard_normal(len(powers))

    def poly(x):
        y = x[:, 1] if d == 2 else 0 * x[:, 0]
        return sum(c * x[:, 0] ** a * y**b for c, (a, b) in zip(coef, powers))

    f = FEFunction.interpolate(LagrangeSpace(mesh, k), poly)
    x = rng.uniform(0, 1, (200, d))
    assert np.abs(f(x) - poly(x)).max() < 1e-12


def test_continuity_across_faces(square32, rng):
    f = FEFunction(LagrangeSpace(square32, 3), rng.standard_normal(LagrangeSpace(square32, 3).n_nodes))
    t = np.linspace(0, 1, 7)[1:-1]
    # the diagonal of the cell [0.25, 0.5]^2 is an interior edge
    pts = np.column_stack([0.25 + 0.25 * t, 0.25 + 0.25 * t])
    m = square32
    vals = []
    for e in range(m.n_simplices):
        lam = m.barycentric(np.full(len(pts), e), pts)
        if (lam >= -1e-12).all():
            vals.append(f._eval_local(np.full(len(pts), e), lam))
    assert len(vals) == 2
    assert np.abs(vals[0] - vals[1]).max() < 1e-12


def test_nested_transfer_is_exact(square8, rng):
    sp = LagrangeSpace(square8, 2)
    f = FEFunction(sp, rng.standard_normal(sp.n_nodes))
    fine = uniform_refine(square8)
    g = FEFunction.interpolate(LagrangeSpace(fine, 2), f)
    x = rng.uniform(0, 1, (100, 2))
    assert np.abs(g(x) - f(x)).max() < 1e-12
    raised = f.raise_degree(LagrangeSpace(square8, 3))
    assert np.abs(raised(x) - f(x)).max() < 1e-12


def test_norm_closed_forms():
    m = interval(8)
    one = FEFunction.interpolate(LagrangeSpace(m, 1), lambda x: np.ones(len(x)))
    assert norm(one) == pytest.approx(1.0, abs=1e-14)
    s = lambda x: np.sin(np.pi * x[:, 0])
    ds = lambda x: np.pi * np.cos(np.pi * x)
    assert norm(s, mesh=m, quad_order=20) ** 2 == pytest.approx(0.5, abs=1e-10)
    assert norm(s, "H1semi", mesh=m, quad_order=20, grad=ds) ** 2 == pytest.approx(np.pi**2 / 2, abs=1e-8)
    assert norms(s, "L2", quad_order=20, mesh=m) == pytest.approx(np.sqrt(0.5), abs=1e-10)


def test_norm_of_difference_and_errors(square32):
    f = FEFunction.interpolate(LagrangeSpace(square32, 1), lambda x: x[:, 0])
    assert norm(f, minus=lambda x: x[:, 0]) < 1e-14
    with pytest.raises(ValueError):
        norm(lambda x: x[:, 0])
    with pytest.raises(ValueError):
        norm(f, "H2")
    with pytest.raises(ValueError):
        norm(lambda x: x[:, 0], "H1semi", mesh=square32)


def test_from_local_rejects_discontinuous(square8):
    sp = LagrangeSpace(square8, 1)
    local = np.random.default_rng(0).standard_normal(sp.local_to_global.shape)
    with pytest.raises(ValueError, match="discontinuous"):
        FEFunction.from_local(sp, local)


@settings(max_examples=20, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5), seed=st.integers(0, 1000))
def test_fe_arithmetic_is_linear(a, b, seed):
    sp = LagrangeSpace(interval(4), 2)
    r = np.random.default_rng(seed)
    f, g = FEFunction(sp, r.standard_normal(sp.n_nodes)), FEFunction(sp, r.standard_normal(sp.n_nodes))
    x = r.uniform(0, 1, (10, 1))
    lhs = (a * f + b * g)(x)
    assert np.allclose(lhs, a * f(x) + b * g(x), atol=1e-12 * (1 + abs(a) + abs(b)))
    assert np.allclose((f - g)(x), f(x) - g(x))
    assert np.allclose((-f)(x), -f(x))


def test_values_on_refined_and_unrelated_meshes(rng):
    coarse = square(2)
    sp = LagrangeSpace(coarse, 2)
    f = FEFunction(sp, rng.standard_normal(sp.n_nodes))
    lam = np.array([[0.2, 0.3, 0.5]])
    fine = refine_n(coarse, 2)
    other = square(3)
    for m in (fine, other):
        vals = f.values_at(m, lam)[:, 0]
        assert np.allclose(vals, f(m.quad_points(lam)[:, 0, :]), atol=1e-12)

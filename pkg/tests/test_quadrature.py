from math import factorial

import numpy as np
import pytest

from szinterp.quadrature import gauss_interval, simplex_rule


@pytest.mark.parametrize("d", [1, 2])
@pytest.mark.parametrize("order", [1, 2, 5, 9, 14])
def test_weights_sum_to_reference_volume(d, order):
    lam, w = simplex_rule(d, order)
    assert w.sum() == pytest.approx(1 / factorial(d), abs=1e-14)
    assert np.allclose(lam.sum(axis=1), 1.0, atol=1e-14)
    assert (lam >= -1e-15).all()


@pytest.mark.parametrize("order", [2, 5, 8, 11])
def test_monomials_exact_in_2d(order):
    lam, w = simplex_rule(2, order)
    x, y = lam[:, 1], lam[:, 2]
    for a in range(order + 1):
        for b in range(order + 1 - a):
            exact = factorial(a) * factorial(b) / factorial(a + b + 2)
            assert w @ (x**a * y**b) == pytest.approx(exact, rel=1e-12, abs=1e-15)


def test_gauss_interval_exactness():
    x, w = gauss_interval(5)
    for p in range(10):
        assert w @ x**p == pytest.approx(1 / (p + 1), rel=1e-13)

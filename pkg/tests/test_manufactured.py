import numpy as np
import pytest
import sympy

from roughell.coefficients import constant_operator
from roughell.manufactured import MANUFACTURED, bump, forcing, gaussian, odd_gaussian

X = sympy.symbols("x0:3", real=True)


def _symbolic(name, d):
    r2 = sum(v**2 for v in X[:d])
    if name == "gaussian":
        c = (0.3, -0.2, 0.1)[:d]
        return sympy.exp(-sum((v - ci) ** 2 for v, ci in zip(X, c)) / sympy.Rational(4, 5) ** 2), \
            gaussian(center=c, width=0.8)
    if name == "odd_gaussian":
        return X[0] * sympy.exp(-r2 / sympy.Rational(3, 2) ** 2), odd_gaussian(1.5)
    return sympy.exp(-1 / (1 - r2 / 4)), bump(radius=2.0)


@pytest.mark.parametrize("name", sorted(MANUFACTURED))
@pytest.mark.parametrize("d", [2, 3])
def test_derivatives_against_sympy(name, d, rng):
    expr, man = _symbolic(name, d)
    xs = X[:d]
    pts = rng.uniform(-1.2, 1.2, size=(d, 25))
    f0 = sympy.lambdify(xs, expr, "numpy")
    assert np.allclose(man.value(pts), f0(*pts), rtol=1e-12, atol=1e-14)
    for j in range(d):
        gj = sympy.lambdify(xs, sympy.diff(expr, xs[j]), "numpy")
        assert np.allclose(man.grad(pts)[j], gj(*pts), rtol=1e-11, atol=1e-13)
        for k in range(d):
            hjk = sympy.lambdify(xs, sympy.diff(expr, xs[j], xs[k]), "numpy")
            assert np.allclose(man.hess(pts)[j, k], hjk(*pts), rtol=1e-10, atol=1e-12)


def test_bump_support():
    b = bump(radius=1.0, center=[1.0, 0.0])
    pts = np.array([[2.5, 1.0, 0.0], [0.0, 0.0, 0.0]])
    v = b.value(pts)
    assert v[0] == 0.0 and v[2] == 0.0 and v[1] == pytest.approx(np.exp(-1.0))
    assert not np.any(b.hess(pts)[..., 0])


def test_forcing_constant_coefficients():
    A = np.array([[2.0, 0.5], [0.5, 1.0]])
    op = constant_operator(A, b=[1.0, -1.0], c=0.5)
    u = gaussian()
    x = np.array([[0.3], [0.7]])
    expect = np.einsum("jk,jkn->n", A, u.hess(x)) + u.grad(x)[0] - u.grad(x)[1] + (0.5 - 2.0) * u.value(x)
    assert np.allclose(forcing(op, u, 2.0)(x), expect)

import numpy as np
import pytest

from roughell.coefficients import CoefficientFamily, constant_operator
from roughell.diagnostics import boundary_grid
from roughell.grid import BoxGrid, GridFunction
from roughell.halfspace import (
    Dirichlet,
    HalfSpaceProblem,
    Neumann,
    Oblique,
    Robin,
    boundary_residual,
    cutoff,
    extend_data,
    full_box,
    half_box,
    lift_trace,
    oblique_estimate_ratio,
    restrict,
    robin_reduce,
    shift_xprime,
    smooth_step,
    solve,
    solve_dirichlet,
    solve_oblique,
    solve_robin,
    wall_derivative,
)
from roughell.manufactured import forcing, gaussian, odd_gaussian


@pytest.fixture
def half():
    return half_box(4.0, [(-np.pi, np.pi)], 33, [24])


@pytest.fixture
def fine():
    return half_box(4.0, [(-np.pi, np.pi)], 65, [48])


@pytest.fixture
def op():
    return constant_operator(np.array([[1.0, 0.3], [0.3, 0.8]]))


def _wall_data(grid, u, ell, sigma=0.0):
    gb = boundary_grid(grid)
    wall = np.concatenate([np.zeros((1,) + gb.shape), gb.coords()])
    g = np.einsum("j,j...->...", np.asarray(ell), u.grad(wall)) + sigma * u.value(wall)
    return GridFunction(gb, g)


def test_full_box_layout(half):
    full = full_box(half)
    assert full.sizes == (65, 24) and full.extents[0] == (-4.0, 4.0)
    assert full.axis(0)[32] == 0.0
    assert np.allclose(full.axis(0)[32:], half.axis(0))


@pytest.mark.parametrize("parity", ["odd", "even"])
def test_extension_round_trip(half, rng, parity):
    f = GridFunction(half, rng.normal(size=half.shape))
    ext = extend_data(f, parity)
    sign = -1 if parity == "odd" else 1
    assert np.array_equal(ext.values[:32], sign * ext.values[33:][::-1])
    back = restrict(ext, half)
    if parity == "odd":
        assert not np.any(back.values[0])
        assert np.array_equal(back.values[1:], f.values[1:])
    else:
        assert np.array_equal(back.values, f.values)
    with pytest.raises(ValueError):
        extend_data(f, "neither")


def test_shift_is_exact_translation(half, rng):
    gb = boundary_grid(half)
    x = gb.axis(0)
    rows = np.array([np.sin(2 * x) + np.cos(5 * x), np.cos(12 * x)])
    s = rng.uniform(-1, 1, size=(2, 1))
    out = shift_xprime(rows, gb, s)
    assert np.allclose(out[0], np.sin(2 * (x + s[0])) + np.cos(5 * (x + s[0])), atol=1e-12)
    # the Nyquist row is moved with cos and stays real
    assert np.abs(out[1].imag).max() < 1e-14
    assert np.allclose(shift_xprime(rows, gb, np.zeros((2, 1))), rows, atol=1e-14)


def test_wall_derivative_exact_on_quadratics(half):
    u = half.sample(lambda x: 2 + 3 * x[0] - x[0] ** 2 + np.sin(x[1]))
    assert np.allclose(wall_derivative(u), 3.0, atol=1e-12)


def test_smooth_step_and_cutoff():
    s = np.linspace(-0.5, 1.5, 2001)
    v, d1, d2 = smooth_step(s)
    assert np.all(v[s <= 0] == 0) and np.all(v[s >= 1] == 1)
    assert np.all(np.diff(v) >= 0)
    h = s[1] - s[0]
    assert np.abs(np.gradient(v, h) - d1)[5:-5].max() < 1e-4
    assert np.abs(np.gradient(d1, h) - d2)[5:-5].max() < 1e-3
    t = np.linspace(-2, 2, 801)
    c, c1, c2 = cutoff(t)
    assert np.all(c[np.abs(t) <= 0.5] == 1) and np.all(c[np.abs(t) >= 1] == 0)
    assert np.allclose(c, c[::-1]) and np.allclose(c1, -c1[::-1])


def test_problem_validation(half, op):
    whole = BoxGrid.whole_space((-1.0, 4.0), [(-np.pi, np.pi)], (33, 24))
    with pytest.raises(ValueError):
        HalfSpaceProblem(op, whole.zeros(), Dirichlet(), 1.0)
    with pytest.raises(ValueError):
        Oblique((0.0, 1.0))
    with pytest.raises(ValueError):
        Robin((-1.0, 0.0), 1.0)
    with pytest.raises(ValueError):
        HalfSpaceProblem(op, half.zeros(), Oblique((1.0, 0.0, 0.0)), 1.0)
    wrong = BoxGrid(((0.0, 1.0),), (8,), (True,))
    with pytest.raises(ValueError):
        HalfSpaceProblem(op, half.zeros(), Oblique((1.0, 0.0), wrong.zeros()), 1.0)
    p = HalfSpaceProblem(op, half.zeros(), Oblique((1.0, 0.0), 2.0), 1.0)
    assert np.all(p.bc.g.values == 2.0)
    with pytest.raises(ValueError):
        solve_dirichlet(p)


def test_lift_trace(half):
    gb = boundary_grid(half)
    g = gb.sample(lambda x: np.cos(x[0]) + 0.5)
    lift = lift_trace(g, 9.0, grid=half)
    assert not np.any(lift.v.values[0])
    assert np.array_equal(lift.wall_slope, g.values)
    assert lift.lambda_bar == 9.0 and lift_trace(g, 0.25, grid=half).lambda_bar == 1.0
    # the lift vanishes once sqrt(lam) x^1 >= 1
    assert not np.any(lift.v.values[half.axis(0) >= 1 / 3])
    assert lift_trace(g * 2.0, 9.0, grid=half).lhs == pytest.approx(2 * lift.lhs)


def test_lift_wall_slope_second_order():
    errs = []
    for m in (65, 129, 257):
        grid = half_box(4.0, [(-np.pi, np.pi)], m, [16])
        g = boundary_grid(grid).sample(lambda x: np.sin(x[0]))
        lift = lift_trace(g, 1.0, grid=grid)
        errs.append(np.abs(wall_derivative(lift.v) - g.values).max())
    assert np.all(np.log2(np.array(errs[:-1]) / np.array(errs[1:])) > 1.8)


def test_dirichlet_manufactured(half, op):
    u = odd_gaussian(0.8)
    sol = solve(HalfSpaceProblem(op, half.sample(forcing(op, u, 2.0)), Dirichlet(), 2.0))
    assert sol.diagnostics["trace"] < 1e-14
    assert sol.diagnostics["symmetry_defect"] < 1e-10
    assert np.abs(sol.u.values - u.sample(half).values).max() < 2e-2


def test_neumann_manufactured(half, op):
    u = gaussian(width=0.8)
    sol = solve(HalfSpaceProblem(op, half.sample(forcing(op, u, 2.0)), Neumann(), 2.0))
    assert sol.diagnostics["symmetry_defect"] < 1e-10
    assert np.abs(sol.u.values - u.sample(half).values).max() < 2e-2


def test_boundary_residual_exact_field(half):
    u = half.sample(lambda x: x[0] * (1 + np.sin(x[1])) + 0.5 * x[0] ** 2)
    g = boundary_grid(half).sample(lambda x: 1 + np.sin(x[0]))
    assert boundary_residual(u, [1.0, 0.7], g) < 1e-12


def test_oblique_scale_invariance(fine):
    op = CoefficientFamily("measurable_x1", seed=1, delta=0.3, x1_range=(0.0, 4.0)).draw()
    u = gaussian(center=[0.3, 0.2], width=0.8)
    f = fine.sample(forcing(op, u, 4.0))
    g = _wall_data(fine, u, [1.0, 0.5])
    a = solve_oblique(HalfSpaceProblem(op, f, Oblique((1.0, 0.5), g), 4.0))
    b = solve_oblique(HalfSpaceProblem(op, f, Oblique((2.0, 1.0), g * 2.0), 4.0))
    assert np.allclose(a.u.values, b.u.values, atol=1e-9)
    assert a.diagnostics["boundary_residual"] < 0.2
    assert np.abs(a.u.values - u.sample(fine).values).max() < 0.05


def test_oblique_normal_direction_matches_neumann(half, op):
    u = gaussian(width=0.8)
    f = half.sample(forcing(op, u, 2.0))
    # with ell = e_1 and g = 0 the shear reflection is the plain one; it coincides
    # with the even extension when a^{12} = 0 and stays close otherwise
    obl = solve_oblique(HalfSpaceProblem(op, f, Oblique((1.0, 0.0)), 2.0), tol=1e-12)
    neu = solve(HalfSpaceProblem(op, f, Neumann(), 2.0), tol=1e-12)
    op_sym = constant_operator(np.diag([1.0, 0.8]))
    f2 = half.sample(forcing(op_sym, u, 2.0))
    obl2 = solve_oblique(HalfSpaceProblem(op_sym, f2, Oblique((1.0, 0.0)), 2.0), tol=1e-12)
    neu2 = solve(HalfSpaceProblem(op_sym, f2, Neumann(), 2.0), tol=1e-12)
    assert np.allclose(obl2.u.values, neu2.u.values, atol=1e-9)
    assert np.abs(obl.u.values - neu.u.values).max() < 5e-2


def test_robin_manufactured_and_reduction(fine):
    op = constant_operator(np.array([[1.0, 0.2], [0.2, 0.9]]), b=[0.2, 0.0], c=-0.1, delta=0.5, K=0.5)
    u = gaussian(center=[0.3, 0.0], width=0.8)
    ell, sigma = (1.0, 0.4), 0.7
    f = fine.sample(forcing(op, u, 3.0))
    prob = HalfSpaceProblem(op, f, Robin(ell, sigma, _wall_data(fine, u, ell, sigma)), 3.0)
    red = robin_reduce(prob)
    assert isinstance(red.problem.bc, Oblique)
    assert red.K_bar > op.K
    h = red.h(fine.axis(0))[0]
    assert h[0] == 1.0 and np.all(h[fine.axis(0) >= 1.0] == h[-1])
    sol = solve_robin(prob)
    assert sol.diagnostics["boundary_residual"] < 0.2
    assert np.abs(sol.u.values - u.sample(fine).values).max() < 0.05


def test_robin_zero_sigma_is_oblique(half, op):
    f = gaussian(width=0.8).sample(half)
    g = boundary_grid(half).sample(lambda x: np.cos(x[0]))
    r = solve_robin(HalfSpaceProblem(op, f, Robin((1.0, 0.5), 0.0, g), 2.0))
    o = solve_oblique(HalfSpaceProblem(op, f, Oblique((1.0, 0.5), g), 2.0))
    assert np.array_equal(r.u.values, o.u.values)


def test_oblique_estimate_ratio(half, op):
    u = gaussian(width=0.8)
    f = half.sample(forcing(op, u, 2.0))
    g = _wall_data(half, u, [1.0, 0.5])
    sol = solve_oblique(HalfSpaceProblem(op, f, Oblique((1.0, 0.5), g), 2.0))
    r = oblique_estimate_ratio(sol.u, f, g, 2.0)
    assert 0 < r < np.inf
    assert oblique_estimate_ratio(sol.u * 3.0, f * 3.0, g * 3.0, 2.0) == pytest.approx(r)
    with pytest.raises(ValueError):
        oblique_estimate_ratio(sol.u, half.zeros(), 0.0, 2.0)

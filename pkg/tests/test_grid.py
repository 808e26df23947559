import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roughell.grid import (
    BoxGrid,
    GridFunction,
    diff,
    forward_modes,
    frequencies,
    gradient,
    hessian,
    inverse_modes,
    load_grid_function,
    lp_norm,
    save_grid_function,
    write_csv,
)


def test_spacing_and_nodes():
    g = BoxGrid.whole_space((-1.0, 1.0), [(0.0, 2 * np.pi)], (5, 8))
    assert g.spacing == pytest.approx((0.5, np.pi / 4))
    assert g.axis(0)[-1] == pytest.approx(1.0)
    # the periodic axis stops one step short of the right end
    assert g.axis(1)[-1] == pytest.approx(2 * np.pi - np.pi / 4)
    assert g.coords().shape == (2, 5, 8)


def test_rejects_bad_boxes():
    with pytest.raises(ValueError):
        BoxGrid(((0.0, 1.0),), (3,), (False,))
    with pytest.raises(ValueError):
        BoxGrid(((1.0, 1.0),), (8,), (False,))
    with pytest.raises(ValueError):
        BoxGrid(((0.0, 1.0), (0.0, 1.0)), (8,), (False, True))


def test_weights_sum_to_length():
    g = BoxGrid.whole_space((-3.0, 2.0), [(0.0, 1.5)], (11, 6))
    assert g.axis_weights(0).sum() == pytest.approx(5.0)
    assert g.axis_weights(1).sum() == pytest.approx(1.5)


def test_refine_keeps_nodes():
    g = BoxGrid.whole_space((-1.0, 1.0), [(0.0, 1.0)], (9, 8))
    r = g.refine()
    assert r.sizes == (17, 16)
    assert np.allclose(r.axis(0)[::2], g.axis(0))
    assert np.allclose(r.axis(1)[::2], g.axis(1))


def test_lp_norm_of_sine():
    # rectangle rule is exact for trigonometric polynomials: |sin|_2 on a period is sqrt(pi)
    g = BoxGrid(((0.0, 2 * np.pi),), (32,), (True,))
    u = g.sample(lambda x: np.sin(x[0]))
    assert lp_norm(u, 2) == pytest.approx(np.sqrt(np.pi), rel=1e-13)
    assert lp_norm(u, np.inf) == pytest.approx(1.0, abs=1e-2)
    with pytest.raises(ValueError):
        lp_norm(u, 0.5)


def test_lp_norm_region():
    g = BoxGrid(((0.0, 2.0),), (201,), (False,))
    u = g.sample(lambda x: np.ones_like(x[0]))
    assert lp_norm(u, 1, region=[(0.5, 1.5)]) == pytest.approx(1.0, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, 5).filter(lambda s: abs(s) > 1e-3), st.sampled_from([1.0, 2.0, 3.5, np.inf]))
def test_lp_norm_homogeneous(scale, p):
    g = BoxGrid.whole_space((-1.0, 1.0), [(0.0, 1.0)], (9, 8))
    u = g.sample(lambda x: np.cos(3 * x[0]) + x[1] ** 2)
    assert lp_norm(u * scale, p) == pytest.approx(abs(scale) * lp_norm(u, p), rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([1.0, 2.0, 4.0]))
def test_lp_norm_triangle(seed, p):
    g = BoxGrid.whole_space((-1.0, 1.0), [(0.0, 1.0)], (9, 8))
    rng = np.random.default_rng(seed)
    u = GridFunction(g, rng.normal(size=g.shape))
    v = GridFunction(g, rng.normal(size=g.shape))
    assert lp_norm(u + v, p) <= lp_norm(u, p) + lp_norm(v, p) + 1e-12


@pytest.mark.parametrize("periodic", [False, True])
def test_second_order_differences(periodic):
    errs = []
    for n in (32, 64, 128):
        g = BoxGrid(((0.0, 2 * np.pi),), (n,), (periodic,))
        u = g.sample(lambda x: np.sin(x[0]) + (0.0 if periodic else x[0] ** 3 / 20))
        x = g.axis(0)
        d1 = np.cos(x) + (0.0 if periodic else 3 * x**2 / 20)
        d2 = -np.sin(x) + (0.0 if periodic else 6 * x / 20)
        errs.append((np.abs(diff(u, 0, 1).values - d1).max(), np.abs(diff(u, 0, 2).values - d2).max()))
    errs = np.array(errs)
    orders = np.log2(errs[:-1] / errs[1:])
    assert np.all(orders > 1.8)


def test_hessian_symmetric_and_mixed():
    g = BoxGrid.whole_space((-1.0, 1.0), [(0.0, 2 * np.pi)], (65, 64))
    u = g.sample(lambda x: x[0] ** 2 * np.sin(x[1]))
    H = hessian(u).values
    assert np.array_equal(H[0, 1], H[1, 0])
    x = g.coords()
    assert np.abs(H[0, 1] - 2 * x[0] * np.cos(x[1])).max() < 5e-3
    G = gradient(u)
    assert G.rank == "vector" and G.values.shape == (2, 65, 64)


def test_modes_round_trip(box2, rng):
    u = GridFunction(box2, rng.normal(size=box2.shape) + 1j * rng.normal(size=box2.shape))
    back = inverse_modes(forward_modes(u, (1,)), (1,))
    assert np.allclose(back.values, u.values, atol=1e-13)
    # unitary scaling keeps the discrete l2 norm
    assert np.linalg.norm(forward_modes(u, (1,)).values) == pytest.approx(np.linalg.norm(u.values))


def test_frequencies_match_exponentials():
    g = BoxGrid(((0.0, 4.0),), (8,), (True,))
    xi = frequencies(g, 0)
    assert xi[1] == pytest.approx(2 * np.pi / 4)
    u = g.sample(lambda x: np.exp(1j * xi[1] * x[0]))
    hat = forward_modes(u, (0,)).values
    assert np.argmax(np.abs(hat)) == 1


def test_modes_need_periodic_axis(box2):
    with pytest.raises(ValueError):
        forward_modes(box2.zeros(), (0,))


def test_save_load_round_trip(tmp_path, box2, rng):
    u = GridFunction(box2, rng.normal(size=box2.shape))
    path = tmp_path / "u.rgh"
    save_grid_function(path, u)
    v = load_grid_function(path)
    assert v.grid == box2
    # values are stored in single precision
    assert np.abs(v.values - u.values).max() < 1e-6
    (tmp_path / "bad").write_bytes(b"nonsense")
    with pytest.raises(ValueError):
        load_grid_function(tmp_path / "bad")


def test_write_csv(tmp_path):
    g = BoxGrid.whole_space((0.0, 1.0), [(0.0, 1.0)], (4, 4))
    write_csv(tmp_path / "u.csv", g.sample(lambda x: x[0] + 1j * x[1]))
    lines = (tmp_path / "u.csv").read_text().splitlines()
    assert lines[0] == "x1,x2,re,im" and len(lines) == 17


def test_incompatible_grids(box2):
    other = BoxGrid.whole_space((-4.0, 4.0), [(-np.pi, np.pi)], (33, 32))
    with pytest.raises(ValueError):
        box2.zeros() + other.zeros()

import numpy as np
import pytest

from roughell.coefficients import CoefficientFamily
from roughell.vmo import Cylinder, box_centers, fit_omega, osc_xprime, vmo_modulus, vmo_report

E11 = np.array([[1.0, 0.0], [0.0, 0.0]])

# 2 / (2r)^2 * int int |sin(y^2) - sin(z^2)| over [0.5, 1.5]^2, adaptive quadrature
OSC_SIN_SQUARED = 0.53244357595


def _scalar(fn, E=E11):
    return lambda x: fn(x) * E[(...,) + (None,) * (x.ndim - 1)]


def test_osc_against_quadrature():
    est = osc_xprime(_scalar(lambda x: np.sin(x[1] ** 2)), Cylinder((0.3, 1.0), 0.5), samples=4096)
    assert abs(est.value - OSC_SIN_SQUARED) <= 4 * est.stderr + 1e-4


def test_osc_linear_in_xprime_two_dims():
    # E|y - z| for y, z uniform on an interval of length 2r is 2r/3
    r = 0.7
    est = osc_xprime(_scalar(lambda x: x[1]), Cylinder((1.0, -2.0), r), samples=4096)
    assert abs(est.value - 4 * r / 3) <= 4 * est.stderr + 1e-4


def test_osc_linear_in_xprime_three_dims():
    # one coordinate of a uniform point in a disk of radius r has the semicircle law;
    # E|y - z| for two independent draws is 256 r / (45 pi^2)
    r = 0.5
    E = np.zeros((3, 3))
    E[0, 0] = 1.0
    est = osc_xprime(_scalar(lambda x: x[1], E), Cylinder((0.0, 0.0, 0.0), r), samples=4096)
    assert abs(est.value - 2 * 256 * r / (45 * np.pi**2)) <= 4 * est.stderr + 1e-4


def test_osc_zero_for_x1_only_coefficients():
    op = CoefficientFamily("measurable_x1", seed=0).draw()
    assert osc_xprime(op, Cylinder((0.1, 0.0), 1.0)).value == 0.0


def test_osc_seeded_and_scaling():
    a = _scalar(lambda x: np.cos(3 * x[1]))
    Q = Cylinder((0.0, 0.4), 0.3)
    assert osc_xprime(a, Q, seed=3) == osc_xprime(a, Q, seed=3)
    doubled = osc_xprime(_scalar(lambda x: 2 * np.cos(3 * x[1])), Q, seed=3)
    assert doubled.value == pytest.approx(2 * osc_xprime(a, Q, seed=3).value, rel=1e-12)


def test_bad_inputs():
    with pytest.raises(ValueError):
        Cylinder((0.0, 0.0), 0.0)
    with pytest.raises(ValueError):
        osc_xprime(_scalar(lambda x: x[1]), Cylinder((0.0, 0.0), 1.0), samples=16)
    with pytest.raises(ValueError):
        vmo_modulus(_scalar(lambda x: x[1]), 0.5, box_centers([(0, 1), (0, 1)], [2, 2]), [1.0])


def test_box_centers():
    c = box_centers([(-1, 1), (0, 2)], [3, 1])
    assert c.shape == (2, 3)
    assert np.allclose(c[0], [-1, 0, 1]) and np.allclose(c[1], 1.0)


def test_modulus_picks_worst_center():
    a = _scalar(lambda x: np.where(x[0] > 0, x[1], 0.0))
    est = vmo_modulus(a, 1.0, box_centers([(-2, 2), (0, 0)], [5, 1]), [1.0, 0.5])
    assert est.center[0] >= 1.0 and est.radius == 1.0


def test_report_is_monotone():
    fam = CoefficientFamily("vmo_oscillatory", seed=4, epsilon=0.15)
    rep = vmo_report(fam.draw(), [0.125, 1.0, 0.25, 0.5], box_centers([(-3, 3), (-3, 3)], [3, 3]), samples=256)
    assert list(rep.radii) == [1.0, 0.5, 0.25, 0.125]
    assert np.all(np.diff(rep.modulus) <= 0)
    rows = list(rep.rows())
    assert len(rows) == 4 and all(len(r) == 4 for r in rows)
    assert np.all(rep.omega_fit >= rep.modulus - 1e-15)


def test_fit_omega_envelope():
    om = fit_omega({0.5: 0.2, 0.25: 0.3, 1.0: 0.25})
    # least non-decreasing majorant
    assert om(0.25) == pytest.approx(0.3) and om(0.5) == pytest.approx(0.3) and om(1.0) == pytest.approx(0.3)
    assert om(2.0) == pytest.approx(0.3)
    assert 0.0 <= om(0.0) <= om(0.1) <= om(0.25)
    lin = fit_omega([(0.5, 0.1), (1.0, 0.2)])
    assert lin(0.0) == pytest.approx(0.0) and lin(0.25) == pytest.approx(0.05)
    with pytest.raises(ValueError):
        fit_omega({})

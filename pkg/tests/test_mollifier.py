import math

import numpy as np
import pytest

from bogotool.mollifier import make_mollifier, sphere_area


def test_sphere_area():
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)


@pytest.mark.parametrize("n", [1, 2])
def test_unit_mass(n):
    m = make_mollifier(n)
    # oracle: midpoint sum on a fine grid covering the support
    N = 4001 if n == 1 else 1201
    s = np.linspace(-m.radius, m.radius, N + 1)
    c = 0.5 * (s[1:] + s[:-1])
    h = s[1] - s[0]
    if n == 1:
        total = m(c[:, None]).sum() * h
    else:
        X = np.stack(np.meshgrid(c, c, indexing="ij"), -1)
        total = m(X).sum() * h * h
    assert total == pytest.approx(1.0, abs=1e-9)


def test_support_and_gradient():
    m = make_mollifier(2)
    assert m(np.array([m.radius, 0.0])) == 0.0
    x = np.array([0.05, -0.03])
    h = 1e-7
    fd = [(m(x + h * e) - m(x - h * e)) / (2 * h) for e in np.eye(2)]
    assert np.allclose(m.gradient(x), fd, rtol=1e-6)


def test_derivative_sups_frozen():
    m = make_mollifier(2)
    # derived by the module's own grid search; recorded for regressions
    assert m.c_norm == pytest.approx(53.589, rel=1e-4)
    g0, g1, h2, _ = m.deriv_sup
    assert g0 == pytest.approx(m.c_norm * math.exp(-1))
    assert g1 == pytest.approx(213.9, rel=1e-3)
    assert h2 == pytest.approx(10382.5, rel=1e-4)


def test_hessian_sup_bounds_sampled_hessian():
    m = make_mollifier(2)
    rng = np.random.default_rng(0)
    x = rng.uniform(-m.radius, m.radius, (2000, 2))
    h = 1e-5
    worst = 0.0
    for xi in x[:300]:
        H = np.array([(m.gradient(xi + h * e) - m.gradient(xi - h * e)) / (2 * h) for e in np.eye(2)])
        worst = max(worst, np.max(np.abs(np.linalg.eigvalsh(0.5 * (H + H.T)))))
    assert worst <= m.hessian_sup * (1 + 1e-6)


def test_scaled_mass_preserved():
    m = make_mollifier(1)
    sm = m.scaled(3.0, center=[1.0])
    s = np.linspace(1 - sm.radius, 1 + sm.radius, 20001)
    assert np.trapezoid(sm(s[:, None]), s) == pytest.approx(1.0, abs=1e-9)
    assert sm.amplitude == pytest.approx(m.c_norm / 3)

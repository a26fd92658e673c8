import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize

from bogotool.errors import DomainError, SingularityError
from bogotool.nfunc import (
    NFunctionPD,
    conjugate_argmax,
    conjugate_eval,
    delta2_estimate,
    equivalence_ratios,
    luxemburg_norm,
    modular,
    phi_eval,
    phi_prime,
    phi_second,
    phi_second_times,
    young_check,
)

ps = st.floats(1.05, 3.0)
deltas = st.floats(0.0, 5.0)
ts = st.floats(0.0, 1e3)


def quad_phi(p, d, t):
    # oracle: adaptive quadrature of phi'(s) = (delta + s)^(p-2) s
    val, _ = integrate.quad(lambda s: (d + s) ** (p - 2) * s, 0.0, t, epsrel=1e-13, epsabs=0, limit=200)
    return val


def brute_conjugate(nf, s):
    # oracle: direct maximisation of s t - phi(t)
    res = optimize.minimize_scalar(lambda t: -(s * t - phi_eval(nf, t)), bounds=(0, 10 * max(s, 1.0) ** 3),
                                   method="bounded", options={"xatol": 1e-12})
    return -res.fun


@pytest.mark.parametrize("p,d,t", [(1.5, 0.1, 2.0), (1.2, 0.0, 0.3), (2.0, 1.0, 5.0), (3.0, 0.5, 1e-4),
                                   (1.1, 2.0, 1e-6), (2.5, 0.01, 100.0)])
def test_phi_matches_quadrature(p, d, t):
    assert phi_eval(NFunctionPD(p, d), t) == pytest.approx(quad_phi(p, d, t), rel=1e-10)


def test_phi_closed_forms():
    assert phi_eval(NFunctionPD(2.0, 0.0), 3.0) == pytest.approx(4.5, rel=1e-15)
    assert phi_eval(NFunctionPD(1.5, 0.0), 4.0) == pytest.approx(8.0 / 1.5, rel=1e-15)
    # delta > 0, p = 2: phi = t^2/2 for every delta
    assert phi_eval(NFunctionPD(2.0, 7.0), 3.0) == pytest.approx(4.5, rel=1e-14)


def test_series_branch_continuity():
    nf = NFunctionPD(1.5, 1.0)
    t = np.array([0.5 - 1e-12, 0.5 + 1e-12])
    a, b = phi_eval(nf, t)
    assert abs(a - b) < 1e-11


def test_phi_tiny_argument_no_cancellation():
    nf = NFunctionPD(1.3, 1.0)
    # phi(t) ~ delta^(p-2) t^2 / 2 for t << delta
    assert phi_eval(nf, 1e-9) == pytest.approx(0.5e-18, rel=1e-8)


def test_derivatives_against_differences():
    nf = NFunctionPD(1.7, 0.3)
    t, h = 0.8, 1e-5
    fd1 = (phi_eval(nf, t + h) - phi_eval(nf, t - h)) / (2 * h)
    fd2 = (phi_prime(nf, t + h) - phi_prime(nf, t - h)) / (2 * h)
    assert phi_prime(nf, t) == pytest.approx(fd1, rel=1e-9)
    assert phi_second(nf, t) == pytest.approx(fd2, rel=1e-8)


def test_phi_second_singular_at_zero():
    with pytest.raises(SingularityError):
        phi_second(NFunctionPD(1.5, 0.0), 0.0)
    assert phi_second(NFunctionPD(2.0, 0.0), 0.0) == 1.0
    assert phi_second_times(NFunctionPD(1.5, 0.0), 0.0, 0.0) == 0.0


def test_invalid_parameters():
    with pytest.raises(DomainError):
        NFunctionPD(1.0, 0.1)
    with pytest.raises(DomainError):
        NFunctionPD(1.5, -0.1)
    with pytest.raises(DomainError):
        phi_eval(NFunctionPD(1.5, 0.1), -1.0)


def test_shift_collapses_to_larger_delta():
    nf = NFunctionPD(1.4, 0.2)
    t = np.logspace(-4, 3, 50)
    for a in (0.0, 0.3, 5.0):
        shifted = nf.shifted(a)
        ref = np.array([integrate.quad(lambda s: phi_prime(nf, a + s) * s / (a + s), 0, x,
                                       epsrel=1e-13, limit=200)[0] for x in t])
        assert np.allclose(shifted(t), ref, rtol=1e-9, atol=0)
        assert np.allclose(shifted(t), phi_eval(NFunctionPD(1.4, 0.2 + a), t), rtol=1e-12, atol=0)


@pytest.mark.parametrize("p,d", [(1.5, 0.1), (2.0, 0.0), (1.2, 1.0), (2.5, 0.3)])
def test_conjugate_against_brute_force(p, d):
    nf = NFunctionPD(p, d)
    for s in (0.01, 0.5, 3.0):
        assert conjugate_eval(nf, s) == pytest.approx(brute_conjugate(nf, s), rel=1e-7)


def test_conjugate_closed_form_delta_zero():
    nf = NFunctionPD(1.5, 0.0)
    s = np.array([0.1, 1.0, 7.0])
    assert np.allclose(conjugate_eval(nf, s), s**3 / 3, rtol=1e-9)


@settings(max_examples=60, deadline=None)
@given(ps, deltas, st.floats(1e-3, 1e3))
def test_fenchel_young_equality(p, d, t):
    nf = NFunctionPD(p, d)
    s = phi_prime(nf, t)
    assert phi_eval(nf, t) + conjugate_eval(nf, s) == pytest.approx(t * s, rel=1e-6)


@settings(max_examples=60, deadline=None)
@given(ps, deltas, ts, ts)
def test_phi_convex_and_increasing(p, d, a, b):
    nf = NFunctionPD(p, d)
    lo, hi = min(a, b), max(a, b)
    assert phi_eval(nf, lo) <= phi_eval(nf, hi) * (1 + 1e-12)
    mid = phi_eval(nf, 0.5 * (a + b))
    assert mid <= 0.5 * (phi_eval(nf, a) + phi_eval(nf, b)) * (1 + 1e-12) + 1e-300


def test_conjugate_argmax_inverts_derivative():
    nf = NFunctionPD(1.6, 0.4)
    t = np.array([1e-3, 0.2, 5.0, 300.0])
    assert np.allclose(conjugate_argmax(nf, phi_prime(nf, t)), t, rtol=1e-9)


def test_delta2_constants():
    # for p <= 2 the sup of phi(2t)/phi(t) is 4 (attained as t -> 0)
    assert delta2_estimate(NFunctionPD(1.5, 1.0)) == pytest.approx(4.0, rel=1e-4)
    assert delta2_estimate(NFunctionPD(1.5, 0.0)) == pytest.approx(2**1.5, rel=1e-12)
    # conjugate of phi_{3/2,0} is s^3/3
    assert delta2_estimate(NFunctionPD(1.5, 0.0), conjugate=True) == pytest.approx(8.0, rel=1e-6)


def test_equivalence_ratio_bounds():
    r = equivalence_ratios(NFunctionPD(1.5, 0.2))
    lo, hi = r["second_over_first"]
    assert 0.5 - 1e-9 <= lo <= hi <= 1.0 + 1e-9
    lo, hi = r["first_over_value"]
    assert 1.5 - 1e-9 <= lo <= hi <= 2.0 + 1e-9


def test_modular_and_luxemburg():
    nf = NFunctionPD(2.0, 0.0)
    field = np.full(100, 3.0)
    rho = modular(nf, field, cell_volume=0.01)
    assert float(rho) == pytest.approx(4.5)
    # ||f||: sum (3/lam)^2/2 * 1 = 1  ->  lam = 3/sqrt(2)
    assert luxemburg_norm(nf, field, cell_volume=0.01) == pytest.approx(3 / math.sqrt(2), rel=1e-7)
    assert luxemburg_norm(nf, np.zeros(5), cell_volume=1.0) == 0.0
    with pytest.raises(ValueError):
        modular(nf, field)


@pytest.mark.parametrize("eps", [0.1, 1.0])
def test_young_constants_power_case(eps):
    # delta = 0: first inequality has c = eps^(-1/(p-1)); p = 2 second has c = 4/eps
    rep = young_check(NFunctionPD(1.5, 0.0), eps, num_samples=2000)
    assert rep.passed
    assert rep.c_eps_first == pytest.approx(eps ** (-2.0), rel=1e-6)
    rep = young_check(NFunctionPD(2.0, 0.0), eps, num_samples=2000)
    assert rep.c_eps_first == pytest.approx(1 / eps, rel=1e-9)
    assert rep.c_eps_second == pytest.approx(4 / eps, rel=1e-9)


def test_young_rejects_nonpositive_eps():
    with pytest.raises(DomainError):
        young_check(NFunctionPD(1.5, 0.1), 0.0)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bogotool.errors import DomainError
from bogotool.grid import UniformGrid, UniformGridField
from bogotool.nfunc import NFunctionPD, phi_eval
from bogotool.tensor import (
    StressModel,
    calibrate,
    coercivity_ratio_ranges,
    diffquot_equiv,
    f_assoc,
    frob,
    hammer_quantities,
    hammer_ratio_ranges,
    hammer_seed_spread,
    random_pairs,
    stress,
    stress_derivative,
    sym,
)

mats = arrays(np.float64, (2, 2), elements=st.floats(-10, 10))


def test_linear_case_is_identity_on_sym():
    m = StressModel.power_law(2.0, 0.0)
    P = np.array([[1.0, 2.0], [0.0, -3.0]])
    assert np.allclose(stress(m, P), sym(P))
    assert np.allclose(f_assoc(m, P), sym(P))


def test_stress_zero_tensor():
    m = StressModel.power_law(1.5, 0.0)
    assert np.all(stress(m, np.zeros((2, 2))) == 0)
    assert np.all(np.isfinite(f_assoc(m, np.zeros((3, 2, 2)))))


@settings(max_examples=50, deadline=None)
@given(mats, mats, st.floats(1.1, 2.0), st.floats(0.0, 2.0))
def test_stress_is_monotone(P, Q, p, d):
    m = StressModel.power_law(p, d)
    assert np.sum((stress(m, P) - stress(m, Q)) * (P - Q)) >= -1e-9 * (1 + frob(P) + frob(Q)) ** p


@settings(max_examples=50, deadline=None)
@given(mats, st.floats(1.1, 2.0), st.floats(0.0, 2.0))
def test_f_squared_matches_phi_structure(P, p, d):
    m = StressModel.power_law(p, d)
    t = frob(sym(P))
    expect = (d + t) ** (p - 2) * t**2 if t > 0 else 0.0
    assert frob(f_assoc(m, P)) ** 2 == pytest.approx(expect, rel=1e-12, abs=1e-300)


def test_stress_derivative_against_differences():
    m = StressModel.power_law(1.6, 0.2, mu=1.3)
    rng = np.random.default_rng(3)
    P = rng.normal(size=(2, 2))
    D = stress_derivative(m, P)
    h = 1e-6
    for k in range(2):
        for l in range(2):
            E = np.zeros((2, 2))
            E[k, l] = h
            fd = (stress(m, P + E) - stress(m, P - E)) / (2 * h)
            assert np.allclose(D[:, :, k, l], fd, rtol=1e-7, atol=1e-9)
    with pytest.raises(DomainError):
        stress_derivative(m, np.array([[0.0, 1.0], [-1.0, 0.0]]))


def test_power_law_validation():
    with pytest.raises(DomainError):
        StressModel.power_law(1.5, 0.1, mu=0.0)


def test_hammer_linear_case_frozen():
    # p = 2, delta = 0: monotone = |F(P)-F(Q)|^2 = 2 phi_{|P|}(|P-Q|) = phi''|P-Q|^2
    r = hammer_ratio_ranges(StressModel.power_law(2.0, 0.0))
    for key, val in (("f_gap/monotone", 1.0), ("shifted/monotone", 0.5), ("second/monotone", 1.0),
                     ("stress_gap/shifted_prime", 1.0)):
        assert r[key][0] == pytest.approx(val, rel=1e-12)
        assert r[key][1] == pytest.approx(val, rel=1e-12)


def test_hammer_ranges_are_delta_invariant():
    # the pair law scales with delta and every ratio is invariant under
    # (P, Q, delta) -> (lam P, lam Q, lam delta)
    a = hammer_ratio_ranges(StressModel.power_law(1.3, 0.01))
    b = hammer_ratio_ranges(StressModel.power_law(1.3, 1.0))
    for key in a:
        assert np.allclose(a[key], b[key], rtol=1e-8)


def test_hammer_seed_spread_small():
    runs, spread = hammer_seed_spread(StressModel.power_law(1.5, 0.1), num=4000)
    assert len(runs) == 3
    assert 0 <= spread < 0.1


def test_hammer_quantities_shapes_and_zero_difference():
    m = StressModel.power_law(1.5, 0.1)
    P = np.eye(2)[None].repeat(3, axis=0)
    hq = hammer_quantities(m, P, P)
    for field in ("monotone", "f_gap", "shifted", "second", "stress_gap", "shifted_prime"):
        assert np.allclose(getattr(hq, field), 0.0)


def test_random_pairs_cover_aligned_set():
    rng = np.random.default_rng(0)
    P, Q = random_pairs(rng, 1000, scale=0.1)
    assert P.shape == Q.shape == (1000, 2, 2)
    cos = np.sum(P * Q, axis=(1, 2)) / (frob(P) * frob(Q))
    assert np.mean(np.abs(cos) > 0.99) > 0.4


def test_calibrate_gamma0_at_least_one():
    # for p <= 2 the quadratic form over phi'' is minimised (= 1) on Q parallel to P^sym
    m = calibrate(StressModel.power_law(1.5, 0.1), num=2000)
    assert m.gamma0_est >= 1 - 1e-12
    assert np.isfinite(m.gamma1_est)


def test_coercivity_ranges():
    r = coercivity_ratio_ranges(StressModel.power_law(1.5, 0.1), num=2000)
    # S(Q).Q = |F(Q)|^2 exactly for this family
    assert r["SQ.Q/|F|^2"][0] == pytest.approx(1.0, rel=1e-12)
    assert r["SQ.Q/|F|^2"][1] == pytest.approx(1.0, rel=1e-12)
    lo, hi = r["SQ.Q/phi"]
    assert 1.5 - 1e-9 <= lo <= hi <= 2.0 + 1e-9


def test_diffquot_equiv_on_smooth_field():
    g = UniformGrid.cell_centered((0, 0), (1, 1), 32)
    x = g.coords()
    Du = np.zeros(g.dims + (2, 2))
    Du[..., 0, 0] = np.sin(2 * np.pi * x[..., 0])
    Du[..., 1, 1] = -Du[..., 0, 0]
    Du[..., 0, 1] = Du[..., 1, 0] = np.cos(np.pi * x[..., 1])
    out = diffquot_equiv(StressModel.power_law(1.5, 0.1), UniformGridField(g, Du), g.spacing, 0)
    assert out["points"] > 0
    for key in ("a/b", "a/c", "a/e"):
        lo, hi = out[key]
        assert 0 < lo <= hi < np.inf
    with pytest.raises(DomainError):
        diffquot_equiv(StressModel.power_law(1.5, 0.1), UniformGridField(g, Du[..., 0, 0]), g.spacing, 0)


def test_phi_consistency_with_model():
    m = StressModel.power_law(1.7, 0.3)
    assert m.nf == NFunctionPD(1.7, 0.3)
    assert phi_eval(m.nf, 1.0) > 0

import functools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bogotool.errors import DomainError, PreconditionError
from bogotool.grid import (
    ANALYTIC_FAMILY,
    UniformGrid,
    UniformGridField,
    analytic_family,
    commute_check,
    curl2d,
    delta_quot,
    diff_quot,
    divergence,
    gradient,
    inner_mask,
    modular_dq_inequality,
    partial_integration_check,
    product_rule_check,
    shift,
    steps_of,
    sym_gradient,
)
from bogotool.nfunc import NFunctionPD, phi_eval


@pytest.fixture(scope="module")
def g64():
    return UniformGrid.cell_centered((0.0, 0.0), (1.0, 1.0), 64)


def test_cell_centered_geometry():
    g = UniformGrid.cell_centered((0.0, 0.0), (1.0, 2.0), (4, 8))
    assert g.spacing == 0.25
    assert g.dims == (4, 8)
    assert np.allclose(g.lower, 0) and np.allclose(g.upper, (1, 2))
    assert g.coords()[0, 0, 0] == pytest.approx(0.125)
    with pytest.raises(DomainError):
        UniformGrid.cell_centered((0, 0), (1, 2), 4)


def test_field_validation(g64):
    with pytest.raises(DomainError):
        UniformGridField(g64, np.zeros((63, 64)))
    with pytest.raises(DomainError):
        UniformGridField(g64, np.zeros((64, 64, 3)))
    f = UniformGridField(g64, np.ones((64, 64)), support_box=((0, 0), (0.5, 0.5)))
    assert f.values.sum() == 32 * 32
    with pytest.raises(ValueError):
        f.values[0, 0] = 2.0


def test_steps_of(g64):
    assert steps_of(g64, 3 * g64.spacing) == 3
    with pytest.raises(DomainError):
        steps_of(g64, 1.5 * g64.spacing)
    with pytest.raises(DomainError):
        steps_of(g64, 0.0)


def test_shift_zero_extension():
    v = np.arange(5.0)
    assert np.array_equal(shift(v, 0, 2, 1), [2, 3, 4, 0, 0])
    assert np.array_equal(shift(v, 0, 2, -1), [0, 0, 0, 1, 2])
    assert np.array_equal(shift(v, 0, 9, 1), np.zeros(5))


def test_diff_quot_exact_on_linear_inside(g64):
    x = g64.coords()
    F = UniformGridField(g64, 3 * x[..., 0] - 2 * x[..., 1])
    h = 2 * g64.spacing
    inner = inner_mask(g64, 0, 2, 1)
    dq = diff_quot(F, 0, h, 1).values
    assert np.allclose(dq[inner], 3.0, rtol=0, atol=1e-12)
    # zero extension at the far edge: (0 - F)/h
    assert np.allclose(dq[~inner], -F.values[~inner] / h)
    assert np.allclose(delta_quot(F, 1, h, -1).values[inner_mask(g64, 1, 2, -1)], 2 * h)


def test_gradient_divergence_curl_on_polynomials(g64):
    x = g64.coords()
    psi = UniformGridField(g64, x[..., 0] ** 2 * x[..., 1])
    G = gradient(psi).values
    assert np.allclose(G[..., 0], 2 * x[..., 0] * x[..., 1], atol=1e-12)
    assert np.allclose(G[..., 1], x[..., 0] ** 2, atol=1e-12)
    u = curl2d(psi)
    # centred differences commute, so div curl vanishes in the interior
    div = divergence(u).values
    assert np.max(np.abs(div[2:-2, 2:-2])) < 1e-10
    E = sym_gradient(u).values
    assert np.allclose(E, np.swapaxes(E, -1, -2))
    with pytest.raises(DomainError):
        curl2d(u)


@pytest.mark.parametrize("sign", [1, -1])
@pytest.mark.parametrize("m", [1, 2, 5])
def test_product_rule_and_commutation(g64, sign, m):
    fam = [F for F, _ in analytic_family(g64).values()]
    h = m * g64.spacing
    for F in fam:
        for k in range(2):
            assert commute_check(F, k, h, sign) <= 1e-12
            assert product_rule_check(F, fam[0], k, h, sign) <= 1e-10


def _bumped(g, margin):
    x = g.coords()
    t = (x - (g.lower + margin)) / (g.upper - g.lower - 2 * margin)
    b = np.prod(np.where((t > 0) & (t < 1), np.sin(np.pi * t) ** 2, 0.0), axis=-1)
    return b


def test_partial_integration(g64):
    b = _bumped(g64, 4 * g64.spacing)
    fam = [F.with_values(F.values * b) for F, _ in analytic_family(g64).values()]
    for m in (1, 2, 3):
        for k in range(2):
            assert partial_integration_check(fam[1], fam[3], m * g64.spacing, k) <= 1e-10
    raw = analytic_family(g64)["log"][0]
    with pytest.raises(PreconditionError):
        partial_integration_check(raw, raw, g64.spacing, 0)


def test_analytic_family_derivatives(g64):
    # oracle: centred differences of the sampled function
    h = g64.spacing
    for name, (F, dF) in analytic_family(g64).items():
        fd = np.gradient(F.values, h, axis=0)[2:-2, 2:-2]
        assert np.allclose(fd, dF[0].values[2:-2, 2:-2], rtol=0, atol=5e-3 * (1 + np.abs(fd).max())), name
        fd = np.gradient(F.values, h, axis=1)[2:-2, 2:-2]
        assert np.allclose(fd, dF[1].values[2:-2, 2:-2], rtol=0, atol=5e-3 * (1 + np.abs(fd).max())), name
    assert len(ANALYTIC_FAMILY) == 5


@pytest.mark.parametrize("p,d", [(1.5, 0.1), (2.0, 0.0), (1.2, 0.01)])
def test_modular_inequality(g64, p, d):
    psi = functools.partial(phi_eval, NFunctionPD(p, d))
    for F, dF in analytic_family(g64).values():
        for k in range(2):
            r = modular_dq_inequality(psi, F, k, 2 * g64.spacing, 4 * g64.spacing, dF[k], rtol=0.0)
            assert r.passed and r.lhs <= r.rhs


def test_modular_inequality_argument_checks(g64):
    psi = functools.partial(phi_eval, NFunctionPD(2.0, 0.0))
    F, dF = analytic_family(g64)["cubic"]
    with pytest.raises(DomainError):
        modular_dq_inequality(psi, F, 0, 2 * g64.spacing, g64.spacing, dF[0])
    with pytest.raises(DomainError):
        modular_dq_inequality(psi, F, 0, g64.spacing, 0.6, dF[0])


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(0, 1), st.sampled_from([1, -1]), st.integers(0, 2**32 - 1))
def test_summation_by_parts_random(m, k, sign, seed):
    g = UniformGrid.cell_centered((0, 0), (1, 1), 24)
    rng = np.random.default_rng(seed)
    pad = np.zeros(g.dims)
    pad[7:-7, 7:-7] = 1
    F = UniformGridField(g, rng.normal(size=g.dims) * pad)
    G = UniformGridField(g, rng.normal(size=g.dims) * pad)
    assert partial_integration_check(F, G, m * g.spacing, k) <= 1e-12
    assert product_rule_check(F, G, k, m * g.spacing, sign) <= 1e-10

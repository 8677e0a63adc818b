import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hydrolim import discretization as disc
from hydrolim import gevrey as gv
from hydrolim.discretization import GridSpec, SpectralField


def test_phi_examples():
    p = gv.GevreyParams(sigma=1.0, tau0=1.0, beta=1.0)
    assert gv.phi(0.0, 0, p) == pytest.approx(1.0)
    q = gv.GevreyParams(sigma=1.0, tau0=2.0, beta=1.0)
    assert gv.phi(math.log(2), math.sqrt(3), q) == pytest.approx(2.0, abs=1e-14)
    with pytest.raises(ValueError):
        gv.phi(-0.1, 0, p)


def test_params_validation():
    with pytest.raises(ValueError):
        gv.GevreyParams(tau0=-1.0)
    with pytest.raises(ValueError):
        gv.GevreyParams(beta=0.5)
    with pytest.warns(UserWarning):
        gv.GevreyParams(sigma=0.5)


def single_mode(grid, k):
    c = np.zeros(grid.shape, dtype=complex)
    c[k % grid.nx] = 1.0
    return SpectralField(grid, c, reality_flag=False)


def test_multiplier_examples():
    grid = GridSpec(16, 8)
    f = single_mode(grid, 2)
    g = gv.apply_multiplier(f, 0.0, gv.GevreyParams(sigma=1.0, tau0=0.5, beta=4.0))
    assert g.coeffs[2, 0] == pytest.approx(math.exp(0.5 * math.sqrt(5)), rel=1e-14)
    same = gv.apply_multiplier(f, 0.3, gv.GevreyParams(tau0=0.0))
    assert np.array_equal(same.coeffs, f.coeffs)


def test_multiplier_round_trip(rng):
    grid = GridSpec(32, 16)
    p = gv.GevreyParams(sigma=1.0, tau0=0.5, beta=4.0)
    f = disc.transform_x(grid, rng.standard_normal(grid.shape))
    back = gv.apply_multiplier(gv.apply_multiplier(f, 0.1, p, 1), 0.1, p, -1)
    assert np.abs(back.coeffs - f.coeffs).max() <= 1e-12 * np.abs(f.coeffs).max()


def test_overflow_guard():
    grid = GridSpec(256, 8)
    with pytest.raises(gv.GevreyOverflowError):
        gv.apply_multiplier(single_mode(grid, 3), 0.0, gv.GevreyParams(sigma=1.0, tau0=10.0))


def test_norm_examples():
    grid = GridSpec(8, 16)
    p = gv.GevreyParams(sigma=1.0, tau0=0.5, beta=4.0)
    assert gv.gevrey_norm(SpectralField.zeros(grid), 2, 0.0, p) == 0.0
    # x-independent y - 1/2: only k=0, <0> = 1, so the norm is e^{tau0} ||y - 1/2||_{L2} = e^{0.5}/sqrt(12)
    f = SpectralField.from_function(grid, lambda X, Y: Y - 0.5 + 0 * X)
    assert gv.gevrey_norm(f, 3, 0.0, p) == pytest.approx(math.exp(0.5) / math.sqrt(12), rel=1e-12)


def test_cutoffs():
    grid = GridSpec(32, 8)
    N = 8
    hi = single_mode(grid, 9)
    assert np.array_equal(gv.cutoff_high(hi, N).coeffs, hi.coeffs)
    lo = single_mode(grid, 3)
    assert np.abs(gv.cutoff_high(lo, N).coeffs).max() == 0
    r = single_mode(grid, 5) + single_mode(grid, -7)
    total = gv.cutoff_low(r, N + 1) + gv.cutoff_high(r, N)
    assert np.allclose(total.coeffs, r.coeffs)


def test_n_of_eps():
    assert gv.n_of_eps(0.1, 1.0) == 100
    assert gv.n_of_eps(0.1, 8 / 9) == 63
    assert gv.n_of_eps(0.5, 1.0) == 4
    with pytest.raises(ValueError):
        gv.n_of_eps(1.5, 1.0)


def test_subadditivity_holds_on_mode_grid():
    p = gv.GevreyParams(sigma=1.0, tau0=0.5, beta=4.0)
    assert gv.subadditivity_violation(p, 64, np.linspace(0, 0.25, 6)) <= 0.0
    q = gv.GevreyParams(sigma=8 / 9, tau0=0.5, beta=4.0)
    assert gv.subadditivity_violation(q, 64, [0.0]) <= 0.0


def test_product_zero_and_constants():
    zero = np.zeros(17, dtype=complex)
    one = np.zeros(17, dtype=complex)
    one[8] = 1.0
    assert gv.product_ratio(zero, one, 2.0, 1.0, 0.3, 1.0) == 0.0
    assert gv.product_ratio(one, one, 2.0, 1.0, 0.3, 1.0) <= 0.5 + 1e-14


def test_product_sampling_is_finite_and_seeded():
    a = gv.check_product_inequality(2.0, 1.0, trials=100, seed=7)
    b = gv.check_product_inequality(2.0, 1.0, trials=100, seed=7)
    assert np.isfinite(a["max_ratio"]) and a["max_ratio"] == b["max_ratio"]


def test_commutators_vanish_for_constants(rng):
    const = np.zeros(17, dtype=complex)
    const[8] = 2.0
    g = gv.random_trig_poly(rng, 8)
    for f, h in ((const, g), (g, const)):
        assert np.abs(gv._commutator_sobolev(f, h, 2.0)).max() < 1e-12
        assert np.abs(gv._commutator_cutoff(f, h, 4)).max() < 1e-12
        assert np.abs(gv._commutator_multiplier(f, h, 0.3, 1.0)).max() < 1e-12


def test_commutator_sampling_is_finite_and_seeded():
    a = gv.check_commutator_inequalities(1.0, 2.0, 1.0, 0.5, trials=100, seed=3)
    b = gv.check_commutator_inequalities(1.0, 2.0, 1.0, 0.5, trials=100, seed=3)
    assert [r["max_ratio"] for r in a] == [r["max_ratio"] for r in b]
    assert all(np.isfinite(r["max_ratio"]) for r in a)


@settings(max_examples=50, deadline=None)
@given(k=st.integers(-200, 200), l=st.integers(-200, 200), t=st.floats(0, 1), sigma=st.floats(8 / 9, 1))
def test_phi_subadditive(k, l, t, sigma):
    p = gv.GevreyParams(sigma=sigma, tau0=0.5, beta=4.0)
    assert gv.phi(t, k + l, p) <= gv.phi(t, k, p) + gv.phi(t, l, p) + 1e-12


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_norm_is_monotone_in_r(seed):
    grid = GridSpec(8, 8)
    f = disc.transform_x(grid, np.random.default_rng(seed).standard_normal(grid.shape))
    p = gv.GevreyParams()
    assert gv.gevrey_norm(f, 1, 0.1, p) <= gv.gevrey_norm(f, 2, 0.1, p) + 1e-12


def test_norm_of_cos_times_bubble():
    grid = GridSpec(8, 16)
    f = SpectralField.from_function(grid, lambda X, Y: np.cos(X) * Y * (1 - Y))
    p = gv.GevreyParams(tau0=0.0)
    # two modes of amplitude 1/2, int y^2 (1-y)^2 = 1/30; <1>^2 = 2 enters at r = 1
    assert gv.gevrey_norm(f, 0, 0.0, p) == pytest.approx(1 / math.sqrt(60), rel=1e-12)
    assert gv.gevrey_norm(f, 1, 0.0, p) == pytest.approx(1 / math.sqrt(30), rel=1e-12)

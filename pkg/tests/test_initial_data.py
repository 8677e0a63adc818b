import math

import numpy as np
import pytest

from hydrolim import discretization as disc
from hydrolim import initial_data as idt
from hydrolim.discretization import GridSpec, SpectralField
from hydrolim.gevrey import GevreyParams


@pytest.fixture
def g():
    return GridSpec(16, 32)


def test_spec_validation():
    with pytest.raises(idt.DataSpecError):
        idt.DataSpec(c0=0.0)
    with pytest.raises(idt.DataSpecError):
        idt.DataSpec(N0=5)
    with pytest.raises(idt.DataSpecError):
        idt.DataSpec(c0=1.0, delta0=0.2, a=0.5)


def test_x_independent_family(g):
    u0, v0 = idt.make_family(idt.DataSpec(a=0.0), g)
    assert np.abs(v0.coeffs).max() == 0
    assert np.abs(u0.coeffs[1:]).max() < 1e-15
    rep = idt.check_compatibility(u0, v0, "none")
    assert rep["divergence"] <= 1e-12


def test_family_is_compatible(g):
    u0, v0 = idt.make_family(idt.DataSpec(a=0.1), g)
    assert disc.linf_norm(idt.v_from_u(u0) - v0) <= 1e-12
    assert disc.linf_norm(disc.ddx(u0) + disc.ddy(v0)) <= 1e-10
    assert np.abs(u0.coeffs[:, [0, -1]]).max() < 1e-15
    assert np.abs(v0.coeffs[:, [0, -1]]).max() < 1e-15


def test_zero_data_residuals(g):
    z = SpectralField.zeros(g)
    rep = idt.check_compatibility(z, z)
    assert all(v == 0 for k, v in rep.items() if isinstance(v, float))


def test_noncompatible_data_flagged(g, rng):
    u = disc.transform_x(g, rng.standard_normal(g.shape))
    rep = idt.check_compatibility(u, SpectralField.zeros(g))
    assert max(v for v in rep.values() if isinstance(v, float)) > 1e-10


def test_correction_fixed_point(g):
    u0, _ = idt.make_family(idt.DataSpec(a=0.1), g)
    u1 = idt.correct_com2(u0, delta0=0.2, normalization="none")
    u2 = idt.correct_com2(u1, delta0=0.2, normalization="none")
    assert np.abs(u2.coeffs - u1.coeffs).max() <= 1e-12


def test_correction_converges(g):
    u0, _ = idt.make_family(idt.DataSpec(a=0.1), g)
    u = idt.correct_com2(u0, delta0=0.2, normalization="none")
    tgt = idt.corner_target(u, "none").coeffs[:, 0]
    uyy = disc.ddy(disc.ddy(u)).coeffs
    assert max(np.abs(uyy[:, 0] - tgt).max(), np.abs(uyy[:, -1] - tgt).max()) <= 1e-10
    assert idt.convexity_min(u) >= 0.4
    # vertical integrals are untouched
    assert np.abs(disc.integrate_y(u) - disc.integrate_y(u0)).max() <= 1e-13


def test_correction_x_independent_for_plane_data(g):
    u0, _ = idt.make_family(idt.DataSpec(a=0.0), g)
    u = idt.correct_com2(u0, delta0=0.2, normalization="none", max_iter=3)
    assert np.abs(u.coeffs[1:]).max() < 1e-15


@pytest.mark.parametrize("norm", ["mean", "area"])
def test_corner_condition_conflicts_with_convexity(g, norm):
    # with the mean-subtracted targets the walls get a negative second derivative
    u0, _ = idt.make_family(idt.DataSpec(a=0.1), g)
    with pytest.raises(idt.ConvexityError):
        idt.correct_com2(u0, delta0=0.2, normalization=norm)


def test_gevrey_bound_examples(g):
    assert idt.check_gevrey_bound(SpectralField.zeros(g), 1.0, 0.5, 10) == 0.0
    u0, _ = idt.make_family(idt.DataSpec(a=0.0), g)
    for tau0 in (0.0, 0.5, 1.3):
        assert idt.check_gevrey_bound(u0, 1.0, tau0, 10) == pytest.approx(math.exp(tau0) / math.sqrt(3), rel=1e-10)


def test_validation_report(g):
    spec = idt.DataSpec(a=0.1)
    u0, v0 = idt.make_family(spec, g)
    rep = idt.validation_report(u0, v0, spec, GevreyParams())
    assert rep["v_recompute"] <= 1e-12
    assert rep["convexity_min"] == pytest.approx(2 - 6 * 0.1 * 1, abs=0.05)
    assert rep["M"] > 0

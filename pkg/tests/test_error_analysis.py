from types import SimpleNamespace

import numpy as np
import pytest
from scipy.integrate import quad

from hydrolim import anisotropic as an
from hydrolim import discretization as disc
from hydrolim import error_analysis as ea
from hydrolim import hydrostatic as hs
from hydrolim import initial_data as idt
from hydrolim.discretization import GridSpec, SpectralField
from hydrolim.gevrey import GevreyParams

EPS = 0.1


def make_state(grid, uR, omegaR, eps=EPS):
    """Error state with v^R from the divergence constraint and a prescribed omega^R."""
    vR = idt.v_from_u(uR)
    z = SpectralField.zeros(grid)
    return ea.ErrorState(uR, vR, omegaR, z, omegaR, z, z, eps, 0.0)


def plane_hydro(grid):
    up = SpectralField.from_function(grid, lambda X, Y: Y**2 - Y + 0 * X)
    z = SpectralField.zeros(grid)
    return ea.HydroDerivatives(up, z, disc.ddy(up), z)


def zero_state(grid):
    z = SpectralField.zeros(grid)
    return ea.ErrorState(z, z, z, z, z, z, z, EPS, 0.0)


def test_identical_inputs_give_zero_error():
    grid = GridSpec(16, 32)
    u0, v0 = idt.make_family(idt.DataSpec(a=0.1), grid)
    hyd = hs.initial_state(u0)
    ans = SimpleNamespace(u=hyd.u, v=hyd.v, t=0.0, epsilon=EPS)
    es = ea.build_error_state(ans, hyd)
    assert ea.error_norms(es) == (0.0, 0.0)
    assert np.abs(es.omegaR.coeffs).max() == 0


def test_mismatch_rejected():
    grid = GridSpec(16, 32)
    u0, v0 = idt.make_family(idt.DataSpec(a=0.1), grid)
    hyd = hs.initial_state(u0)
    with pytest.raises(ValueError):
        ea.build_error_state(SimpleNamespace(u=hyd.u, v=hyd.v, t=0.5, epsilon=EPS), hyd)
    other = SpectralField.zeros(GridSpec(8, 32))
    with pytest.raises(ValueError):
        ea.build_error_state(SimpleNamespace(u=other, v=other, t=0.0, epsilon=EPS), hyd)


def test_vorticity_definition():
    grid = GridSpec(16, 32)
    rng = np.random.default_rng(2)
    u = disc.transform_x(grid, rng.standard_normal(grid.shape))
    v = disc.transform_x(grid, rng.standard_normal(grid.shape))
    hyd = hs.initial_state(SpectralField.zeros(grid))
    es = ea.build_error_state(SimpleNamespace(u=u, v=v, t=0.0, epsilon=EPS), hyd)
    ref = disc.ddy(u).nodal() - EPS**2 * disc.ddx(v).nodal()
    assert np.abs(es.omegaR.nodal() - ref).max() <= 1e-12 * np.abs(ref).max()


def test_x_independent_data_has_no_error():
    grid = GridSpec(16, 32)
    u0, v0 = idt.make_family(idt.DataSpec(a=0.0), grid)
    ans = an.ans_solve(u0, v0, EPS, 0.02, 1e-3)
    hyd = hs.hydro_solve(u0, 0.02, 1e-3, hs.MonitorConfig(convexity="off"))
    es = ea.build_error_state(ans.state, hyd.state)
    assert disc.linf_norm(es.uR) <= 1e-9


def test_dx_inverse():
    grid = GridSpec(16, 32)
    inv = ea.dx_inverse_v(SpectralField.zeros(grid))
    assert np.abs(inv.field.coeffs).max() == 0
    uR = SpectralField.from_function(grid, lambda X, Y: np.cos(X) * (Y - 0.3))
    inv = ea.dx_inverse_v(uR)
    # d_x of either branch recovers v^R = -int_0^y d_x u^R away from the mean jump
    vR = idt.v_from_u(uR)
    assert np.abs(disc.ddx(inv.lower).coeffs - vR.coeffs).max() <= 1e-12
    assert np.abs(inv.upper.coeffs[:, -1]).max() <= 1e-14
    assert np.allclose(inv.jump[1], 0.5 * 0.2)


def test_forcing_at_zero_error():
    grid = GridSpec(16, 32)
    u0, _ = idt.make_family(idt.DataSpec(a=0.1), grid)
    hyd = hs.hydro_step(hs.initial_state(u0), 1e-3)
    f1, f2, f3, f = ea.forcing_terms(hyd, zero_state(grid), EPS)
    assert np.abs(f1.coeffs).max() == 0 and np.abs(f3.coeffs).max() == 0
    assert np.abs(f2.coeffs).max() > 0
    assert np.abs((f - f2 * EPS**2).coeffs).max() == 0


def test_forcing_vanishes_for_plane_flow():
    grid = GridSpec(16, 32)
    f1, f2, f3, f = ea.forcing_terms(plane_hydro(grid), zero_state(grid), EPS)
    assert np.abs(f2.coeffs).max() <= 1e-12


def test_nonlinear_terms():
    grid = GridSpec(16, 32)
    X, Y = grid.mesh()
    assert all(np.abs(t.coeffs).max() == 0 for t in ea.nonlinear_terms(zero_state(grid)))
    g = lambda y: np.sin(np.pi * y)
    G = lambda y: (1 - np.cos(np.pi * y)) / np.pi
    uR = SpectralField.from_function(grid, lambda X, Y: np.cos(X) * g(Y))
    es = make_state(grid, uR, disc.ddy(uR))
    _, Nu, _ = ea.nonlinear_terms(es)
    exact = np.sin(X) * np.cos(X) * (G(Y) * np.pi * np.cos(np.pi * Y) - g(Y) ** 2)
    assert np.abs(Nu.nodal() - exact).max() <= 1e-10
    es2 = make_state(grid, uR * 2.0, disc.ddy(uR) * 2.0)
    for a, b in zip(ea.nonlinear_terms(es2), ea.nonlinear_terms(es)):
        assert np.abs(a.coeffs - 4 * b.coeffs).max() <= 1e-12


def G0_exact(a, y):
    return -2 * y + 2 if a == 0 else -2 * np.sinh(a * (1 - y)) / np.sinh(a)


def test_h0_matches_direct_quadrature():
    grid = GridSpec(16, 48)
    omegaR = SpectralField.from_function(grid, lambda X, Y: np.sin(np.pi * Y) * np.cos(X))
    uR = SpectralField.from_function(grid, lambda X, Y: np.cos(X) * Y * (1 - Y) * (1 - 2 * Y))
    es = make_state(grid, uR, omegaR)
    bd = ea.boundary_data_h(es, plane_hydro(grid), EPS, 0)
    a = EPS * 1
    # mode 1 of u^p omega^R is (y^2 - y) sin(pi y)/2; of d_x^{-1} v^R d_y omega^p it is -y^2(1-y)^2/2 * 2 / 2
    integrand = lambda y: G0_exact(a, y) * ((y * y - y) * np.sin(np.pi * y) / 2 - y**2 * (1 - y) ** 2 / 2)
    ref = 0.5 * quad(integrand, 0, 1, epsabs=1e-14)[0]
    assert abs(bd.h[1] - ref) <= 1e-9
    assert abs(bd.h[-1] - ref) <= 1e-9


def test_h_symmetry_under_reflection():
    grid = GridSpec(16, 32)
    omegaR = SpectralField.from_function(grid, lambda X, Y: np.sin(np.pi * Y) * np.cos(X))
    es = make_state(grid, SpectralField.zeros(grid), omegaR)
    hd = plane_hydro(grid)
    h0 = ea.boundary_data_h(es, hd, EPS, 0).h
    h1 = ea.boundary_data_h(es, hd, EPS, 1).h
    assert np.abs(np.abs(h0) - np.abs(h1)).max() <= 1e-13
    y = np.linspace(0, 1, 9)
    from hydrolim.elliptic import kernels_on

    assert np.allclose(kernels_on(3, EPS, y).G1, -kernels_on(3, EPS, 1 - y).G0)


def test_h_at_zero_error_is_forcing_only():
    grid = GridSpec(16, 32)
    u0, _ = idt.make_family(idt.DataSpec(a=0.1), grid)
    hyd = hs.hydro_step(hs.initial_state(u0), 1e-3)
    bd = ea.boundary_data_h(zero_state(grid), hyd, EPS, 0)
    assert np.abs(bd.h).max() == 0
    _, f2, _, _ = ea.forcing_terms(hyd, zero_state(grid), EPS)
    from hydrolim.elliptic import dy_trace

    assert np.abs(bd.h_l - EPS**2 * dy_trace(f2, EPS, "bottom")).max() <= 1e-14


def test_wall_residual_zero_state():
    grid = GridSpec(16, 32)
    res = ea.vorticity_boundary_residual(zero_state(grid), plane_hydro(grid), EPS)
    assert res["max_residual"] == 0.0


def coupled(ny, dt, T=0.1, nx=16):
    grid = GridSpec(nx, ny)
    u0, _ = idt.make_family(idt.DataSpec(a=0.1), grid)
    u0 = idt.correct_com2(u0, delta0=0.2, normalization="none")
    v0 = idt.v_from_u(u0)
    ans = an.ans_solve(u0, v0, EPS, T, dt, filter_alpha=0.0)
    hyd = hs.hydro_solve(u0, T, dt, hs.MonitorConfig(convexity="off"), filter_alpha=0.0)
    es = ea.build_error_state(ans.state, hyd.state)
    return ea.vorticity_boundary_residual(es, hyd.state, EPS)


@pytest.fixture(scope="module")
def coupled_runs():
    return {dt: coupled(32, dt) for dt in (5e-4, 2.5e-4)}


def test_wall_identity_coupled_run(coupled_runs):
    res = coupled_runs[5e-4]
    assert res["max_residual"] <= 1e-4 * res["max_lhs"]
    # the half-space form misses the strip coupling at low modes
    assert res["max_halfspace_gap"] > 100 * res["max_residual"]


def test_wall_residual_drops_with_time_step(coupled_runs):
    assert coupled_runs[5e-4]["max_residual"] >= 4 * coupled_runs[2.5e-4]["max_residual"]


@pytest.mark.xfail(strict=True, reason="roundoff tail amplified by the wall derivative grows with ny")
def test_wall_residual_drops_with_ny(coupled_runs):
    fine = coupled(64, 5e-4)
    assert coupled_runs[5e-4]["max_residual"] >= 4 * fine["max_residual"]


def test_energy_functionals():
    grid = GridSpec(16, 32)
    p = GevreyParams()
    zero = ea.energy_functionals(zero_state(grid), p)
    assert (zero.E, zero.G, zero.D) == (0.0, 0.0, 0.0)
    uR = SpectralField.from_function(grid, lambda X, Y: np.cos(3 * X) * np.sin(np.pi * Y) * (1 - 2 * Y))
    es = make_state(grid, uR, disc.ddy(uR), eps=0.5)
    e0 = ea.energy_functionals(es, p, A=0.0)
    assert e0.E == pytest.approx(e0.parts["E_in"] + e0.parts["E_high"], rel=1e-14)
    e1 = ea.energy_functionals(es, p, A=1.0)
    assert e1.G >= e1.parts["G_in"] and e1.E >= e0.E
    assert e0.parts["E_high"] > 0


def test_bootstrap_log():
    grid = GridSpec(16, 32)
    p = GevreyParams()
    z = zero_state(grid)
    log = ea.bootstrap_monitor([z, z], p, frakC=1.0)
    assert np.all(log.ratio == 0) and log.passes()
    lg = ea.BootstrapLog(0.5, frakC=1.0)
    lg.push(0.0, 0.0, 1.0)
    lg.push(0.5, 0.001, 1.0)
    assert lg.integral_part[-1] == pytest.approx(0.5)
    assert lg.ratio[-1] == pytest.approx(0.501 / 0.0625)
    assert not lg.passes()


def test_weighted_norm_bound():
    grid = GridSpec(16, 32)
    w = SpectralField.from_function(grid, lambda X, Y: np.cos(X) + Y)
    lhs, rhs = ea.weighted_norm_check(w, 1.0, 0.0, GevreyParams())
    assert lhs <= rhs


def test_report_round_trip():
    rep = ea.ErrorReport(0.1, 0.25, 1e-6, 2e-6, 1.0, 2.0, 3.0, 0.5, {"h0": 1.0}, {"wall_identity": 1e-9})
    assert ea.ErrorReport.from_json(rep.to_json()) == rep


def test_h_norms():
    k = np.array([0, 1, -1])
    p = GevreyParams(tau0=0.0)
    h = np.ones((3, 3))
    # Sobolev index 0, no weight: |h|^2 = 3 at each time, integral over [0, 1] is 3
    assert ea.h_norms(h, k, [0.0, 0.5, 1.0], p, 0.0) == pytest.approx(np.sqrt(3))
    assert ea.h_norms(h[:1], k, [0.0], p, 0.0) == 0.0

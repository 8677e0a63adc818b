"""Self-checks of every module against closed forms and cross-method oracles."""
from __future__ import annotations

import time

import numpy as np

from . import anisotropic as an
from . import boundary_layer as bl
from . import discretization as disc
from . import elliptic as el
from . import gevrey as gv
from . import hydrostatic as hs
from . import initial_data as idt
from .discretization import GridSpec, SpectralField

LEVELS = ("quick", "full")


def _entry(name, value, tol, passed=None, known_deviation=False, **extra):
    value = float(value)
    ok = bool(value <= tol) if passed is None else bool(passed)
    return {"name": name, "value": value, "tolerance": float(tol), "passed": ok, "known_deviation": known_deviation, **extra}


# ----------------------------------------------------------------------------
# individual checks


def check_transforms(grid: GridSpec, rng) -> list:
    f = rng.standard_normal(grid.shape)
    back = disc.inverse_transform_x(disc.transform_x(grid, f))
    s = SpectralField.from_function(grid, lambda X, Y: np.sin(np.pi * Y) + 0 * X)
    dy = disc.ddy(s).nodal() - np.pi * np.cos(np.pi * grid.mesh()[1])
    half = disc.integrate_y(s, 0.0, 0.5)[0].real - 1 / np.pi
    return [
        _entry("transform_round_trip", np.abs(back - f).max() / np.abs(f).max(), 1e-13),
        _entry("ddy_sine", np.abs(dy).max(), 1e-9),
        _entry("integrate_half_sine", abs(half), 1e-10),
    ]


def manufactured_sine(ny: int, epsilon: float, kmax: int) -> float:
    """Worst relative error for Delta_eps F = sin(pi y) e^{ikx}, F = -sin(pi y) e^{ikx} / (pi^2 + eps^2 k^2)."""
    grid = GridSpec(max(2 * kmax + 2, 4), ny)
    y = grid.y
    worst = 0.0
    for k in range(kmax + 1):
        i = int(np.nonzero(grid.k == k)[0][0])
        c = np.zeros(grid.shape, dtype=complex)
        c[i] = np.sin(np.pi * y)
        F = el.solve_dirichlet(SpectralField(grid, c, reality_flag=False), epsilon)
        exact = -np.sin(np.pi * y) / (np.pi**2 + (epsilon * k) ** 2)
        worst = max(worst, np.abs(F.coeffs[i] - exact).max() / np.abs(exact).max())
    return worst


def random_smooth_field(grid: GridSpec, rng, decay: float = 0.5) -> SpectralField:
    """Real field with N(0,1) Fourier-Chebyshev coefficients damped by exp(-decay (|k| + m))."""
    from numpy.polynomial import chebyshev as C

    kmax = grid.nx // 2 - 1
    m = np.arange(grid.ny // 2)
    X, Y = grid.mesh()
    nodal = np.zeros(grid.shape)
    for k in range(kmax + 1):
        a, b = rng.standard_normal((2, m.size)) * np.exp(-decay * (k + m))
        prof_a = C.chebval(2 * grid.y - 1, a)
        prof_b = C.chebval(2 * grid.y - 1, b)
        nodal += np.cos(k * X) * prof_a[None, :] + (np.sin(k * X) * prof_b[None, :] if k else 0.0)
    return disc.transform_x(grid, nodal)


def dual_method_gap(grid: GridSpec, epsilon: float, rng, trials: int) -> float:
    worst = 0.0
    for _ in range(trials):
        h = random_smooth_field(grid, rng)
        a = el.solve_dirichlet(h, epsilon, "collocation")
        b = el.solve_dirichlet(h, epsilon, "kernel")
        worst = max(worst, np.abs(a.coeffs - b.coeffs).max() / max(np.abs(a.coeffs).max(), 1e-300))
    return worst


def check_elliptic(rng, trials: int) -> list:
    out = []
    for eps in (0.1, 0.01):
        out.append(_entry(f"elliptic_eigenfunction_eps{eps:g}", manufactured_sine(48, eps, 16), 1e-9))
    gap = max(dual_method_gap(GridSpec(16, 48), eps, rng, trials // 2) for eps in (0.1, 0.01))
    out.append(_entry("elliptic_dual_method", gap, 1e-8, trials=trials))
    return out


def check_kernels(kmax: int, n_fine: int) -> list:
    res = el.check_kernel_bounds([0.2, 0.1, 0.05, 0.01], range(kmax + 1), [1.0, 2.0, np.inf], n_fine)
    out = []
    for key, deviation in (("zeroth", False), ("first", True), ("first_saturated", False)):
        s = res[key]
        ok = s["max_ratio"] <= 4 and s["relative_spread"] <= 0.10
        out.append(
            _entry(
                f"kernel_bound_{key}",
                s["max_ratio"],
                4.0,
                passed=ok,
                known_deviation=deviation,
                relative_spread=s["relative_spread"],
            )
        )
    return out


def check_gevrey(trials: int, seed: int) -> list:
    params = gv.GevreyParams(sigma=1.0, tau0=0.5, beta=4.0)
    sub = gv.subadditivity_violation(params, 64, np.linspace(0, 0.25, 6))
    grid = GridSpec(32, 16)
    rng = np.random.default_rng(seed)
    f = disc.transform_x(grid, rng.standard_normal(grid.shape))
    f = f.with_coeffs(f.coeffs * np.exp(-np.abs(grid.k))[:, None])
    back = gv.apply_multiplier(gv.apply_multiplier(f, 0.1, params, 1), 0.1, params, -1)
    rt = np.abs(back.coeffs - f.coeffs).max() / np.abs(f.coeffs).max()
    prod = gv.check_product_inequality(1.0, 1.0, trials=trials, seed=seed)
    comm = gv.check_commutator_inequalities(1.0, 2.0, 1.0, 0.5, trials=trials, seed=seed)
    out = [
        _entry("gevrey_subadditivity", sub, 0.0),
        _entry("gevrey_multiplier_round_trip", rt, 1e-12),
        _entry("gevrey_product_ratio", prod["max_ratio"], np.inf, passed=np.isfinite(prod["max_ratio"])),
    ]
    for rec in comm:
        out.append(_entry(f"gevrey_{rec['lemma']}", rec["max_ratio"], np.inf, passed=np.isfinite(rec["max_ratio"])))
    return out


def check_heat(dt: float) -> list:
    grid = GridSpec(4, 32)
    prof = lambda y: y**2 - y
    u0 = SpectralField.from_function(grid, lambda X, Y: prof(Y) + 0 * X)
    res = hs.hydro_solve(u0, 0.1, dt, hs.MonitorConfig(convexity="off"), filter_alpha=0.0)
    exact = hs.heat_sine_series(prof, grid.y, 0.1)
    return [_entry("hydro_heat_oracle", np.abs(res.state.u.coeffs[0].real - exact).max(), 1e-6, dt=dt)]


def check_exactness(grid: GridSpec, T: float, dt: float) -> list:
    u0, v0 = idt.make_family(idt.DataSpec(a=0.0), grid)
    hyd = hs.hydro_solve(u0, T, dt, hs.MonitorConfig(convexity="off"))
    out = []
    for eps in (0.2, 0.1, 0.05):
        ans = an.ans_solve(u0, v0, eps, T, dt)
        out.append(_entry(f"exactness_eps{eps:g}", disc.linf_norm(ans.state.u - hyd.state.u), 1e-8))
    return out


def manufactured_steady(grid: GridSpec, epsilon: float, T: float, dt: float) -> float:
    """Forced steady state psi = sin^2(pi y) sin x; returns the max velocity error at T."""
    X, Y = grid.mesh()
    pi, e2 = np.pi, epsilon**2
    s2 = np.sin(2 * pi * Y)
    W = 2 * pi**2 * np.cos(2 * pi * Y) - e2 * np.sin(pi * Y) ** 2
    Wy = -4 * pi**3 * s2 - e2 * pi * s2
    Wyy = -8 * pi**4 * np.cos(2 * pi * Y) - 2 * e2 * pi**2 * np.cos(2 * pi * Y)
    u = pi * s2 * np.sin(X)
    v = -np.sin(pi * Y) ** 2 * np.cos(X)
    adv = u * W * np.cos(X) + v * Wy * np.sin(X)
    lap = (Wyy - e2 * W) * np.sin(X)
    F = disc.transform_x(grid, adv - lap)
    uf, vf = disc.transform_x(grid, u), disc.transform_x(grid, v)
    force = an.Forcing(omega=F.coeffs, u0=np.zeros(grid.ny, dtype=complex))
    res = an.ans_solve(uf, vf, epsilon, T, dt, forcing=force, filter_alpha=0.0)
    return max(disc.linf_norm(res.state.u - uf), disc.linf_norm(res.state.v - vf))


def check_lift(dt: float) -> list:
    eps, k, T, g = 0.1, np.array([3]), 0.1, 1.0 + 0.5j
    times = np.arange(0, T + dt / 2, dt)
    out = []
    for side in (0, 1):
        h = np.full((times.size, 1), g / (1j * k[0] if side == 0 else -1j * k[0]))
        lift = bl.lift_solve(times, h, side, eps, k)
        exact = bl.neumann_heat_closed_form(g, eps * k[0], T, lift.z)
        out.append(_entry(f"lift_closed_form_side{side}", np.abs(lift.omega_b[-1, 0] - exact).max(), 1e-6))
    h = np.full((times.size, 1), g / (1j * k[0]))
    out.append(_entry("lift_truncation_doubling", bl.truncation_sensitivity(times, h, 0, eps, k), 1e-8))
    return out


def check_energy(grid: GridSpec, dts) -> list:
    u0, v0 = idt.make_family(idt.DataSpec(a=0.1), grid)
    u0 = idt.correct_com2(u0, delta0=0.2, normalization="none")
    v0 = idt.v_from_u(u0)
    d = [an.energy_identity_defect(u0, v0, 0.1, 0.1, dt) for dt in dts]
    order = float(np.log2(d[-2] / d[-1]))
    return [_entry("energy_identity", d[-1], 1e-8, dt=dts[-1]), _entry("energy_order", order, 1.9, passed=order >= 1.9)]


# ----------------------------------------------------------------------------
# suites


def run_suite(level: str = "quick", seed: int = 0) -> dict:
    if level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}")
    quick = level == "quick"
    rng = np.random.default_rng(seed)
    grid = GridSpec(16, 32)
    t0 = time.perf_counter()
    checks = []
    checks += check_transforms(grid, rng)
    checks += check_elliptic(rng, 10 if quick else 50)
    checks += check_kernels(64 if quick else 256, 1025 if quick else 4097)
    checks += check_gevrey(20 if quick else 100, seed)
    checks += check_heat(1e-4 if quick else 5e-5)
    checks += check_exactness(grid, 0.05 if quick else 0.25, 5e-4 if quick else 2.5e-4)
    checks.append(_entry("ans_manufactured_steady", manufactured_steady(grid, 0.1, 0.05 if quick else 0.2, 5e-4), 1e-7))
    checks += check_lift(2.5e-4 if quick else 1e-4)
    if not quick:
        checks += check_energy(grid, (5e-5, 2.5e-5))
    failed = [c for c in checks if not c["passed"] and not c["known_deviation"]]
    return {
        "level": level,
        "seed": seed,
        "checks": checks,
        "summary": {
            "total": len(checks),
            "passed": sum(c["passed"] for c in checks),
            "failed": len(failed),
            "known_deviations": sum(c["known_deviation"] and not c["passed"] for c in checks),
            "elapsed_s": round(time.perf_counter() - t0, 1),
        },
    }

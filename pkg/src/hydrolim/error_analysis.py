"""Error fields between the anisotropic and hydrostatic solutions, and their diagnostics.

u^R = u^eps - u^p, v^R = v^eps - v^p, omega^R = u^R_y - eps^2 v^R_x.  The vorticity
error splits into boundary-layer lifts omega^bl and the interior part
omega^in = omega^R - omega^bl.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, asdict, field

import numpy as np

from . import discretization as disc
from .discretization import SpectralField
from .elliptic import kernels_on, solve_dirichlet, dy_trace
from .gevrey import GevreyParams, cutoff_high, gevrey_norm, n_of_eps, trace_norm
from .hydrostatic import HydroState, time_derivative


@dataclass(frozen=True, eq=False)
class ErrorState:
    uR: SpectralField
    vR: SpectralField
    omegaR: SpectralField
    omega_bl: SpectralField
    omega_in: SpectralField
    u_bl: SpectralField
    v_bl: SpectralField
    epsilon: float
    t: float
    # p^R is never reconstructed in the vorticity pipeline
    px_proxy: np.ndarray | None = None

    @property
    def u_in(self) -> SpectralField:
        return self.uR - self.u_bl

    @property
    def v_in(self) -> SpectralField:
        return self.vR - self.v_bl


def build_error_state(ans, hydro: HydroState, lifts=None, *, time_tol: float = 1e-12) -> ErrorState:
    """Assemble the error fields; lifts is None or (omega_b, u_b, v_b) strip fields summed over both sides."""
    if ans.u.grid != hydro.u.grid:
        raise ValueError("anisotropic and hydrostatic states live on different grids")
    if abs(ans.t - hydro.t) > time_tol:
        raise ValueError(f"time mismatch: anisotropic t={ans.t}, hydrostatic t={hydro.t}")
    eps = ans.epsilon
    uR = ans.u - hydro.u
    vR = ans.v - hydro.v
    omegaR = disc.ddy(uR) - disc.ddx(vR) * eps**2
    zero = SpectralField.zeros(uR.grid)
    if lifts is None:
        w_bl, u_bl, v_bl = zero, zero, zero
    else:
        w_bl, u_bl, v_bl = lifts
    return ErrorState(uR, vR, omegaR, w_bl, omegaR - w_bl, u_bl, v_bl, eps, ans.t)


def error_norms(es: ErrorState) -> tuple[float, float]:
    """(||(u^R, eps v^R)||_{L2}, max over the grid of |(u^R, eps v^R)|)."""
    l2 = np.sqrt(disc.l2_norm(es.uR) ** 2 + es.epsilon**2 * disc.l2_norm(es.vR) ** 2)
    mag = np.sqrt(es.uR.nodal() ** 2 + (es.epsilon * es.vR.nodal()) ** 2)
    return float(l2), float(mag.max())


# ----------------------------------------------------------------------------
# d_x^{-1} v^R


@dataclass(frozen=True, eq=False)
class DxInverse:
    """Both smooth branches and the piecewise field; the jump at y=1/2 is int_0^1 u^R dy."""

    lower: SpectralField  # -int_0^y u^R
    upper: SpectralField  # -int_1^y u^R
    field: SpectralField
    jump: np.ndarray


def dx_inverse_v(uR: SpectralField) -> DxInverse:
    lower = -disc.antiderivative_y(uR, base=0.0)
    upper = -disc.antiderivative_y(uR, base=1.0)
    below = uR.grid.y <= 0.5
    piece = np.where(below[None, :], lower.coeffs, upper.coeffs)
    return DxInverse(lower, upper, uR.with_coeffs(piece), disc.integrate_y(uR))


def _split_integral(kernel_rows: np.ndarray, lower: SpectralField, upper: SpectralField) -> np.ndarray:
    """Per-mode int_0^{1/2} K lower + int_{1/2}^1 K upper."""
    a = lower.with_coeffs(kernel_rows * lower.coeffs)
    b = upper.with_coeffs(kernel_rows * upper.coeffs)
    return disc.integrate_y(a, 0.0, 0.5) + disc.integrate_y(b, 0.5, 1.0)


def _kernel_rows(grid, epsilon, name):
    return np.array([getattr(kernels_on(k, epsilon, grid.y), name) for k in grid.k])


# ----------------------------------------------------------------------------
# forcing and nonlinear terms


@dataclass(frozen=True, eq=False)
class HydroDerivatives:
    up: SpectralField
    vp: SpectralField
    wp: SpectralField  # omega^p = u^p_y
    vp_t: SpectralField


def hydro_derivatives(hydro: HydroState) -> HydroDerivatives:
    ut, _ = time_derivative(hydro)
    vt = -disc.antiderivative_y(disc.ddx(ut), base=0.0)
    return HydroDerivatives(hydro.u, hydro.v, disc.ddy(hydro.u), vt)


def forcing_terms(hydro: HydroState | HydroDerivatives, es: ErrorState, epsilon: float):
    """(f1, f2, f3, f) with omega^R_t - Delta_eps omega^R + f = N.

    Subtracting the two vorticity equations gives f = f3 + eps^2 (f1 + f2).
    """
    hd = hydro if isinstance(hydro, HydroDerivatives) else hydro_derivatives(hydro)
    M = disc.multiply
    dx, dy = disc.ddx, disc.ddy
    up, vp, wp = hd.up, hd.vp, hd.wp
    uR, vR, wR = es.uR, es.vR, es.omegaR
    f1 = -(M(uR, dx(dx(vp))) + M(vR, dx(dy(vp))))
    f2 = -(
        dx(hd.vp_t)
        - dx(dx(dx(vp))) * epsilon**2
        - dy(dy(dx(vp)))
        + dx(dx(dy(up)))
        + M(up, dx(dx(vp)))
        + M(vp, dx(dy(vp)))
    )
    f3 = M(up, dx(wR)) + M(uR, dx(wp)) + M(vp, dy(wR)) + M(vR, dy(wp))
    f = f3 + (f1 + f2) * epsilon**2
    return f1, f2, f3, f


def nonlinear_terms(es: ErrorState):
    """(N, N_u, N_v) = (-u^R w^R_x - v^R w^R_y, u^R u^R_x + v^R u^R_y, u^R v^R_x + v^R v^R_y)."""
    M = disc.multiply
    uR, vR, wR = es.uR, es.vR, es.omegaR
    N = -(M(uR, disc.ddx(wR)) + M(vR, disc.ddy(wR)))
    Nu = M(uR, disc.ddx(uR)) + M(vR, disc.ddy(uR))
    Nv = M(uR, disc.ddx(vR)) + M(vR, disc.ddy(vR))
    return N, Nu, Nv


# ----------------------------------------------------------------------------
# boundary data


@dataclass(frozen=True)
class BoundaryData:
    h: np.ndarray
    h_l: np.ndarray


def boundary_data_h(es: ErrorState, hydro: HydroState | HydroDerivatives, epsilon: float, side: int) -> BoundaryData:
    """Per-mode h^i and h^i_l by kernel quadrature (G0/G2 at the bottom, G1/G3 at the top)."""
    hd = hydro if isinstance(hydro, HydroDerivatives) else hydro_derivatives(hydro)
    grid = es.uR.grid
    G = _kernel_rows(grid, epsilon, "G0" if side == 0 else "G1")
    dG = _kernel_rows(grid, epsilon, "G2" if side == 0 else "G3")
    M = disc.multiply
    inv = dx_inverse_v(es.uR)
    wp_y = disc.ddy(hd.wp)
    wp_xy = disc.ddx(wp_y)

    # smooth part u^p omega^R, then the two branches of d_x^{-1} v^R d_y omega^p
    smooth = M(hd.up, es.omegaR)
    h = 0.5 * (disc.integrate_y(smooth.with_coeffs(G * smooth.coeffs)) + _split_integral(G, M(inv.lower, wp_y), M(inv.upper, wp_y)))

    f1, f2, _, _ = forcing_terms(hd, es, epsilon)
    vw = M(hd.vp, es.omegaR)
    rest = M(es.uR, disc.ddx(hd.wp)) + (f1 + f2) * epsilon**2
    h_l = (
        -0.5 * disc.integrate_y(vw.with_coeffs(dG * vw.coeffs))
        + 0.5 * disc.integrate_y(rest.with_coeffs(G * rest.coeffs))
        - 0.5 * _split_integral(G, M(inv.lower, wp_xy), M(inv.upper, wp_xy))
    )
    return BoundaryData(h, h_l)


def _harmonic_trace(a: np.ndarray, w0: np.ndarray, w1: np.ndarray, side: int) -> np.ndarray:
    """d_y of the strip harmonic extension of wall values (w0, w1), at the given wall."""
    out = (w1 - w0).astype(complex) if side == 0 else (w1 - w0).astype(complex)
    nz = a > 0
    an = a[nz]
    coth = 1 / np.tanh(an)
    csch = 1 / np.sinh(an)
    if side == 0:
        out[nz] = -an * coth * w0[nz] + an * csch * w1[nz]
    else:
        out[nz] = an * coth * w1[nz] - an * csch * w0[nz]
    return out


def vorticity_boundary_residual(es: ErrorState, hydro, epsilon: float) -> dict:
    """Both sides of the wall identities for omega^R, per mode.

    From u^R_t = 0 at the walls and the omega^R equation, on the strip

        d_y omega^R - d_y H = ik h + h_l - d_y Delta^{-1} N - m'

    at each wall, where H is the strip harmonic extension of the wall values of
    omega^R and m' = mean of int_S d_t u^R = int_S d_y omega^R (k = 0 only).
    The half-space form replaces d_y H by -/+ eps|k| omega^R and adds m'; its
    distance from the strip form is reported as halfspace_gap.
    """
    hd = hydro if isinstance(hydro, HydroDerivatives) else hydro_derivatives(hydro)
    grid = es.uR.grid
    k = grid.k
    w = es.omegaR
    wy = disc.ddy(w)
    a = epsilon * np.abs(k)
    N, _, _ = nonlinear_terms(es)
    mean_term = np.zeros(grid.nx, dtype=complex)
    mean_term[0] = disc.integrate_y(wy)[0]
    w0, w1 = w.coeffs[:, 0], w.coeffs[:, -1]
    out = {}
    for side, name, sgn, col in ((0, "bottom", 1.0, 0), (1, "top", -1.0, -1)):
        bd = boundary_data_h(es, hd, epsilon, side)
        core = 1j * k * bd.h + bd.h_l - dy_trace(N, epsilon, name)
        lhs = wy.coeffs[:, col] - _harmonic_trace(a, w0, w1, side)
        rhs = core - mean_term
        lhs_half = wy.coeffs[:, col] + sgn * a * w.coeffs[:, col]
        out[name] = {
            "lhs": lhs,
            "rhs": rhs,
            "residual": lhs - rhs,
            "halfspace_gap": (lhs_half - core - mean_term) - (lhs - rhs),
        }
    out["max_residual"] = float(max(np.abs(out[s]["residual"]).max() for s in ("bottom", "top")))
    out["max_lhs"] = float(max(np.abs(out[s]["lhs"]).max() for s in ("bottom", "top")))
    out["max_halfspace_gap"] = float(max(np.abs(out[s]["halfspace_gap"]).max() for s in ("bottom", "top")))
    return out


# ----------------------------------------------------------------------------
# energy functionals


@dataclass(frozen=True)
class EnergyTriple:
    E: float
    G: float
    D: float
    parts: dict = field(default_factory=dict)


def _pair_norm_sq(u, v, eps, r, t, params):
    return gevrey_norm(u, r, t, params) ** 2 + gevrey_norm(v * eps, r, t, params) ** 2


def energy_functionals(es: ErrorState, params: GevreyParams, A: float = 1.0, N0: int = 10) -> EnergyTriple:
    """E, G, D with r = N0 - 7 and the high-frequency split at N(eps)."""
    eps, t, s = es.epsilon, es.t, params.sigma
    r = N0 - 7
    N = n_of_eps(eps, s)
    uh, vh = cutoff_high(es.uR, N), cutoff_high(es.vR, N)
    w = es.omega_in
    dy, dx = disc.ddy, disc.ddx

    def grad_pair(rr):
        return _pair_norm_sq(dy(uh), dy(vh), eps, rr, t, params) + _pair_norm_sq(dx(uh) * eps, dx(vh) * eps, eps, rr, t, params)

    parts = {
        "E_in": gevrey_norm(w, r, t, params) ** 2,
        "E_high_A": A * eps**2 * _pair_norm_sq(uh, vh, eps, r + 1, t, params),
        "E_high": _pair_norm_sq(uh, vh, eps, r + 1 - s, t, params),
        "G_in": gevrey_norm(w, r + s / 2, t, params) ** 2,
        "G_high_A": A * eps**2 * _pair_norm_sq(uh, vh, eps, r + 1 + s / 2, t, params),
        "G_high": _pair_norm_sq(uh, vh, eps, r + 1 - s / 2, t, params),
        "D_in": gevrey_norm(dy(w), r, t, params) ** 2 + gevrey_norm(dx(w) * eps, r, t, params) ** 2,
        "D_high_A": A * eps**2 * grad_pair(r + 1),
        "D_high": grad_pair(r + 1 - s),
    }
    E = parts["E_in"] + parts["E_high_A"] + parts["E_high"]
    G = parts["G_in"] + parts["G_high_A"] + parts["G_high"]
    D = parts["D_in"] + parts["D_high_A"] + parts["D_high"]
    return EnergyTriple(E, G, D, parts)


def bootstrap_integrand(es: ErrorState, params: GevreyParams, N0: int = 10) -> tuple[float, float]:
    """(||omega^R||^2_{X^{r-1}}, ||(d_y omega^R, eps d_x omega^R)||^2_{X^{r-1}})."""
    r = N0 - 7
    w = es.omegaR
    a = gevrey_norm(w, r - 1, es.t, params) ** 2
    b = gevrey_norm(disc.ddy(w), r - 1, es.t, params) ** 2 + gevrey_norm(disc.ddx(w) * es.epsilon, r - 1, es.t, params) ** 2
    return a, b


@dataclass
class BootstrapLog:
    epsilon: float
    times: list = field(default_factory=list)
    sup_part: list = field(default_factory=list)
    integral_part: list = field(default_factory=list)
    frakC: float | None = None

    def push(self, t: float, a: float, b: float) -> None:
        if self.times:
            dt = t - self.times[-1]
            integ = self.integral_part[-1] + 0.5 * dt * (b + self._last_b)
            sup = max(self.sup_part[-1], a)
        else:
            integ, sup = 0.0, a
        self._last_b = b
        self.times.append(t)
        self.sup_part.append(sup)
        self.integral_part.append(integ)

    @property
    def ratio(self) -> np.ndarray:
        return (np.array(self.sup_part) + np.array(self.integral_part)) / self.epsilon**4

    def passes(self) -> bool:
        return self.frakC is None or bool(np.all(self.ratio <= self.frakC))


def bootstrap_monitor(states, params: GevreyParams, frakC: float | None = None, N0: int = 10) -> BootstrapLog:
    """Left side of the bootstrap bound over a trajectory of error states, divided by eps^4."""
    log = None
    for es in states:
        if log is None:
            log = BootstrapLog(es.epsilon, frakC=frakC)
        log.push(es.t, *bootstrap_integrand(es, params, N0))
    return log


# ----------------------------------------------------------------------------
# interior / lift relations


def lemma_identity_residual(es: ErrorState, Psi_y: SpectralField, Psi_x: SpectralField) -> tuple[float, float]:
    """Max residuals of
        u^in - mean(u^R) + Psi_y = d_y Delta^{-1}(omega^in + eps^2 v^bl_x),
        v^in - Psi_x = -d_x Delta^{-1}(omega^in + eps^2 v^bl_x).
    """
    eps = es.epsilon
    F = solve_dirichlet(es.omega_in + disc.ddx(es.v_bl) * eps**2, eps)
    mean = disc.integrate_y(es.uR)[0]
    lhs_u = es.u_in + Psi_y
    c = lhs_u.coeffs.copy()
    c[0] -= mean
    ru = disc.linf_norm(lhs_u.with_coeffs(c) - disc.ddy(F))
    rv = disc.linf_norm(es.v_in - Psi_x + disc.ddx(F))
    return ru, rv


def weight_phi(grid) -> np.ndarray:
    """phi(y) = y (1 - y)."""
    return grid.y * (1 - grid.y)


def weighted_norm_check(w: SpectralField, r: float, t: float, params: GevreyParams) -> tuple[float, float]:
    """(||phi w||_{X^r}, ||w||_{X^r} / 4)."""
    pw = w.with_coeffs(w.coeffs * weight_phi(w.grid)[None, :])
    return gevrey_norm(pw, r, t, params), gevrey_norm(w, r, t, params) / 4


# ----------------------------------------------------------------------------
# report


@dataclass
class ErrorReport:
    epsilon: float
    t: float
    L2_error: float
    Linf_error: float
    E: float
    G: float
    D: float
    bootstrap_ratio: float
    h_norms: dict
    residuals: dict

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ErrorReport":
        return cls(**json.loads(text))


def h_norms(h_values: np.ndarray, k: np.ndarray, times, params: GevreyParams, r: float) -> float:
    """(int_0^T |h|^2_{X^r} dt)^{1/2} by the trapezoid rule."""
    from scipy.integrate import trapezoid

    vals = [trace_norm(h, k, r, t, params) ** 2 for t, h in zip(times, h_values)]
    return float(np.sqrt(trapezoid(vals, times))) if len(vals) > 1 else 0.0

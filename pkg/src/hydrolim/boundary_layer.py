"""Boundary-layer vorticity lifts on truncated half lines.

Side 0 lives on y in [0, L], side 1 on y in [1 - L, 1]; both are stored in the
wall distance z (z = y for side 0, z = 1 - y for side 1).  Per Fourier mode

    w_t = w_zz - (eps k)^2 w,   w_z(0) = g(t),   w(L) = 0,   w(0, z) = 0,

with g = i k h for side 0 and g = -i k h for side 1 (d_y = -d_z there).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
from scipy.integrate import trapezoid
from scipy.special import erfc, erfcx

from . import discretization as disc
from .discretization import GridSpec, SpectralField
from .elliptic import kernels_on

log = logging.getLogger(__name__)

TRUNCATION_TOL = 1e-10


class TruncationError(RuntimeError):
    pass


# ----------------------------------------------------------------------------
# half-line grid on [0, L]


@dataclass(frozen=True)
class HalfLineGrid:
    n: int
    L: float

    @property
    def z(self) -> np.ndarray:
        return self.L * disc.cheb_nodes(self.n)

    @property
    def D(self) -> np.ndarray:
        return disc.cheb_diff(self.n) / self.L

    @property
    def D2(self) -> np.ndarray:
        return disc.cheb_diff2(self.n) / self.L**2

    @property
    def weights(self) -> np.ndarray:
        return self.L * disc.cc_weights(self.n)

    def antiderivative(self, f: np.ndarray) -> np.ndarray:
        """int_0^z f along the last axis."""
        return self.L * (f @ disc.integration_matrix(self.n).T)

    def tail(self, f: np.ndarray) -> np.ndarray:
        """int_z^L f along the last axis."""
        F = self.antiderivative(f)
        return F[..., -1:] - F

    def interpolate(self, f: np.ndarray, z_points) -> np.ndarray:
        zp = np.asarray(z_points, dtype=float)
        inside = (zp >= 0) & (zp <= self.L)
        M = disc.interpolation_matrix(self.n, np.clip(zp, 0, self.L) / self.L)
        out = f @ M.T
        # beyond the truncation end the lift is taken as zero
        return np.where(inside, out, 0.0)

    def integral_from(self, f: np.ndarray, c: float) -> np.ndarray:
        """int_c^L f along the last axis."""
        if c >= self.L:
            return np.zeros(f.shape[:-1], dtype=f.dtype)
        F = self.antiderivative(f)
        Fc = self.interpolate(F, [c])[..., 0]
        return F[..., -1] - Fc


@dataclass
class LiftField:
    side: int
    epsilon: float
    k: np.ndarray
    grid: HalfLineGrid
    times: np.ndarray
    omega_b: np.ndarray  # (nt, nx, n) complex, in the wall distance z

    @property
    def L(self) -> float:
        return self.grid.L

    @property
    def z(self) -> np.ndarray:
        return self.grid.z

    @property
    def y(self) -> np.ndarray:
        return self.z if self.side == 0 else 1.0 - self.z

    def wall_values(self) -> np.ndarray:
        return self.omega_b[..., 0]

    def far_field_ratio(self) -> float:
        """max |w| over z in [0.75 L, L] relative to the max wall value."""
        wall = np.abs(self.omega_b[..., 0]).max()
        if wall == 0:
            return 0.0
        far = self.z >= 0.75 * self.L
        return float(np.abs(self.omega_b[..., far]).max() / wall)

    def on_strip(self, ny: int, index: int = -1) -> np.ndarray:
        """Lift values at the strip nodes, (nx, ny)."""
        yy = disc.cheb_nodes(ny)
        zz = yy if self.side == 0 else 1.0 - yy
        return self.grid.interpolate(self.omega_b[index], zz)


# ----------------------------------------------------------------------------
# solver


@lru_cache(maxsize=512)
def _lift_lu(n: int, L: float, a: float, theta: float):
    g = HalfLineGrid(n, L)
    A = (1 + theta * a * a) * np.eye(n) - theta * g.D2
    A[0] = g.D[0]
    A[-1] = 0.0
    A[-1, -1] = 1.0
    return sla.lu_factor(A)


def _interp_complex(t: float, times: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Linear interpolation of (nt, nx) complex samples at time t."""
    j = np.searchsorted(times, t, side="right") - 1
    j = min(max(j, 0), len(times) - 2)
    t0, t1 = times[j], times[j + 1]
    s = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
    return (1 - s) * values[j] + s * values[j + 1]


def _neumann_data(h: np.ndarray, k: np.ndarray, side: int) -> np.ndarray:
    return (1j if side == 0 else -1j) * k * h


def _run_lift(times, h_values, k, side, epsilon, grid: HalfLineGrid, substeps: int, startup: int, store_every: int):
    nx = k.size
    n = grid.n
    w = np.zeros((nx, n), dtype=complex)
    D2 = grid.D2
    groups = {}
    for i, kk in enumerate(k):
        groups.setdefault(abs(int(kk)), []).append(i)
    groups = {m: np.array(ix) for m, ix in groups.items()}
    out_t = [times[0]]
    out_w = [w.copy()]
    step = 0
    for j in range(len(times) - 1):
        dt = (times[j + 1] - times[j]) / substeps
        for s in range(substeps):
            t0 = times[j] + s * dt
            if step < startup:
                # two implicit Euler half steps share the Crank-Nicolson matrix
                for frac in (0.5, 1.0):
                    g = _neumann_data(_interp_complex(t0 + frac * dt, times, h_values), k, side)
                    rhs = w.copy()
                    rhs[:, 0] = g
                    rhs[:, -1] = 0.0
                    for m, rows in groups.items():
                        lu = _lift_lu(n, grid.L, float(epsilon * m), dt / 2)
                        w[rows] = sla.lu_solve(lu, rhs[rows].T).T
            else:
                g = _neumann_data(_interp_complex(t0 + dt, times, h_values), k, side)
                lap = w @ D2.T
                new = np.empty_like(w)
                for m, rows in groups.items():
                    a = float(epsilon * m)
                    rhs = w[rows] + (dt / 2) * (lap[rows] - a * a * w[rows])
                    rhs[:, 0] = g[rows]
                    rhs[:, -1] = 0.0
                    new[rows] = sla.lu_solve(_lift_lu(n, grid.L, a, dt / 2), rhs.T).T
                w = new
            step += 1
        if (j + 1) % store_every == 0 or j + 1 == len(times) - 1:
            out_t.append(times[j + 1])
            out_w.append(w.copy())
    return np.array(out_t), np.array(out_w)


def lift_solve(
    h_times,
    h_values,
    side: int,
    epsilon: float,
    k,
    *,
    L: float = 1.0,
    n: int = 64,
    substeps: int = 1,
    startup: int = 2,
    store_every: int = 1,
    tol: float = TRUNCATION_TOL,
    max_doublings: int = 8,
) -> LiftField:
    """Crank-Nicolson lift with automatic doubling of the truncation length.

    Each doubling of L multiplies the node count by sqrt(2).
    h_values has shape (nt, nx) with per-mode boundary data at h_times; the
    data is interpolated linearly in time inside each step.
    """
    if side not in (0, 1):
        raise ValueError("side must be 0 or 1")
    times = np.asarray(h_times, dtype=float)
    hv = np.asarray(h_values, dtype=complex)
    k = np.asarray(k)
    if hv.shape != (times.size, k.size):
        raise ValueError(f"h_values must have shape {(times.size, k.size)}, got {hv.shape}")
    L0 = float(L)
    for _ in range(max_doublings + 1):
        # keep the resolution per unit diffusive length roughly fixed as L grows
        grid = HalfLineGrid(int(np.ceil(n * np.sqrt(L / L0))), float(L))
        t_out, w_out = _run_lift(times, hv, k, side, epsilon, grid, substeps, startup, store_every)
        lift = LiftField(side, epsilon, k, grid, t_out, w_out)
        ratio = lift.far_field_ratio()
        if ratio <= tol:
            return lift
        log.debug("lift side %d: far-field ratio %.2e at L=%g, doubling", side, ratio, L)
        L *= 2
    raise TruncationError(f"lift did not decay below {tol} within L={L / 2}")


def lift_velocities(lift: LiftField, index=None) -> tuple[np.ndarray, np.ndarray]:
    """(u_b, v_b) on the half-line grid, per mode, from the decayed end inward."""
    w = lift.omega_b if index is None else lift.omega_b[index]
    k = lift.k
    ik = 1j * k[:, None] if w.ndim == 2 else 1j * k[None, :, None]
    if lift.side == 0:
        u = -lift.grid.tail(w)
        v = ik * lift.grid.tail(u)
    else:
        u = lift.grid.tail(w)
        v = -ik * lift.grid.tail(u)
    return u, v


def strip_fields(lift: LiftField, grid: GridSpec, index: int = -1) -> tuple[SpectralField, SpectralField, SpectralField]:
    """(omega_b, u_b, v_b) of one lift evaluated at the strip nodes."""
    u, v = lift_velocities(lift, index)
    zz = grid.y if lift.side == 0 else 1.0 - grid.y
    ev = lambda f: SpectralField(grid, lift.grid.interpolate(f, zz))
    return ev(lift.omega_b[index]), ev(u), ev(v)


def psi_correction(lift0: LiftField, lift1: LiftField, grid: GridSpec, epsilon: float, index: int = -1):
    """Harmonic Psi with the wall values given by tail integrals of the lift velocities.

    Returns (Psi, d_y Psi, d_x Psi) on the strip grid.
    """
    u0, _ = lift_velocities(lift0, index)
    u1, _ = lift_velocities(lift1, index)
    g0, g1 = lift0.grid, lift1.grid
    # Psi(0) = -int_0^inf u^{b,0} dy + int_{-inf}^0 u^{b,1} dy;  Psi(1) = -int_1^inf u^{b,0} + int_{-inf}^1 u^{b,1}
    psi_bottom = -g0.integral_from(u0, 0.0) + g1.integral_from(u1, 1.0)
    psi_top = -g0.integral_from(u0, 1.0) + g1.integral_from(u1, 0.0)
    out = np.zeros(grid.shape, dtype=complex)
    dy = np.zeros(grid.shape, dtype=complex)
    for i, kk in enumerate(grid.k):
        ks = kernels_on(kk, epsilon, grid.y)
        ksr = kernels_on(kk, epsilon, 1.0 - grid.y)
        out[i] = ks.K1 * psi_top[i] + ksr.K1 * psi_bottom[i]
        dy[i] = ks.dK1 * psi_top[i] - ksr.dK1 * psi_bottom[i]
    Psi = SpectralField(grid, out)
    return Psi, SpectralField(grid, dy), disc.ddx(Psi)


def truncation_sensitivity(h_times, h_values, side, epsilon, k, *, L: float = 1.0, n: int = 64, **kw) -> float:
    """Max change of the wall values of u_b when the truncation length is doubled."""
    a = lift_solve(h_times, h_values, side, epsilon, k, L=L, n=n, **kw)
    b = lift_solve(h_times, h_values, side, epsilon, k, L=2 * a.L, n=int(np.ceil(a.grid.n * np.sqrt(2))), **kw)
    ua = lift_velocities(a)[0][..., 0]
    ub = lift_velocities(b)[0][..., 0]
    return float(np.abs(ua - ub).max())


def lift_gevrey_ratio(lift: LiftField, h_times, h_values, r: float, params) -> float:
    """beta^{3/2} int ||w_b||^2_{X^r} dt / int |h|^2_{X^{r+1-3sigma/4}} dt (trapezoid in time)."""
    from .gevrey import mode_weights

    k = lift.k
    lhs = np.array(
        [
            np.sum(mode_weights(k, r, t, params) * (np.abs(w) ** 2 @ lift.grid.weights))
            for t, w in zip(lift.times, lift.omega_b)
        ]
    )
    rr = r + 1 - 0.75 * params.sigma
    rhs = np.array([np.sum(mode_weights(k, rr, t, params) * np.abs(h) ** 2) for t, h in zip(h_times, h_values)])
    num = trapezoid(lhs, lift.times)
    den = trapezoid(rhs, h_times)
    return 0.0 if den == 0 else float(params.beta**1.5 * num / den)


# ----------------------------------------------------------------------------
# oracles


def _ierfc(x):
    return np.exp(-x * x) / np.sqrt(np.pi) - x * erfc(x)


def _exp_erfc(c, x):
    """exp(c) erfc(x) without overflow."""
    x = np.asarray(x, dtype=float)
    c = np.broadcast_to(np.asarray(c, dtype=float), x.shape)
    out = np.empty_like(x)
    pos = x > 0
    out[pos] = erfcx(x[pos]) * np.exp(c[pos] - x[pos] ** 2)
    out[~pos] = np.exp(c[~pos]) * erfc(x[~pos])
    return out


def neumann_heat_closed_form(g: complex, a: float, t: float, z) -> np.ndarray:
    """w_t = w_zz - a^2 w on z > 0, w_z(0) = g for t > 0, w(0) = 0."""
    z = np.asarray(z, dtype=float)
    if t <= 0:
        return np.zeros_like(z, dtype=complex)
    st = np.sqrt(t)
    x = z / (2 * st)
    if a * st < 1e-7:
        return -2 * g * st * _ierfc(x)
    m = _exp_erfc(-a * z, x - a * st)
    p = _exp_erfc(a * z, x + a * st)
    return -g * (m - p) / (2 * a)


def neumann_heat_duhamel(g: complex, a: float, t: float, z: float) -> complex:
    """Independent quadrature: w = -g int_0^t e^{-a^2 s} (pi s)^{-1/2} e^{-z^2/(4s)} ds."""
    from scipy.integrate import quad

    # s = q^2 removes the endpoint singularity
    def integrand(q):
        if q == 0:
            return 2 / np.sqrt(np.pi) if z == 0 else 0.0
        return 2 / np.sqrt(np.pi) * np.exp(-a * a * q * q - z * z / (4 * q * q))

    val = quad(integrand, 0, np.sqrt(t), limit=200, epsabs=1e-15, epsrel=1e-12)[0]
    return -g * val


def laplace_periodic_profile(g: complex, a: float, zeta: float, t: float, z, gevrey_shift: float = 0.0) -> np.ndarray:
    """Time-periodic response to w_z(0) = g e^{i zeta t}: -g e^{i zeta t} e^{-z s}/s, s = sqrt(i zeta + shift + a^2)."""
    s = np.sqrt(1j * zeta + gevrey_shift + a * a)
    return -g * np.exp(1j * zeta * t) * np.exp(-np.asarray(z) * s) / s

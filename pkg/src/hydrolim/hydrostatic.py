"""Hydrostatic Navier-Stokes / Prandtl solver on the periodic strip.

    u_t + u u_x + v u_y - u_yy + p_x(t, x) = 0,   u_x + v_y = 0,   u = v = 0 at y = 0, 1.

Diffusion is Crank-Nicolson, advection second-order Adams-Bashforth, and the
pressure gradient of each mode k != 0 is the y-constant that keeps the
vertical mean of u_hat(k, .) zero.  The first step uses two implicit-diffusion
/ explicit-advection Euler half steps.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from . import discretization as disc
from .discretization import SpectralField
from .gevrey import GevreyParams, gevrey_norm

log = logging.getLogger(__name__)

CFL_LIMIT = 1.0
# implicit Euler startup damps the stiff transient that Crank-Nicolson keeps
STARTUP_STEPS = 1


class CFLError(RuntimeError):
    pass


class ConstraintError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class HydroState:
    u: SpectralField
    v: SpectralField
    px_hat: np.ndarray
    t: float
    step: int = 0
    nonlinear_prev: np.ndarray | None = field(default=None, repr=False)


def vertical_velocity(u: SpectralField) -> SpectralField:
    """v = -int_0^y u_x dz."""
    return -disc.antiderivative_y(disc.ddx(u), base=0.0)


def advection(u: SpectralField, v: SpectralField) -> SpectralField:
    """u u_x + v u_y, dealiased."""
    return disc.multiply(u, disc.ddx(u)) + disc.multiply(v, disc.ddy(u))


def initial_state(u0: SpectralField) -> HydroState:
    return HydroState(u=u0, v=vertical_velocity(u0), px_hat=np.zeros(u0.grid.nx, dtype=complex), t=0.0)


@lru_cache(maxsize=64)
def _implicit_operator(ny: int, theta_dt: float):
    """LU of I - theta_dt d_y^2 with Dirichlet rows, plus the pressure response z."""
    A = np.eye(ny) - theta_dt * disc.cheb_diff2(ny)
    A[0] = 0.0
    A[-1] = 0.0
    A[0, 0] = 1.0
    A[-1, -1] = 1.0
    lu = sla.lu_factor(A)
    ones = np.ones(ny)
    ones[0] = ones[-1] = 0.0
    z = sla.lu_solve(lu, ones)
    zint = float(disc.cc_weights(ny) @ z)
    return lu, z, zint


def _implicit_solve(rhs: np.ndarray, theta_dt: float, dt_p: float) -> tuple[np.ndarray, np.ndarray]:
    """Solve (I - theta_dt D2) u = rhs - dt_p P with P per mode fixed by int u dy = 0 (k != 0)."""
    nx, ny = rhs.shape
    lu, z, zint = _implicit_operator(ny, theta_dt)
    if abs(zint) < 1e-14:
        raise ConstraintError("pressure constraint is singular")
    b = rhs.copy()
    b[:, 0] = 0.0
    b[:, -1] = 0.0
    w = sla.lu_solve(lu, b.T).T
    P = (w @ disc.cc_weights(ny)) / (dt_p * zint)
    P[0] = 0.0
    return w - dt_p * P[:, None] * z[None, :], P


def cfl_number(state: HydroState, dt: float) -> float:
    grid = state.u.grid
    umax = disc.linf_norm(state.u)
    vmax = disc.linf_norm(state.v)
    dy_min = grid.y[1] - grid.y[0]
    return dt * (umax * max(grid.kmax_retained, 1) + vmax / dy_min)


def hydro_step(state: HydroState, dt: float, filter_alpha: float = 36.0, startup: int = STARTUP_STEPS) -> HydroState:
    """One CN-AB2 step; the first `startup` steps are pairs of implicit Euler half steps."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    cfl = cfl_number(state, dt)
    if cfl > CFL_LIMIT:
        raise CFLError(f"CFL number {cfl:.3f} exceeds {CFL_LIMIT} at t={state.t:.6g}")
    grid = state.u.grid
    D2 = grid.D2
    filt = disc.exponential_filter(grid, filter_alpha)[:, None] if filter_alpha > 0 else 1.0
    N_now = advection(state.u, state.v).coeffs

    if state.nonlinear_prev is None or state.step < startup:
        # two Euler half steps, implicit in diffusion
        h = dt / 2
        u_half, P1 = _implicit_solve(state.u.coeffs - h * N_now, h, h)
        uh = state.u.with_coeffs(u_half)
        N_half = advection(uh, vertical_velocity(uh)).coeffs
        u_new, P2 = _implicit_solve(u_half - h * N_half, h, h)
        P = 0.5 * (P1 + P2)
    else:
        rhs = state.u.coeffs + (dt / 2) * (state.u.coeffs @ D2.T) - dt * (1.5 * N_now - 0.5 * state.nonlinear_prev)
        u_new, P = _implicit_solve(rhs, dt / 2, dt)

    u_new = state.u.with_coeffs(u_new * filt)
    return HydroState(
        u=u_new,
        v=vertical_velocity(u_new),
        px_hat=P,
        t=state.t + dt,
        step=state.step + 1,
        nonlinear_prev=N_now,
    )


def time_derivative(state: HydroState) -> tuple[SpectralField, np.ndarray]:
    """Instantaneous (u_t, p_x) from the equation, with p_x fixing d/dt int u dy = 0 for k != 0."""
    u = state.u
    r = disc.ddy(disc.ddy(u)).coeffs - advection(u, state.v).coeffs
    px = r @ u.grid.weights
    px[0] = 0.0
    return u.with_coeffs(r - px[:, None]), px


def divergence_residual(state: HydroState) -> float:
    return disc.linf_norm(disc.ddx(state.u) + disc.ddy(state.v))


# ----------------------------------------------------------------------------
# driver


@dataclass
class MonitorLog:
    t: list = field(default_factory=list)
    tau: list = field(default_factory=list)
    min_dyy_u: list = field(default_factory=list)
    max_dyy_u: list = field(default_factory=list)
    xnorm_level1: list = field(default_factory=list)
    xnorm_level2: list = field(default_factory=list)

    COLUMNS = ("t", "tau", "min_dyy_u", "max_dyy_u", "Xnorm_level1", "Xnorm_level2")

    def append(self, t, tau, mn, mx, x1, x2):
        self.t.append(t)
        self.tau.append(tau)
        self.min_dyy_u.append(mn)
        self.max_dyy_u.append(mx)
        self.xnorm_level1.append(x1)
        self.xnorm_level2.append(x2)

    def rows(self):
        return zip(self.t, self.tau, self.min_dyy_u, self.max_dyy_u, self.xnorm_level1, self.xnorm_level2)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.COLUMNS)
            for row in self.rows():
                w.writerow([repr(float(x)) for x in row])


@dataclass(frozen=True)
class MonitorConfig:
    params: GevreyParams = GevreyParams()
    N0: int = 10
    delta0: float = 0.2
    convexity: str = "sup"  # "sup", "min" or "off"
    blowup_factor: float = 1e3
    every: int = 1

    def __post_init__(self):
        if self.convexity not in ("sup", "min", "off"):
            raise ValueError("convexity must be 'sup', 'min' or 'off'")


@dataclass
class HydroResult:
    status: str  # "ok", "convexity_breakdown", "blowup"
    state: HydroState
    log: MonitorLog
    trajectory: list
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def monitor_values(state: HydroState, mon: MonitorConfig) -> tuple:
    uy = disc.ddy(state.u)
    uyy = disc.ddy(uy)
    uyyy = disc.ddy(uyy)
    nod = uyy.nodal()
    return (
        mon.params.tau(state.t),
        float(nod.min()),
        float(nod.max()),
        gevrey_norm(uy, mon.N0 - 1, state.t, mon.params),
        gevrey_norm(uyyy, mon.N0 - 5, state.t, mon.params),
    )


def hydro_solve(
    u0: SpectralField,
    T: float,
    dt: float,
    monitors: MonitorConfig | None = None,
    *,
    filter_alpha: float = 36.0,
    store_every: int = 0,
    callback=None,
) -> HydroResult:
    """Advance to T.  store_every > 0 keeps every n-th state (step 0 included)."""
    mon = monitors or MonitorConfig()
    nsteps = int(round(T / dt))
    if not math.isclose(nsteps * dt, T, rel_tol=1e-9, abs_tol=1e-14):
        raise ValueError(f"T={T} is not a multiple of dt={dt}")
    state = initial_state(u0)
    log_ = MonitorLog()
    traj = [state] if store_every else []
    log_.append(state.t, *monitor_values(state, mon))
    x1_0 = max(log_.xnorm_level1[0], 1e-300)
    if callback:
        callback(state)
    for n in range(nsteps):
        state = hydro_step(state, dt, filter_alpha)
        state = replace(state, t=(n + 1) * dt)
        if store_every and (n + 1) % store_every == 0:
            traj.append(state)
        if callback:
            callback(state)
        if (n + 1) % mon.every and n + 1 != nsteps:
            continue
        vals = monitor_values(state, mon)
        log_.append(state.t, *vals)
        _, mn, mx, x1, _ = vals
        if mon.convexity == "min" and mn <= mon.delta0:
            return HydroResult("convexity_breakdown", state, log_, traj, f"min d_y^2 u = {mn:.4g} <= delta0 at t={state.t:.4g}")
        if mon.convexity == "sup" and mx <= mon.delta0:
            return HydroResult("convexity_breakdown", state, log_, traj, f"sup d_y^2 u = {mx:.4g} <= delta0 at t={state.t:.4g}")
        if not np.isfinite(x1) or x1 > mon.blowup_factor * x1_0:
            return HydroResult("blowup", state, log_, traj, f"X-norm grew to {x1:.4g} at t={state.t:.4g}")
    return HydroResult("ok", state, log_, traj)


def heat_sine_series(u0_profile, y: np.ndarray, t: float, modes: int = 200) -> np.ndarray:
    """Solution of u_t = u_yy, u(0) = u(1) = 0 by sine series of a callable profile (quadrature of coefficients)."""
    from scipy.integrate import quad

    out = np.zeros_like(y, dtype=float)
    for n in range(1, modes + 1):
        bn = 2 * quad(lambda s: u0_profile(s) * np.sin(n * np.pi * s), 0, 1, limit=200)[0]
        out += bn * np.exp(-((n * np.pi) ** 2) * t) * np.sin(n * np.pi * y)
    return out

"""Scaled anisotropic Navier-Stokes solver in vorticity-streamfunction form.

    omega = u_y - eps^2 v_x,   omega_t + u omega_x + v omega_y = (eps^2 d_x^2 + eta d_y^2) omega,
    (d_y^2 + eps^2 d_x^2) psi = omega,   u = psi_y,  v = -psi_x,  psi = psi_y = 0 at y = 0, 1.

No-slip is closed per mode with an influence matrix: two homogeneous vorticity
solves fix the wall vorticity so that psi_y vanishes at both walls.  The mean
flow (k = 0) is evolved as u directly, with the same scheme as the hydrostatic
solver.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from . import discretization as disc
from .discretization import SpectralField
from .hydrostatic import CFL_LIMIT, STARTUP_STEPS, CFLError, _implicit_solve

ENERGY_TOL = 1e-8


class InfluenceMatrixError(RuntimeError):
    pass


class InstabilityError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ANSState:
    omega: SpectralField
    psi: SpectralField
    u: SpectralField
    v: SpectralField
    epsilon: float
    eta: float = 1.0
    t: float = 0.0
    step: int = 0
    nonlinear_prev: tuple | None = field(default=None, repr=False)


@dataclass(frozen=True)
class Forcing:
    """Time-independent forcing: vorticity source (k != 0 rows used) and mean-flow source."""

    omega: np.ndarray | None = None
    u0: np.ndarray | None = None


@dataclass(frozen=True)
class _ModeOperator:
    lu_omega: tuple
    lu_psi: tuple
    omega_h: np.ndarray  # (2, ny) homogeneous vorticity solutions
    psi_h: np.ndarray  # (2, ny)
    inv_influence: np.ndarray  # (2, 2)
    dy0: np.ndarray
    dy1: np.ndarray


def _dirichlet(A: np.ndarray) -> np.ndarray:
    A = A.copy()
    A[0] = 0.0
    A[-1] = 0.0
    A[0, 0] = 1.0
    A[-1, -1] = 1.0
    return A


@lru_cache(maxsize=1024)
def mode_operator(ny: int, a: float, theta: float, eta: float) -> _ModeOperator:
    """Setup for (1 + theta a^2 - theta eta D2) omega = rhs, (D2 - a^2) psi = omega."""
    D = disc.cheb_diff(ny)
    D2 = disc.cheb_diff2(ny)
    I = np.eye(ny)
    lu_w = sla.lu_factor(_dirichlet((1 + theta * a * a) * I - theta * eta * D2))
    lu_p = sla.lu_factor(_dirichlet(D2 - a * a * I))
    omega_h = np.empty((2, ny))
    psi_h = np.empty((2, ny))
    for i, wall in enumerate((0, -1)):
        b = np.zeros(ny)
        b[wall] = 1.0
        w = sla.lu_solve(lu_w, b)
        r = w.copy()
        r[0] = r[-1] = 0.0
        omega_h[i] = w
        psi_h[i] = sla.lu_solve(lu_p, r)
    M = np.array([[D[0] @ psi_h[0], D[0] @ psi_h[1]], [D[-1] @ psi_h[0], D[-1] @ psi_h[1]]])
    if abs(np.linalg.det(M)) < 1e-14 * max(1.0, np.abs(M).max() ** 2):
        raise InfluenceMatrixError(f"influence matrix singular for a={a}")
    return _ModeOperator(lu_w, lu_p, omega_h, psi_h, np.linalg.inv(M), D[0].copy(), D[-1].copy())


def _closed_solve(op: _ModeOperator, rhs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vorticity/streamfunction rows (m, ny) with psi = psi_y = 0 at both walls."""
    b = rhs.copy()
    b[:, 0] = 0.0
    b[:, -1] = 0.0
    wp = sla.lu_solve(op.lu_omega, b.T).T
    r = wp.copy()
    r[:, 0] = 0.0
    r[:, -1] = 0.0
    pp = sla.lu_solve(op.lu_psi, r.T).T
    g = np.stack([pp @ op.dy0, pp @ op.dy1], axis=1)
    coef = -g @ op.inv_influence.T
    return wp + coef @ op.omega_h, pp + coef @ op.psi_h


def _mode_groups(grid: disc.GridSpec):
    """Row indices grouped by |k|, k != 0."""
    k = grid.k
    groups = {}
    for i, kk in enumerate(k):
        if kk != 0:
            groups.setdefault(abs(int(kk)), []).append(i)
    return {m: np.array(ix) for m, ix in sorted(groups.items())}


def velocities(psi: SpectralField, u_mean: np.ndarray) -> tuple[SpectralField, SpectralField]:
    u = disc.ddy(psi)
    c = u.coeffs
    c[0] = u_mean
    return psi.with_coeffs(c), -disc.ddx(psi)


def vorticity_from_velocity(u: SpectralField, v: SpectralField, epsilon: float) -> SpectralField:
    return disc.ddy(u) - disc.ddx(v) * epsilon**2


def initial_state(u0: SpectralField, v0: SpectralField, epsilon: float, eta: float = 1.0) -> ANSState:
    """psi_hat = i v_hat / k for k != 0; the k = 0 row of psi is int_0^y u dz."""
    if not 0 < epsilon:
        raise ValueError("epsilon must be positive")
    grid = u0.grid
    k = grid.k.astype(float)
    psi = np.zeros_like(u0.coeffs)
    nz = k != 0
    psi[nz] = 1j * v0.coeffs[nz] / k[nz, None]
    psi[0] = disc.integration_matrix(grid.ny) @ u0.coeffs[0]
    psi_f = u0.with_coeffs(psi)
    u, v = velocities(psi_f, u0.coeffs[0].copy())
    omega = vorticity_from_velocity(u0, v0, epsilon)
    return ANSState(omega=omega, psi=psi_f, u=u, v=v, epsilon=epsilon, eta=eta)


def nonlinear(state: ANSState) -> tuple[np.ndarray, np.ndarray]:
    """(u omega_x + v omega_y, k=0 row of u u_x + v u_y), dealiased."""
    u, v, w = state.u, state.v, state.omega
    Nw = disc.multiply(u, disc.ddx(w)) + disc.multiply(v, disc.ddy(w))
    Nu = disc.multiply(u, disc.ddx(u)) + disc.multiply(v, disc.ddy(u))
    return Nw.coeffs, Nu.coeffs[0].copy()


def cfl_number(state: ANSState, dt: float) -> float:
    grid = state.u.grid
    dy_min = grid.y[1] - grid.y[0]
    return dt * (disc.linf_norm(state.u) * max(grid.kmax_retained, 1) + disc.linf_norm(state.v) / dy_min)


def _advance(state: ANSState, rhs_w: np.ndarray, rhs_u: np.ndarray, theta: float, dt_p: float) -> tuple:
    """Implicit solve shared by the CN step and the Euler half steps."""
    grid = state.omega.grid
    eps, eta = state.epsilon, state.eta
    omega = np.zeros_like(rhs_w)
    psi = np.zeros_like(rhs_w)
    for m, rows in _mode_groups(grid).items():
        op = mode_operator(grid.ny, float(eps * m), theta, eta)
        omega[rows], psi[rows] = _closed_solve(op, rhs_w[rows])
    u0, _ = _implicit_solve(rhs_u[None, :], theta * eta, dt_p)
    u0 = u0[0]
    psi[0] = disc.integration_matrix(grid.ny) @ u0
    omega[0] = grid.D @ u0
    return omega, psi, u0


def _explicit_diffusion(state: ANSState) -> tuple[np.ndarray, np.ndarray]:
    grid = state.omega.grid
    k2 = (state.epsilon * grid.k) ** 2
    w = state.omega.coeffs
    Lw = state.eta * (w @ grid.D2.T) - k2[:, None] * w
    Lu = state.eta * (state.u.coeffs[0] @ grid.D2.T)
    return Lw, Lu


def ans_step(
    state: ANSState, dt: float, forcing: Forcing | None = None, filter_alpha: float = 36.0, startup: int = STARTUP_STEPS
) -> ANSState:
    """One CN-AB2 step; the first `startup` steps are pairs of implicit Euler half steps."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    cfl = cfl_number(state, dt)
    if cfl > CFL_LIMIT:
        raise CFLError(f"CFL number {cfl:.3f} exceeds {CFL_LIMIT} at t={state.t:.6g}")
    grid = state.omega.grid
    Fw = np.zeros(grid.shape, dtype=complex) if forcing is None or forcing.omega is None else forcing.omega
    Fu = np.zeros(grid.ny, dtype=complex) if forcing is None or forcing.u0 is None else forcing.u0
    Nw, Nu = nonlinear(state)
    w = state.omega.coeffs
    u0 = state.u.coeffs[0]

    if state.nonlinear_prev is None or state.step < startup:
        h = dt / 2
        om, ps, um = _advance(state, w - h * Nw + h * Fw, u0 - h * Nu + h * Fu, h, h)
        mid = _assemble(state, om, ps, um, 0.0)
        Nw1, Nu1 = nonlinear(mid)
        om, ps, um = _advance(mid, om - h * Nw1 + h * Fw, um - h * Nu1 + h * Fu, h, h)
    else:
        Nw_old, Nu_old = state.nonlinear_prev
        Lw, Lu = _explicit_diffusion(state)
        rhs_w = w + (dt / 2) * Lw - dt * (1.5 * Nw - 0.5 * Nw_old) + dt * Fw
        rhs_u = u0 + (dt / 2) * Lu - dt * (1.5 * Nu - 0.5 * Nu_old) + dt * Fu
        om, ps, um = _advance(state, rhs_w, rhs_u, dt / 2, dt)

    if filter_alpha > 0:
        filt = disc.exponential_filter(grid, filter_alpha)[:, None]
        om = om * filt
        ps = ps * filt
    new = _assemble(state, om, ps, um, dt)
    return ANSState(
        omega=new.omega,
        psi=new.psi,
        u=new.u,
        v=new.v,
        epsilon=state.epsilon,
        eta=state.eta,
        t=state.t + dt,
        step=state.step + 1,
        nonlinear_prev=(Nw, Nu),
    )


def _assemble(state: ANSState, om, ps, um, dt) -> ANSState:
    psi = state.psi.with_coeffs(ps)
    u, v = velocities(psi, um)
    return ANSState(
        omega=state.omega.with_coeffs(om), psi=psi, u=u, v=v, epsilon=state.epsilon, eta=state.eta, t=state.t + dt
    )


# ----------------------------------------------------------------------------
# diagnostics


def kinetic_energy(state: ANSState) -> float:
    """(1/2) ||(u, eps v)||^2 with the (1/2pi) int_S normalization."""
    return 0.5 * (disc.l2_norm(state.u) ** 2 + state.epsilon**2 * disc.l2_norm(state.v) ** 2)


def dissipation(u: SpectralField, v: SpectralField, epsilon: float, eta: float = 1.0) -> float:
    """||(eps u_x, sqrt(eta) u_y, eps^2 v_x, eps sqrt(eta) v_y)||^2."""
    ux, uy = disc.ddx(u), disc.ddy(u)
    vx, vy = disc.ddx(v), disc.ddy(v)
    return (
        epsilon**2 * disc.l2_norm(ux) ** 2
        + eta * disc.l2_norm(uy) ** 2
        + epsilon**4 * disc.l2_norm(vx) ** 2
        + eta * epsilon**2 * disc.l2_norm(vy) ** 2
    )


def energy_identity_defect(u0: SpectralField, v0: SpectralField, epsilon: float, T: float, dt: float, eta: float = 1.0) -> float:
    """|E(T) - E(0) + dt sum_n dissipation(midpoint_n)| / T on an unfiltered, unforced run.

    Crank-Nicolson conserves this discrete balance exactly for the linear part,
    so what remains measures the explicit advection and the startup steps.
    """
    states = []
    res = ans_solve(u0, v0, epsilon, T, dt, eta=eta, filter_alpha=0.0, callback=lambda s: states.append((s.u, s.v)))
    integral = 0.0
    for (ua, va), (ub, vb) in zip(states, states[1:]):
        integral += dt * dissipation((ua + ub) * 0.5, (va + vb) * 0.5, epsilon, eta)
    return abs(res.energy[-1] - res.energy[0] + integral) / T


def divergence_residual(state: ANSState) -> float:
    return disc.linf_norm(disc.ddx(state.u) + disc.ddy(state.v))


def vorticity_consistency(state: ANSState) -> float:
    """Max |omega - (u_y - eps^2 v_x)| over the grid."""
    return disc.linf_norm(state.omega - vorticity_from_velocity(state.u, state.v, state.epsilon))


@dataclass
class ANSResult:
    state: ANSState
    times: list
    energy: list
    trajectory: list

    @property
    def energy_increments(self) -> np.ndarray:
        return np.diff(self.energy)


def ans_solve(
    u0: SpectralField,
    v0: SpectralField,
    epsilon: float,
    T: float,
    dt: float,
    *,
    eta: float = 1.0,
    filter_alpha: float = 36.0,
    forcing: Forcing | None = None,
    store_every: int = 0,
    energy_tol: float = ENERGY_TOL,
    callback=None,
) -> ANSResult:
    """Advance to T.  Without forcing, energy growth above energy_tol per step aborts."""
    nsteps = int(round(T / dt))
    if not math.isclose(nsteps * dt, T, rel_tol=1e-9, abs_tol=1e-14):
        raise ValueError(f"T={T} is not a multiple of dt={dt}")
    state = initial_state(u0, v0, epsilon, eta)
    times, energy = [0.0], [kinetic_energy(state)]
    traj = [state] if store_every else []
    if callback:
        callback(state)
    for n in range(nsteps):
        state = ans_step(state, dt, forcing, filter_alpha)
        E = kinetic_energy(state)
        if forcing is None and E - energy[-1] > energy_tol * max(energy[-1], 1e-300):
            raise InstabilityError(
                f"kinetic energy grew from {energy[-1]:.6e} to {E:.6e} at t={state.t:.6g} (eps={epsilon})"
            )
        times.append((n + 1) * dt)
        energy.append(E)
        if store_every and (n + 1) % store_every == 0:
            traj.append(state)
        if callback:
            callback(state)
    return ANSResult(state, times, energy, traj)

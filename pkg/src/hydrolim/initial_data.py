"""Initial data: a convex shear family, compatibility checks and corner correction."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import discretization as disc
from .discretization import GridSpec, SpectralField
from .gevrey import GevreyParams, gevrey_norm

NORMALIZATIONS = ("mean", "area", "none")


class DataSpecError(ValueError):
    pass


class ConvexityError(ValueError):
    """The corrected data lost the convexity margin."""


class CorrectionDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class DataSpec:
    c0: float = 1.0
    a: float = 0.1
    delta0: float = 0.2
    N0: int = 10
    M_bound: float | None = None

    def __post_init__(self):
        if self.c0 <= 0:
            raise DataSpecError("c0 must be positive")
        if self.delta0 <= 0:
            raise DataSpecError("delta0 must be positive")
        if self.N0 < 10:
            raise DataSpecError("N0 must be >= 10")
        if abs(self.a) > (self.c0 - self.delta0) / 3 + 1e-15:
            raise DataSpecError(f"|a|={abs(self.a)} exceeds (c0 - delta0)/3 = {(self.c0 - self.delta0) / 3}")


def make_family(spec: DataSpec, grid: GridSpec) -> tuple[SpectralField, SpectralField]:
    """u0 = c0 (y^2 - y) + a cos x y(1-y)(1-2y), v0 = -int_0^y d_x u0."""
    c0, a = spec.c0, spec.a
    u0 = SpectralField.from_function(grid, lambda X, Y: c0 * (Y**2 - Y) + a * np.cos(X) * Y * (1 - Y) * (1 - 2 * Y))
    v0 = SpectralField.from_function(grid, lambda X, Y: 0.5 * a * np.sin(X) * Y**2 * (1 - Y) ** 2)
    return u0, v0


def v_from_u(u: SpectralField) -> SpectralField:
    """v = -int_0^y d_x u dz."""
    return -disc.antiderivative_y(disc.ddx(u), base=0.0)


def _area_term(u: SpectralField, normalization: str) -> float:
    """The subtracted int_S d_y^2 u0 under the chosen normalization."""
    if normalization not in NORMALIZATIONS:
        raise ValueError(f"normalization must be one of {NORMALIZATIONS}")
    if normalization == "none":
        return 0.0
    # x-mean of int_0^1 d_y^2 u dy
    mean = float(disc.integrate_y(disc.ddy(disc.ddy(u)))[0].real)
    return mean if normalization == "mean" else 2 * np.pi * mean


def corner_target(u: SpectralField, normalization: str = "mean") -> SpectralField:
    """Right-hand side of the corner condition, as a y-independent field (all columns equal)."""
    uu = disc.transform_x(u.grid, u.nodal() ** 2)
    rhs = -disc.integrate_y(disc.ddx(uu)) + disc.integrate_y(disc.ddy(disc.ddy(u)))
    rhs[0] -= _area_term(u, normalization)
    return u.with_coeffs(np.repeat(rhs[:, None], u.grid.ny, axis=1))


def check_compatibility(u0: SpectralField, v0: SpectralField, normalization: str = "mean") -> dict:
    """Max residuals of the compatibility conditions (nodal max over x)."""
    div = disc.ddx(u0) + disc.ddy(v0)
    walls = np.concatenate([u0.nodal()[:, [0, -1]].ravel(), v0.nodal()[:, [0, -1]].ravel()])
    mean_dxu = disc.integrate_y(disc.ddx(u0))
    uyy = disc.ddy(disc.ddy(u0)).nodal()
    target = corner_target(u0, normalization).nodal()[:, 0]
    return {
        "divergence": disc.linf_norm(div),
        "boundary": float(np.abs(walls).max()),
        "vertical_mean_dxu": float(np.abs(np.fft.ifft(mean_dxu * u0.grid.nx)).max()),
        "corner_bottom": float(np.abs(uyy[:, 0] - target).max()),
        "corner_top": float(np.abs(uyy[:, -1] - target).max()),
        "normalization": normalization,
    }


def convexity_min(u: SpectralField) -> float:
    return float(disc.ddy(disc.ddy(u)).nodal().min())


def correct_com2(
    u0: SpectralField,
    tolerance: float = 1e-10,
    *,
    delta0: float,
    normalization: str = "mean",
    max_iter: int = 50,
) -> SpectralField:
    """Add b0(x) y^2(1-y)^3 + b1(x) y^3(1-y)^2 + c(x) y^3(1-y)^3 so that the corner condition holds.

    c = -(7/3)(b0 + b1) keeps every vertical integral unchanged.  The profiles vanish
    with their first derivative at both walls, so only the quadratic flux term
    of the target moves between iterations.
    """
    grid = u0.grid
    y = grid.y
    p0 = y**2 * (1 - y) ** 3
    p1 = y**3 * (1 - y) ** 2
    pc = y**3 * (1 - y) ** 3
    b0 = np.zeros(grid.nx, dtype=complex)
    b1 = np.zeros(grid.nx, dtype=complex)
    uyy0 = disc.ddy(disc.ddy(u0)).coeffs
    u = u0
    for it in range(max_iter + 1):
        target = corner_target(u, normalization).coeffs[:, 0]
        uyy = disc.ddy(disc.ddy(u)).coeffs
        res = max(np.abs(uyy[:, 0] - target).max(), np.abs(uyy[:, -1] - target).max())
        if res <= tolerance:
            break
        if it == max_iter:
            raise CorrectionDivergedError(f"corner correction did not converge in {max_iter} steps (residual {res:.3e})")
        # second derivative of p0 at y=0 is 2, of p1 at y=1 is 2
        b0 = (target - uyy0[:, 0]) / 2
        b1 = (target - uyy0[:, -1]) / 2
        c = -(7.0 / 3.0) * (b0 + b1)
        corr = np.outer(b0, p0) + np.outer(b1, p1) + np.outer(c, pc)
        u = u0.with_coeffs(u0.coeffs + corr)
    margin = convexity_min(u)
    if margin < 2 * delta0:
        raise ConvexityError(f"corrected data has min d_y^2 u0 = {margin:.4g} < 2 delta0 = {2 * delta0:.4g}")
    return u


def check_gevrey_bound(u0: SpectralField, sigma: float, tau0: float, N0: int) -> float:
    """M = ||d_y u0||_{X^{N0}} + ||d_y^3 u0||_{X^{N0-4}} at radius tau0."""
    params = GevreyParams(sigma=sigma, tau0=tau0, beta=1.0)
    uy = disc.ddy(u0)
    uyyy = disc.ddy(disc.ddy(uy))
    return gevrey_norm(uy, N0, 0.0, params) + gevrey_norm(uyyy, N0 - 4, 0.0, params)


def validation_report(u0, v0, spec: DataSpec, params: GevreyParams, normalization: str = "mean") -> dict:
    rep = check_compatibility(u0, v0, normalization)
    rep["convexity_min"] = convexity_min(u0)
    rep["convexity_required"] = 2 * spec.delta0
    rep["v_recompute"] = disc.linf_norm(v_from_u(u0) - v0)
    rep["M"] = check_gevrey_bound(u0, params.sigma, params.tau0, spec.N0)
    return rep

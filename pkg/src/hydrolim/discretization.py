"""Fourier x Chebyshev discretization of the periodic strip T x (0, 1).

Fields are stored as complex Fourier coefficients in x (numpy FFT order,
forward transform normalized by 1/nx) times nodal values on
Chebyshev-Gauss-Lobatto points in y, mapped affinely to [0, 1] with
increasing order (y[0] == 0.0, y[-1] == 1.0 exactly).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np
from numpy.polynomial import chebyshev as C

REALITY_RTOL = 1e-13


class DimensionError(ValueError):
    """Raised when array shapes do not match the grid."""


# ----------------------------------------------------------------------------
# Chebyshev machinery on [0, 1]


@lru_cache(maxsize=None)
def cheb_nodes(ny: int) -> np.ndarray:
    n = ny - 1
    theta = np.pi * np.arange(ny) / n
    y = np.sin(theta / 2) ** 2
    y.setflags(write=False)
    return y


def _cheb_diff_unit(ny: int) -> tuple[np.ndarray, np.ndarray]:
    """First-derivative matrix on [-1, 1] CGL nodes and the node differences."""
    n = ny - 1
    theta = np.pi * np.arange(ny) / n
    w = (-1.0) ** np.arange(ny)
    w[0] *= 0.5
    w[-1] *= 0.5
    # x_i - x_j for x = -cos(theta), written with sines to avoid cancellation
    dx = 2 * np.sin((theta[:, None] + theta[None, :]) / 2) * np.sin((theta[:, None] - theta[None, :]) / 2)
    np.fill_diagonal(dx, 1.0)
    D = (w[None, :] / w[:, None]) / dx
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D, dx


@lru_cache(maxsize=None)
def cheb_diff(ny: int) -> np.ndarray:
    """First-derivative collocation matrix d/dy on the mapped CGL nodes."""
    D = 2.0 * _cheb_diff_unit(ny)[0]  # dx/dy = 2
    D.setflags(write=False)
    return D


@lru_cache(maxsize=None)
def cheb_diff2(ny: int) -> np.ndarray:
    """Second-derivative matrix by the Weideman-Reddy recursion (more accurate than D @ D)."""
    D, dx = _cheb_diff_unit(ny)
    D2 = 2 * D * (np.diag(D)[:, None] - 1.0 / dx)
    np.fill_diagonal(D2, 0.0)
    np.fill_diagonal(D2, -D2.sum(axis=1))
    D2 = 4.0 * D2
    D2.setflags(write=False)
    return D2


@lru_cache(maxsize=None)
def cc_weights(ny: int) -> np.ndarray:
    """Clenshaw-Curtis weights for the mapped CGL nodes on [0, 1]."""
    n = ny - 1
    theta = np.pi * np.arange(ny) / n
    w = np.zeros(ny)
    v = np.ones(ny - 2)
    inner = slice(1, n)
    if n % 2 == 0:
        w[0] = w[n] = 1.0 / (n**2 - 1)
        for k in range(1, n // 2):
            v -= 2 * np.cos(2 * k * theta[inner]) / (4 * k**2 - 1)
        v -= np.cos(n * theta[inner]) / (n**2 - 1)
    else:
        w[0] = w[n] = 1.0 / n**2
        for k in range(1, (n - 1) // 2 + 1):
            v -= 2 * np.cos(2 * k * theta[inner]) / (4 * k**2 - 1)
    w[inner] = 2 * v / n
    w = 0.5 * w
    w.setflags(write=False)
    return w


@lru_cache(maxsize=None)
def values_to_cheb(ny: int) -> np.ndarray:
    """Matrix mapping nodal values to Chebyshev coefficients in x = 2y - 1."""
    n = ny - 1
    j = np.arange(ny)
    theta = np.pi * j / n
    # T_m(-cos theta) = (-1)^m cos(m theta)
    m = np.arange(ny)
    T = ((-1.0) ** m)[:, None] * np.cos(m[:, None] * theta[None, :])
    cj = np.ones(ny)
    cj[0] = cj[-1] = 2.0
    M = (2.0 / n) * T / cj[None, :] / cj[:, None]
    M.setflags(write=False)
    return M


@lru_cache(maxsize=None)
def antiderivative_coeffs(ny: int) -> np.ndarray:
    """Coefficient map: Chebyshev coeffs of f -> coeffs of int_0^y f (degree ny)."""
    eye = np.eye(ny)
    A = np.column_stack([C.chebint(eye[:, m], lbnd=-1, scl=0.5) for m in range(ny)])
    A = A @ values_to_cheb(ny)
    A.setflags(write=False)
    return A


@lru_cache(maxsize=None)
def integration_matrix(ny: int) -> np.ndarray:
    """Q with (Q f)_j = int_0^{y_j} f dy for the interpolant of f."""
    x = 2 * cheb_nodes(ny) - 1
    Q = C.chebvander(x, ny) @ antiderivative_coeffs(ny)
    Q[0] = 0.0
    Q.setflags(write=False)
    return Q


def interpolation_matrix(ny: int, y_points) -> np.ndarray:
    """Matrix evaluating the degree ny-1 interpolant at arbitrary y in [0, 1]."""
    x = 2 * np.asarray(y_points, dtype=float) - 1
    return C.chebvander(x, ny - 1) @ values_to_cheb(ny)


@lru_cache(maxsize=None)
def refine_matrix(ny: int) -> np.ndarray:
    """Interpolate onto the CGL grid with twice as many intervals (2ny - 1 nodes)."""
    M = interpolation_matrix(ny, cheb_nodes(2 * ny - 1))
    M.setflags(write=False)
    return M


def l2y_squared(values: np.ndarray) -> np.ndarray:
    """Exact int_0^1 |p|^2 dy for the nodal interpolant p, along the last axis."""
    ny = values.shape[-1]
    fine = values @ refine_matrix(ny).T
    return (np.abs(fine) ** 2) @ cc_weights(2 * ny - 1)


def l2y_inner(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact int_0^1 conj(a) b dy for nodal interpolants, along the last axis."""
    ny = a.shape[-1]
    R = refine_matrix(ny).T
    return (np.conj(a @ R) * (b @ R)) @ cc_weights(2 * ny - 1)


# ----------------------------------------------------------------------------
# Grid and field types


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int
    dealias_fraction: Fraction = Fraction(2, 3)

    def __post_init__(self):
        if self.nx < 4 or self.nx % 2:
            raise ValueError(f"nx must be an even integer >= 4, got {self.nx}")
        if self.ny < 8:
            raise ValueError(f"ny must be >= 8, got {self.ny}")
        frac = Fraction(self.dealias_fraction).limit_denominator(10_000)
        if not 0 < frac <= 1:
            raise ValueError("dealias_fraction must lie in (0, 1]")
        object.__setattr__(self, "dealias_fraction", frac)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def x(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.nx) / self.nx

    @property
    def y(self) -> np.ndarray:
        return cheb_nodes(self.ny)

    @property
    def k(self) -> np.ndarray:
        """Integer wavenumbers in FFT order; the Nyquist mode is -nx/2."""
        return np.fft.fftfreq(self.nx, d=1.0 / self.nx).round().astype(int)

    @property
    def kmax_retained(self) -> int:
        return int(self.dealias_fraction * (self.nx // 2))

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    @property
    def D(self) -> np.ndarray:
        return cheb_diff(self.ny)

    @property
    def D2(self) -> np.ndarray:
        return cheb_diff2(self.ny)

    @property
    def weights(self) -> np.ndarray:
        return cc_weights(self.ny)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier-in-x coefficients times nodal Chebyshev values in y."""

    grid: GridSpec
    coeffs: np.ndarray
    reality_flag: bool = True

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != self.grid.shape:
            raise DimensionError(f"coeffs shape {c.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, grid: GridSpec, reality_flag: bool = True) -> SpectralField:
        return cls(grid, np.zeros(grid.shape, dtype=complex), reality_flag)

    @classmethod
    def from_function(cls, grid: GridSpec, fn) -> SpectralField:
        X, Y = grid.mesh()
        return transform_x(grid, np.broadcast_to(fn(X, Y), grid.shape).astype(float))

    def with_coeffs(self, coeffs: np.ndarray, reality_flag: bool | None = None) -> SpectralField:
        flag = self.reality_flag if reality_flag is None else reality_flag
        return SpectralField(self.grid, coeffs, flag)

    def nodal(self) -> np.ndarray:
        return inverse_transform_x(self)

    def mode(self, k: int) -> np.ndarray:
        return self.coeffs[k % self.grid.nx]

    def is_conjugate_symmetric(self, rtol: float = REALITY_RTOL) -> bool:
        c = self.coeffs
        mirror = np.conj(c[(-self.grid.k) % self.grid.nx])
        # the Nyquist row has no partner; it is compared with itself
        scale = max(np.abs(c).max(), 1e-300)
        return bool(np.abs(c - mirror).max() <= rtol * scale)

    def __add__(self, other: SpectralField) -> SpectralField:
        return self.with_coeffs(self.coeffs + other.coeffs, self.reality_flag and other.reality_flag)

    def __sub__(self, other: SpectralField) -> SpectralField:
        return self.with_coeffs(self.coeffs - other.coeffs, self.reality_flag and other.reality_flag)

    def __neg__(self) -> SpectralField:
        return self.with_coeffs(-self.coeffs)

    def __mul__(self, scalar) -> SpectralField:
        real = self.reality_flag and np.isrealobj(scalar)
        return self.with_coeffs(self.coeffs * scalar, real)

    __rmul__ = __mul__


# ----------------------------------------------------------------------------
# Operations


def transform_x(grid: GridSpec, nodal: np.ndarray) -> SpectralField:
    nodal = np.asarray(nodal)
    if nodal.shape != grid.shape:
        raise DimensionError(f"nodal field shape {nodal.shape} does not match grid {grid.shape}")
    real = np.isrealobj(nodal)
    return SpectralField(grid, np.fft.fft(nodal, axis=0) / grid.nx, real)


def inverse_transform_x(f: SpectralField) -> np.ndarray:
    vals = np.fft.ifft(f.coeffs * f.grid.nx, axis=0)
    return vals.real if f.reality_flag else vals


def ddx(f: SpectralField) -> SpectralField:
    k = f.grid.k.astype(float)
    k[f.grid.nx // 2] = 0.0
    return f.with_coeffs(1j * k[:, None] * f.coeffs)


def ddy(f: SpectralField) -> SpectralField:
    return f.with_coeffs(f.coeffs @ f.grid.D.T)


def abs_dx(f: SpectralField) -> SpectralField:
    """The Fourier multiplier |D| (multiplication by |k|)."""
    return f.with_coeffs(np.abs(f.grid.k)[:, None] * f.coeffs)


def integrate_y(f: SpectralField, lower: float = 0.0, upper: float = 1.0) -> np.ndarray:
    """Per-mode int_lower^upper f(k, y) dy."""
    if not (0.0 <= lower <= upper <= 1.0):
        raise ValueError(f"integration bounds must satisfy 0 <= lower <= upper <= 1, got ({lower}, {upper})")
    ny = f.grid.ny
    if lower == 0.0 and upper == 1.0:
        return f.coeffs @ cc_weights(ny)
    anti = f.coeffs @ antiderivative_coeffs(ny).T
    ends = C.chebvander(np.array([2 * lower - 1, 2 * upper - 1]), ny)
    vals = anti @ ends.T
    return vals[:, 1] - vals[:, 0]


def antiderivative_y(f: SpectralField, base: float = 0.0) -> SpectralField:
    """Nodal values of int_base^y f dy' with base 0 or 1."""
    Q = integration_matrix(f.grid.ny)
    g = f.coeffs @ Q.T
    if base == 1.0:
        g = g - g[:, -1:]
    elif base != 0.0:
        raise ValueError("base must be 0 or 1")
    return f.with_coeffs(g)


def dealias_mask(grid: GridSpec) -> np.ndarray:
    frac = grid.dealias_fraction
    # |k| > frac * nx/2 with exact rational arithmetic
    return np.abs(grid.k) * frac.denominator <= frac.numerator * (grid.nx // 2)


def dealias(f: SpectralField) -> SpectralField:
    return f.with_coeffs(f.coeffs * dealias_mask(f.grid)[:, None])


def multiply(f: SpectralField, g: SpectralField) -> SpectralField:
    """Pseudospectral product, dealiased."""
    p = inverse_transform_x(f) * inverse_transform_x(g)
    out = transform_x(f.grid, p)
    return dealias(out.with_coeffs(out.coeffs, f.reality_flag and g.reality_flag))


def evaluate_y(f: SpectralField, y_points) -> np.ndarray:
    """Per-mode values of the y-interpolant at arbitrary points in [0, 1]."""
    return f.coeffs @ interpolation_matrix(f.grid.ny, y_points).T


def l2_norm(f: SpectralField) -> float:
    """sqrt((1/2pi) int_S |f|^2) with exact y-integration of the interpolant."""
    return float(np.sqrt(l2y_squared(f.coeffs).sum()))


def linf_norm(f: SpectralField) -> float:
    return float(np.abs(inverse_transform_x(f)).max())


def exponential_filter(grid: GridSpec, alpha: float, order: int = 16) -> np.ndarray:
    """exp(-alpha (|k|/k_c)^order) with k_c the last retained mode."""
    kc = max(grid.kmax_retained, 1)
    return np.exp(-alpha * (np.abs(grid.k) / kc) ** order)


# ----------------------------------------------------------------------------
# Snapshot files

MAGIC = b"HLIM1"
_HEADER = struct.Struct("<5sIIBd")


def write_snapshot(path, f: SpectralField, t: float) -> None:
    """Header (magic, nx, ny, reality flag, time) then (re, im) pairs, k ascending from -nx/2."""
    grid = f.grid
    header = _HEADER.pack(MAGIC, grid.nx, grid.ny, int(bool(f.reality_flag)), float(t))
    ordered = np.fft.fftshift(f.coeffs, axes=0)
    body = np.ascontiguousarray(ordered).view(np.float64).astype("<f8")
    Path(path).write_bytes(header + body.tobytes())


def read_snapshot(path, dealias_fraction: Fraction = Fraction(2, 3)) -> tuple[SpectralField, float]:
    raw = Path(path).read_bytes()
    magic, nx, ny, flag, t = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if body.size != 2 * nx * ny:
        raise DimensionError(f"{path}: expected {2 * nx * ny} floats, found {body.size}")
    coeffs = np.fft.ifftshift(body.view(np.complex128).reshape(nx, ny), axes=0)
    grid = GridSpec(nx, ny, dealias_fraction)
    return SpectralField(grid, coeffs.copy(), bool(flag)), t

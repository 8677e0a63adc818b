"""Gevrey weights, X^r norms, frequency cut-offs and sampled lemma checks."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .discretization import SpectralField, l2y_squared

OVERFLOW_LIMIT = 700.0


class GevreyOverflowError(ArithmeticError):
    """exp(Phi) would leave double range; raise resolution or lower tau."""


@dataclass(frozen=True)
class GevreyParams:
    sigma: float = 1.0
    tau0: float = 0.5
    beta: float = 4.0

    def __post_init__(self):
        if self.tau0 < 0:
            raise ValueError("tau0 must be nonnegative")
        if self.beta < 1:
            raise ValueError("beta must be >= 1")
        if not 8 / 9 <= self.sigma <= 1:
            warnings.warn(f"sigma={self.sigma} lies outside [8/9, 1]", stacklevel=2)

    def tau(self, t: float) -> float:
        return self.tau0 * math.exp(-self.beta * t)


def bracket(k) -> np.ndarray:
    """<k> = (1 + k^2)^(1/2)."""
    return np.sqrt(1.0 + np.asarray(k, dtype=float) ** 2)


def phi(t: float, k, params: GevreyParams) -> np.ndarray:
    if t < 0:
        raise ValueError("t must be nonnegative")
    return params.tau(t) * bracket(k) ** params.sigma


def _guarded_phi(t: float, k, params: GevreyParams) -> np.ndarray:
    ph = phi(t, k, params)
    if np.max(ph, initial=0.0) > OVERFLOW_LIMIT:
        raise GevreyOverflowError(
            f"tau(t)<k_max>^sigma = {np.max(ph):.1f} exceeds {OVERFLOW_LIMIT}; reduce tau0 or nx"
        )
    return ph


def apply_multiplier(f: SpectralField, t: float, params: GevreyParams, sign: int = 1) -> SpectralField:
    """f_Phi = e^{sign Phi(t, D)} f."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    ph = _guarded_phi(t, f.grid.k, params) if sign == 1 else phi(t, f.grid.k, params)
    return f.with_coeffs(f.coeffs * np.exp(sign * ph)[:, None])


def mode_weights(k, r: float, t: float, params: GevreyParams) -> np.ndarray:
    """<k>^{2r} e^{2 Phi(t, k)}."""
    return bracket(k) ** (2 * r) * np.exp(2 * _guarded_phi(t, k, params))


def gevrey_norm(f: SpectralField, r: float, t: float, params: GevreyParams) -> float:
    """||f||_{X^r_{sigma,tau(t)}}: l2 over k, L2 over y."""
    per_mode = l2y_squared(f.coeffs)
    return float(np.sqrt(np.sum(mode_weights(f.grid.k, r, t, params) * per_mode)))


def gevrey_norm_sq_components(fields, r: float, t: float, params: GevreyParams) -> float:
    """Sum of squared X^r norms of several fields."""
    return sum(gevrey_norm(f, r, t, params) ** 2 for f in fields)


def trace_norm(coeffs: np.ndarray, k: np.ndarray, r: float, t: float, params: GevreyParams) -> float:
    """|g|_{X^r} for y-independent data given by its Fourier coefficients."""
    return float(np.sqrt(np.sum(mode_weights(k, r, t, params) * np.abs(coeffs) ** 2)))


# ----------------------------------------------------------------------------
# frequency cut-offs


def _smooth_step(u: np.ndarray) -> np.ndarray:
    u = np.clip(u, 0.0, 1.0)
    out = np.zeros_like(u)
    inside = (u > 0) & (u < 1)
    a = np.exp(-1.0 / u[inside])
    b = np.exp(-1.0 / (1.0 - u[inside]))
    out[inside] = a / (a + b)
    out[u >= 1] = 1.0
    return out


def chi(x) -> np.ndarray:
    """Even cut-off: 0 on |x| <= 1/2, 1 on |x| >= 1, smooth monotone step between."""
    ax = np.abs(np.asarray(x, dtype=float))
    return _smooth_step(2 * ax - 1)


def cutoff_high(f: SpectralField, N: float, profile=chi) -> SpectralField:
    """P_{>=N} f: multiply mode k by chi(k/N)."""
    if N <= 0:
        raise ValueError("N must be positive")
    return f.with_coeffs(f.coeffs * profile(f.grid.k / N)[:, None])


def cutoff_low(f: SpectralField, N: float, profile=chi) -> SpectralField:
    """P_{<=N} f = f - P_{>=N-1} f."""
    if N - 1 <= 0:
        return f.with_coeffs(np.zeros_like(f.coeffs))
    return f - cutoff_high(f, N - 1, profile)


def n_of_eps(epsilon: float, sigma: float) -> int:
    """N(eps) = floor(eps^{-2/(2-sigma)})."""
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    val = epsilon ** (-2.0 / (2.0 - sigma))
    n = math.floor(val)
    # guard against 99.99999999 for exact powers
    if math.isclose(val, n + 1, rel_tol=1e-12):
        n += 1
    return n


def subadditivity_violation(params: GevreyParams, kmax: int, times) -> float:
    """max of Phi(t,k) - Phi(t,k-l) - Phi(t,l) over |k|, |l| <= kmax and the time grid."""
    k = np.arange(-kmax, kmax + 1)
    worst = -np.inf
    for t in times:
        p = phi(t, k, params)
        pk = p[:, None]
        pl = p[None, :]
        diff = k[:, None] - k[None, :]
        pd = phi(t, diff, params)
        worst = max(worst, float(np.max(pk - pd - pl)))
    return worst


# ----------------------------------------------------------------------------
# sampled inequality checks on trigonometric polynomials in x
#
# sequences are indexed by k = -K..K; products are exact convolutions.


def _bracket_seq(c: np.ndarray) -> np.ndarray:
    K = (c.size - 1) // 2
    return bracket(np.arange(-K, K + 1))


def _hs(c: np.ndarray, s: float) -> float:
    return float(np.sqrt(np.sum(_bracket_seq(c) ** (2 * s) * np.abs(c) ** 2)))


def _xs(c: np.ndarray, s: float, tau: float, sigma: float) -> float:
    b = _bracket_seq(c)
    return float(np.sqrt(np.sum(b ** (2 * s) * np.exp(2 * tau * b**sigma) * np.abs(c) ** 2)))


def _pad(c: np.ndarray, K: int) -> np.ndarray:
    k0 = (c.size - 1) // 2
    out = np.zeros(2 * K + 1, dtype=complex)
    out[K - k0 : K + k0 + 1] = c
    return out


def _wavenumbers(c: np.ndarray) -> np.ndarray:
    K = (c.size - 1) // 2
    return np.arange(-K, K + 1)


def random_trig_poly(rng: np.random.Generator, degree: int) -> np.ndarray:
    """Coefficients of a real trigonometric polynomial, k = -degree..degree."""
    c = rng.standard_normal(degree + 1) + 1j * rng.standard_normal(degree + 1)
    c[0] = c[0].real
    return np.concatenate([np.conj(c[:0:-1]), c])


def _conv(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    return np.convolve(f, g)


def _ratio(lhs: float, rhs: float) -> float:
    if lhs == 0.0:
        return 0.0
    return lhs / rhs


def product_ratio(f: np.ndarray, g: np.ndarray, r: float, s: float, tau: float, sigma: float) -> float:
    """|fg|_{X^r} / (|f|_{X^s}|g|_{X^r} + |f|_{X^r}|g|_{X^s})."""
    lhs = _xs(_conv(f, g), r, tau, sigma)
    rhs = _xs(f, s, tau, sigma) * _xs(g, r, tau, sigma) + _xs(f, r, tau, sigma) * _xs(g, s, tau, sigma)
    return _ratio(lhs, rhs)


def check_product_inequality(
    r: float, s: float, trials: int = 100, *, degree: int = 8, sigma: float = 1.0, tau: float = 0.3, seed: int = 0
) -> dict:
    """Empirical constant in |fg|_{X^r} <= C|f|_{X^s}|g|_{X^r} + C|f|_{X^r}|g|_{X^s}."""
    rng = np.random.default_rng(seed)
    ratios = [
        product_ratio(random_trig_poly(rng, degree), random_trig_poly(rng, degree), r, s, tau, sigma)
        for _ in range(trials)
    ]
    return {
        "lemma": "product",
        "params": {"r": r, "s": s, "degree": degree, "sigma": sigma, "tau": tau},
        "trials": trials,
        "seed": seed,
        "max_ratio": float(np.max(ratios)) if ratios else 0.0,
    }


def _commutator_sobolev(f, g, r):
    """[<D>^r, f] d_x g as a sequence."""
    dg = 1j * _wavenumbers(g) * g
    prod = _conv(f, dg)
    gr = _bracket_seq(g) ** r * dg
    return _bracket_seq(prod) ** r * prod - _conv(f, gr)


def _commutator_cutoff(f, g, N):
    dg = 1j * _wavenumbers(g) * g
    prod = _conv(f, dg)
    return chi(_wavenumbers(prod) / N) * prod - _conv(f, chi(_wavenumbers(g) / N) * dg)


def _commutator_multiplier(f, g, tau, sigma, N=None):
    """(f d_x g)_Phi - f d_x g_Phi, optionally with P_{>=N} applied to both."""
    kg = _wavenumbers(g)
    dg = 1j * kg * g
    prod = _conv(f, dg)
    kp = _wavenumbers(prod)
    lhs = np.exp(tau * bracket(kp) ** sigma) * prod
    dg_phi = np.exp(tau * bracket(kg) ** sigma) * dg
    if N is not None:
        lhs = chi(kp / N) * lhs
        dg_phi = chi(kg / N) * dg_phi
    return lhs - _conv(f, dg_phi)


def check_commutator_inequalities(
    r: float,
    s1: float,
    s: float,
    delta: float,
    trials: int = 100,
    *,
    N: int = 4,
    degree: int = 8,
    sigma: float = 1.0,
    tau: float = 0.3,
    seed: int = 0,
) -> list[dict]:
    """Empirical constants for the Sobolev, cut-off and Gevrey-multiplier commutator bounds."""
    if not (r >= 0 and s1 > 1.5 and s > 0.5 and 0 <= delta <= 1):
        raise ValueError("parameters outside the admissible range r>=0, s1>3/2, s>1/2, 0<=delta<=1")
    rng = np.random.default_rng(seed)
    worst = {"sobolev": 0.0, "cutoff": 0.0, "multiplier": 0.0, "multiplier_cutoff": 0.0}
    for _ in range(trials):
        f = random_trig_poly(rng, degree)
        g = random_trig_poly(rng, degree)
        tail = _hs(f, r + 1 - delta) * _hs(g, s + delta)

        lhs = _hs(_commutator_sobolev(f, g, r), 0.0)
        worst["sobolev"] = max(worst["sobolev"], _ratio(lhs, _hs(f, s1) * _hs(g, r) + tail))

        g_half = chi(_wavenumbers(g) / (N / 2)) * g
        lhs = _hs(_commutator_cutoff(f, g, N), r)
        worst["cutoff"] = max(worst["cutoff"], _ratio(lhs, _hs(f, s1) * _hs(g_half, r) + tail))

        xtail = _xs(f, r + 1 - delta, tau, sigma) * _xs(g, s + delta, tau, sigma)
        lhs = _hs(_commutator_multiplier(f, g, tau, sigma), r)
        rhs = _xs(f, s1, tau, sigma) * _xs(g, r + sigma, tau, sigma) + xtail
        worst["multiplier"] = max(worst["multiplier"], _ratio(lhs, rhs))

        lhs = _hs(_commutator_multiplier(f, g, tau, sigma, N), r)
        rhs = _xs(f, s1, tau, sigma) * _xs(g_half, r + sigma, tau, sigma) + xtail
        worst["multiplier_cutoff"] = max(worst["multiplier_cutoff"], _ratio(lhs, rhs))

    params = {"r": r, "s1": s1, "s": s, "delta": delta, "N": N, "degree": degree, "sigma": sigma, "tau": tau}
    return [
        {"lemma": f"commutator_{name}", "params": params, "trials": trials, "seed": seed, "max_ratio": float(val)}
        for name, val in worst.items()
    ]

"""Run configuration, epsilon sweeps, rate fits and the verification suite."""
from __future__ import annotations

import configparser
import hashlib
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import anisotropic as an
from . import boundary_layer as bl
from . import discretization as disc
from . import error_analysis as ea
from . import hydrostatic as hs
from . import initial_data as idt
from .discretization import GridSpec, SpectralField
from .gevrey import GevreyParams

log = logging.getLogger(__name__)

SECTION = "run"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    # data
    c0: float = 1.0
    a: float = 0.1
    delta0: float = 0.2
    N0: int = 10
    corner: str = "none"  # normalization for the corner correction, or "off"
    # gevrey
    sigma: float = 1.0
    tau0: float = 0.5
    beta: float = 4.0
    # numerics
    nx: int = 32
    ny: int = 64
    dt: float = 2.5e-4
    T: float = 0.25
    filter_alpha: float = 36.0
    dealias_fraction: Fraction = Fraction(2, 3)
    L_lift: float = 1.0
    lift_n: int = 64
    sample_every: int = 100
    A: float = 1.0
    convexity: str = "sup"
    # sweep
    epsilons: tuple = (0.2, 0.1, 0.05)
    out: str = "runs"
    seed: int = 0

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilons)
        object.__setattr__(self, "epsilons", eps)
        if any(not 0 < e < 1 for e in eps):
            raise ConfigError("epsilon values must lie in (0, 1)")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ConfigError("epsilon values must be strictly decreasing")
        if self.corner not in idt.NORMALIZATIONS + ("off",):
            raise ConfigError(f"corner must be one of {idt.NORMALIZATIONS + ('off',)}")
        if self.dt <= 0 or self.T <= 0:
            raise ConfigError("dt and T must be positive")
        nsteps = round(self.T / self.dt)
        if abs(nsteps * self.dt - self.T) > 1e-9 * self.T:
            raise ConfigError(f"T={self.T} is not a multiple of dt={self.dt}")
        if self.sample_every < 1:
            raise ConfigError("sample_every must be >= 1")
        if self.nx < 4 or self.nx % 2 or self.ny < 8:
            raise ConfigError("need even nx >= 4 and ny >= 8")

    @property
    def nsteps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def params(self) -> GevreyParams:
        return GevreyParams(sigma=self.sigma, tau0=self.tau0, beta=self.beta)

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.nx, self.ny, self.dealias_fraction)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dealias_fraction"] = str(self.dealias_fraction)
        d["epsilons"] = list(self.epsilons)
        return d

    def digest(self) -> str:
        """Hash of the numerical content (output directory excluded)."""
        d = self.to_dict()
        d.pop("out")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def _coerce(name: str, raw: str, default):
    raw = raw.strip()
    if name == "epsilons":
        return tuple(float(x) for x in raw.replace(",", " ").split()) if raw else ()
    if name == "dealias_fraction":
        return Fraction(raw)
    if isinstance(default, bool):
        return raw.lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def load_config(path=None, **overrides) -> RunConfig:
    """key = value file (no section header needed), then keyword overrides."""
    known = {f.name: f.default for f in fields(RunConfig)}
    by_lower = {name.lower(): name for name in known}
    values = {}
    if path is not None:
        text = Path(path).read_text()
        cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            cp.read_string(f"[{SECTION}]\n" + text)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        for key, raw in cp.items(SECTION):
            if key.lower() not in by_lower:
                raise ConfigError(f"unknown config key '{key}'")
            key = by_lower[key.lower()]
            try:
                values[key] = _coerce(key, raw, known[key])
            except ValueError as exc:
                raise ConfigError(f"bad value for '{key}': {raw!r}") from exc
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


# ----------------------------------------------------------------------------
# data and solves


def initial_data(cfg: RunConfig) -> tuple[SpectralField, SpectralField]:
    grid = cfg.grid
    spec = idt.DataSpec(c0=cfg.c0, a=cfg.a, delta0=cfg.delta0, N0=cfg.N0)
    u0, v0 = idt.make_family(spec, grid)
    if cfg.corner != "off":
        u0 = idt.correct_com2(u0, delta0=cfg.delta0, normalization=cfg.corner)
        v0 = idt.v_from_u(u0)
    return u0, v0


def data_report(cfg: RunConfig) -> dict:
    u0, v0 = initial_data(cfg)
    spec = idt.DataSpec(c0=cfg.c0, a=cfg.a, delta0=cfg.delta0, N0=cfg.N0)
    norm = cfg.corner if cfg.corner != "off" else "none"
    return idt.validation_report(u0, v0, spec, cfg.params, norm)


def run_hydro(cfg: RunConfig, u0: SpectralField) -> hs.HydroResult:
    mon = hs.MonitorConfig(params=cfg.params, N0=cfg.N0, delta0=cfg.delta0, convexity=cfg.convexity)
    return hs.hydro_solve(u0, cfg.T, cfg.dt, mon, filter_alpha=cfg.filter_alpha, store_every=1)


@dataclass
class EpsilonResult:
    epsilon: float
    report: ea.ErrorReport
    series: list  # rows (t, L2, Linf, bootstrap_ratio)
    energies: list  # rows (t, E, G, D)
    final_u: np.ndarray = field(repr=False)
    final_v: np.ndarray = field(repr=False)


def _hydro_at(grid: GridSpec, coeffs: np.ndarray, t: float) -> hs.HydroState:
    u = SpectralField(grid, coeffs)
    return hs.HydroState(u=u, v=hs.vertical_velocity(u), px_hat=np.zeros(grid.nx, dtype=complex), t=t)


def run_epsilon(cfg: RunConfig, epsilon: float, hydro_coeffs: np.ndarray) -> EpsilonResult:
    """ANS solve in lockstep with the stored hydrostatic trajectory, then lifts and diagnostics."""
    grid = cfg.grid
    params = cfg.params
    u0, v0 = initial_data(cfg)
    n = cfg.nsteps
    if hydro_coeffs.shape[0] != n + 1:
        raise ValueError("hydrostatic trajectory does not match the step count")
    stride = cfg.sample_every
    state = an.initial_state(u0, v0, epsilon)
    energy = an.kinetic_energy(state)
    boot = ea.BootstrapLog(epsilon)
    times, H = [], {s: ([], []) for s in (0, 1)}
    series, samples = [], []
    es = hd = None
    for j in range(n + 1):
        t = j * cfg.dt
        if j:
            state = an.ans_step(state, cfg.dt, None, cfg.filter_alpha)
            E = an.kinetic_energy(state)
            if E - energy > an.ENERGY_TOL * max(energy, 1e-300):
                raise an.InstabilityError(f"kinetic energy grew at t={t:.6g} (eps={epsilon})")
            energy = E
        state = replace(state, t=t)
        hst = _hydro_at(grid, hydro_coeffs[j], t)
        es = ea.build_error_state(state, hst)
        hd = ea.hydro_derivatives(hst)
        for side in (0, 1):
            b = ea.boundary_data_h(es, hd, epsilon, side)
            H[side][0].append(b.h)
            H[side][1].append(b.h_l)
        times.append(t)
        l2, linf = ea.error_norms(es)
        boot.push(t, *ea.bootstrap_integrand(es, params, cfg.N0))
        series.append((t, l2, linf, float(boot.ratio[-1])))
        if j % stride == 0 or j == n:
            samples.append((j, t, es.uR.coeffs.copy(), es.vR.coeffs.copy()))
    residual = ea.vorticity_boundary_residual(es, hd, epsilon)

    k = grid.k
    lifts = [
        bl.lift_solve(times, np.array(H[s][0]), s, epsilon, k, L=cfg.L_lift, n=cfg.lift_n, store_every=stride)
        for s in (0, 1)
    ]
    energies = []
    lemma = (0.0, 0.0)
    for idx, (j, t, uc, vc) in enumerate(samples):
        if abs(lifts[0].times[idx] - t) > 1e-9:
            raise RuntimeError("lift samples are out of step with the solver samples")
        w0, ub0, vb0 = bl.strip_fields(lifts[0], grid, idx)
        w1, ub1, vb1 = bl.strip_fields(lifts[1], grid, idx)
        uR, vR = SpectralField(grid, uc), SpectralField(grid, vc)
        wR = disc.ddy(uR) - disc.ddx(vR) * epsilon**2
        wbl = w0 + w1
        es_t = ea.ErrorState(uR, vR, wR, wbl, wR - wbl, ub0 + ub1, vb0 + vb1, epsilon, t)
        et = ea.energy_functionals(es_t, params, cfg.A, cfg.N0)
        energies.append((t, et.E, et.G, et.D))
        if j == n:
            _, Psi_y, Psi_x = bl.psi_correction(lifts[0], lifts[1], grid, epsilon, idx)
            lemma = ea.lemma_identity_residual(es_t, Psi_y, Psi_x)
            final_et = et

    r = cfg.N0 - 7
    h_norms = {}
    for s, name in ((0, "h0"), (1, "h1")):
        h_norms[name] = ea.h_norms(np.array(H[s][0]), k, times, params, r + 1)
        h_norms[name + "_l"] = ea.h_norms(np.array(H[s][1]), k, times, params, r)
    report = ea.ErrorReport(
        epsilon=float(epsilon),
        t=float(cfg.T),
        L2_error=float(max(row[1] for row in series)),
        Linf_error=float(max(row[2] for row in series)),
        E=float(final_et.E),
        G=float(final_et.G),
        D=float(final_et.D),
        bootstrap_ratio=float(boot.ratio[-1]),
        h_norms=h_norms,
        residuals={
            "wall_identity": residual["max_residual"],
            "wall_identity_lhs": residual["max_lhs"],
            "halfspace_gap": residual["max_halfspace_gap"],
            "interior_u": float(lemma[0]),
            "interior_v": float(lemma[1]),
            "lift_L": [float(lifts[0].L), float(lifts[1].L)],
            "divergence": an.divergence_residual(state),
        },
    )
    return EpsilonResult(epsilon, report, series, energies, state.u.coeffs, state.v.coeffs)


def _worker(args):
    cfg, eps, coeffs = args
    t0 = time.perf_counter()
    try:
        res = run_epsilon(cfg, eps, coeffs)
    except Exception as exc:  # surface the context of the failing sweep point
        raise RuntimeError(f"run failed at eps={eps}: {type(exc).__name__}: {exc}") from exc
    log.info("eps=%g done in %.1f s", eps, time.perf_counter() - t0)
    return res


def worker_count(n_tasks: int) -> int:
    cap = os.environ.get("HYDROLIM_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(limit, n_tasks))


def _write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    lines += [",".join(repr(float(x)) for x in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def run_sweep(cfg: RunConfig, out=None) -> dict:
    """Hydrostatic solve once, then one worker per epsilon.  Writes everything under out."""
    out = Path(out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    u0, _ = initial_data(cfg)
    hyd = run_hydro(cfg, u0)
    hyd.log.write_csv(out / "hydro_monitor.csv")
    disc.write_snapshot(out / "hydro_u.snap", hyd.state.u, hyd.state.t)
    summary = {"config": cfg.to_dict(), "config_hash": cfg.digest(), "hydro_status": hyd.status, "hydro_message": hyd.message}
    if not hyd.ok:
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
        raise RuntimeError(f"hydrostatic solve stopped: {hyd.status} ({hyd.message})")
    coeffs = np.array([s.u.coeffs for s in hyd.trajectory])
    tasks = [(cfg, eps, coeffs) for eps in cfg.epsilons]
    nw = worker_count(len(tasks))
    if nw > 1:
        with ProcessPoolExecutor(max_workers=nw) as pool:
            results = list(pool.map(_worker, tasks))
    else:
        results = [_worker(t) for t in tasks]
    reports = []
    for res in results:
        d = out / f"eps_{res.epsilon:g}"
        d.mkdir(exist_ok=True)
        (d / "report.json").write_text(res.report.to_json() + "\n")
        _write_csv(d / "series.csv", ("t", "L2_error", "Linf_error", "bootstrap_ratio"), res.series)
        _write_csv(d / "energy.csv", ("t", "E", "G", "D"), res.energies)
        grid = cfg.grid
        disc.write_snapshot(d / "u.snap", SpectralField(grid, res.final_u), cfg.T)
        disc.write_snapshot(d / "v.snap", SpectralField(grid, res.final_v), cfg.T)
        reports.append(res.report)
    if len(reports) >= 3:
        summary["rate_fit"] = {
            "L2": fit_rate([r.epsilon for r in reports], [r.L2_error for r in reports]).to_dict(),
            "Linf": fit_rate([r.epsilon for r in reports], [r.Linf_error for r in reports]).to_dict(),
        }
    summary["reports"] = [f"eps_{r.epsilon:g}/report.json" for r in reports]
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


# ----------------------------------------------------------------------------
# rate fit


@dataclass(frozen=True)
class RateFit:
    epsilons: tuple
    errors: tuple
    slope: float
    intercept: float
    r2: float

    def passes(self, threshold: float = 1.8) -> bool:
        return self.slope >= threshold

    def to_dict(self) -> dict:
        return {"epsilons": list(self.epsilons), "errors": list(self.errors), "slope": self.slope, "intercept": self.intercept, "r2": self.r2}


def fit_rate(epsilons, errors) -> RateFit:
    """Least squares line through (log eps, log error)."""
    e = np.asarray(epsilons, dtype=float)
    y = np.asarray(errors, dtype=float)
    if e.size < 3:
        raise ValueError("a rate fit needs at least 3 points")
    if np.any(e <= 0) or np.any(y <= 0):
        raise ValueError("epsilons and errors must be positive")
    X, Y = np.log(e), np.log(y)
    slope, intercept = np.polyfit(X, Y, 1)
    resid = Y - (slope * X + intercept)
    ss = np.sum((Y - Y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss if ss > 0 else 1.0
    return RateFit(tuple(e.tolist()), tuple(y.tolist()), float(slope), float(intercept), float(r2))


def collect_reports(paths) -> list[ea.ErrorReport]:
    """Report files, or directories searched for */report.json; sorted by decreasing epsilon."""
    files = []
    for p in map(Path, paths):
        if p.is_dir():
            files.extend(sorted(p.glob("**/report.json")))
        elif p.exists():
            files.append(p)
        else:
            raise FileNotFoundError(p)
    reports = [ea.ErrorReport.from_json(f.read_text()) for f in files]
    return sorted(reports, key=lambda r: -r.epsilon)

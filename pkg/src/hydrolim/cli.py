"""Command line entry point: gen-data, run, rate-fit, verify, plot."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import discretization as disc
from . import harness
from . import verification

EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("hydrolim")


class UsageError(Exception):
    pass


def _config(args) -> harness.RunConfig:
    try:
        return harness.load_config(args.config, out=getattr(args, "out", None), seed=getattr(args, "seed", None))
    except (harness.ConfigError, FileNotFoundError) as exc:
        raise UsageError(str(exc)) from exc


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


# ----------------------------------------------------------------------------
# subcommands


def cmd_gen_data(args) -> int:
    cfg = _config(args)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    u0, v0 = harness.initial_data(cfg)
    disc.write_snapshot(out / "u0.snap", u0, 0.0)
    disc.write_snapshot(out / "v0.snap", v0, 0.0)
    rep = harness.data_report(cfg)
    (out / "data_report.json").write_text(_dump(rep) + "\n")
    print(_dump(rep))
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _config(args)
    summary = harness.run_sweep(cfg)
    print(_dump({k: summary[k] for k in summary if k != "config"}))
    return EXIT_OK


def cmd_rate_fit(args) -> int:
    if not args.reports:
        raise UsageError("rate-fit needs report files or run directories")
    try:
        reports = harness.collect_reports(args.reports)
    except FileNotFoundError as exc:
        raise UsageError(f"no such file: {exc}") from exc
    if len(reports) < 3:
        raise UsageError(f"a rate fit needs at least 3 epsilon points, found {len(reports)}")
    eps = [r.epsilon for r in reports]
    fits = {
        "L2": harness.fit_rate(eps, [r.L2_error for r in reports]),
        "Linf": harness.fit_rate(eps, [r.Linf_error for r in reports]),
    }
    verdict = all(f.passes(args.threshold) for f in fits.values())
    out = {name: f.to_dict() for name, f in fits.items()}
    out["threshold"] = args.threshold
    out["verdict"] = "PASS" if verdict else "FAIL"
    print(_dump(out))
    return EXIT_OK if verdict else EXIT_NUMERICAL


def cmd_verify(args) -> int:
    rep = verification.run_suite(args.level, args.seed if args.seed is not None else 0)
    text = _dump(rep)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK if rep["summary"]["failed"] == 0 else EXIT_NUMERICAL


ERRORS_SCRIPT = """\
import csv
import json
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("errors_vs_eps.csv")))
fit = json.load(open("fit.json"))
eps = [float(r["epsilon"]) for r in rows]
for col in ("L2_error", "Linf_error"):
    plt.loglog(eps, [float(r[col]) for r in rows], "o-", label=col)
if "L2" in fit:
    import math
    line = [math.exp(fit["L2"]["intercept"]) * e ** fit["L2"]["slope"] for e in eps]
    plt.loglog(eps, line, "k--", label="fit slope %.3f" % fit["L2"]["slope"])
plt.xlabel("epsilon")
plt.ylabel("sup_t error")
plt.legend()
plt.savefig("errors_vs_eps.png", dpi=150)
"""

ENERGY_SCRIPT = """\
import csv
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("energy_vs_t.csv")))
for eps in sorted({r["epsilon"] for r in rows}, key=float, reverse=True):
    sel = [r for r in rows if r["epsilon"] == eps]
    for col, style in (("E", "-"), ("G", "--"), ("D", ":")):
        plt.semilogy([float(r["t"]) for r in sel], [float(r[col]) for r in sel], style, label="%s eps=%s" % (col, eps))
plt.xlabel("t")
plt.legend(fontsize=7)
plt.savefig("energy_vs_t.png", dpi=150)
"""

RADIUS_SCRIPT = """\
import csv
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("gevrey_radius.csv")))
plt.plot([float(r["t"]) for r in rows], [float(r["tau"]) for r in rows])
plt.xlabel("t")
plt.ylabel("tau(t)")
plt.savefig("gevrey_radius.png", dpi=150)
"""


def cmd_plot(args) -> int:
    if not args.inputs:
        raise UsageError("plot needs run directories or report files")
    try:
        reports = harness.collect_reports(args.inputs)
    except FileNotFoundError as exc:
        raise UsageError(f"no such file: {exc}") from exc
    if not reports:
        raise UsageError("no reports found in the given inputs")
    out = Path(args.out or "plots")
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "errors_vs_eps.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("epsilon", "L2_error", "Linf_error"))
        for r in reports:
            w.writerow((repr(r.epsilon), repr(r.L2_error), repr(r.Linf_error)))
    fit = {}
    if len(reports) >= 3:
        eps = [r.epsilon for r in reports]
        fit = {
            "L2": harness.fit_rate(eps, [r.L2_error for r in reports]).to_dict(),
            "Linf": harness.fit_rate(eps, [r.Linf_error for r in reports]).to_dict(),
        }
    (out / "fit.json").write_text(_dump(fit) + "\n")

    energy_rows, radius_rows = [], []
    run_dirs = sorted({p for p in map(Path, args.inputs) if p.is_dir()})
    for d in run_dirs:
        for f in sorted(d.glob("**/energy.csv")):
            eps = f.parent.name.removeprefix("eps_")
            for row in csv.DictReader(open(f)):
                energy_rows.append((eps, row["t"], row["E"], row["G"], row["D"]))
        for f in sorted(d.glob("**/hydro_monitor.csv")):
            radius_rows += [(row["t"], row["tau"]) for row in csv.DictReader(open(f))]
    with open(out / "energy_vs_t.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("epsilon", "t", "E", "G", "D"))
        w.writerows(energy_rows)
    with open(out / "gevrey_radius.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("t", "tau"))
        w.writerows(radius_rows)
    (out / "plot_errors.py").write_text(ERRORS_SCRIPT)
    (out / "plot_energy.py").write_text(ENERGY_SCRIPT)
    (out / "plot_radius.py").write_text(RADIUS_SCRIPT)
    print(f"wrote plot data and scripts to {out}")
    return EXIT_OK


# ----------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hydrolim", description="Hydrostatic-limit spectral laboratory")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_help="output directory"):
        sp.add_argument("--config", help="key = value config file")
        sp.add_argument("--out", help=out_help)
        sp.add_argument("--seed", type=int)

    sp = sub.add_parser("gen-data", help="build and validate the initial data")
    common(sp)
    sp.set_defaults(func=cmd_gen_data)

    sp = sub.add_parser("run", help="hydrostatic solve plus the epsilon sweep")
    common(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("rate-fit", help="fit log error against log epsilon")
    sp.add_argument("reports", nargs="*", help="report.json files or run directories")
    sp.add_argument("--threshold", type=float, default=1.8)
    sp.set_defaults(func=cmd_rate_fit)

    sp = sub.add_parser("verify", help="module self-checks")
    sp.add_argument("--level", choices=verification.LEVELS, default="quick")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", help="write the JSON report here")
    sp.add_argument("--config", help="accepted for symmetry; unused")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("plot", help="CSV data and matplotlib scripts from run outputs")
    sp.add_argument("inputs", nargs="*", help="run directories or report files")
    sp.add_argument("--out", help="directory for the plot data")
    sp.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Every command writes either a CSV table or a JSON report.  CSV output starts
with ``#`` comment lines echoing the version and configuration; JSON reports
carry ``config``, ``result``, ``references`` and ``diagnostics``.  Numbers are
written with 17 significant digits so they round-trip exactly.

Exit codes: 0 success, 2 bad configuration, 3 an exact identity failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from . import counting as ct
from . import domains as dm
from . import kappa as kp

GOLDEN_DIR = Path(__file__).resolve().parent / "golden"
GOLDEN_KAPPA = GOLDEN_DIR / "kappa_d3.csv"
GOLDEN_ARGV = ["kappa", "--dim", "3", "--a-min", "-5", "--a-max", "5", "--steps", "41"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IDENTITY = 3


class ConfigError(ValueError):
    pass


@dataclass
class Output:
    config: dict
    columns: list[str]
    rows: list[list]
    result: dict
    references: dict = field(default_factory=dict)
    pole_warnings: list[str] = field(default_factory=list)
    exit_code: int = EXIT_OK
    figure: Callable[[str], None] | None = None


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _json_value(v):
    if isinstance(v, dict):
        return {k: _json_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_json_value(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        # JSON has no inf/nan; strings keep the value readable
        return v if math.isfinite(v) else fmt(v)
    return v


def render_csv(out: Output) -> str:
    buf = io.StringIO()
    buf.write(f"# dtnlab {__version__}\n")
    buf.write("# config: " + json.dumps(_json_value(out.config)) + "\n")
    for w in out.pole_warnings:
        buf.write(f"# warning: {w}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(out.columns)
    for row in out.rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def render_json(out: Output, runtime_ms: float) -> str:
    payload = {
        "version": __version__,
        "config": out.config,
        "result": out.result,
        "references": out.references,
        "diagnostics": {"pole_warnings": out.pole_warnings, "runtime_ms": round(runtime_ms, 3)},
    }
    return json.dumps(_json_value(payload), indent=2, ensure_ascii=False) + "\n"


# ---------------------------------------------------------------------------
# Argument helpers
# ---------------------------------------------------------------------------

def _domain(args) -> dm.ModelDomain:
    try:
        if args.domain == "disk":
            return dm.ModelDomain.disk(args.radius)
        if args.domain == "ball":
            return dm.ModelDomain.ball(args.radius)
        if args.domain == "rect":
            return dm.ModelDomain.rectangle(args.l1, args.l2)
        return dm.ModelDomain.hemisphere()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _domain_config(args) -> dict:
    if args.domain in ("disk", "ball"):
        return {"domain": args.domain, "radius": args.radius}
    if args.domain == "rect":
        return {"domain": args.domain, "l1": args.l1, "l2": args.l2}
    return {"domain": args.domain}


def _window(args) -> ct.SpectralWindow:
    by_a = args.a1 is not None or args.a2 is not None
    by_theta = args.theta1 is not None or args.theta2 is not None
    if by_a == by_theta:
        raise ConfigError("give either --a1/--a2 or --theta1/--theta2")
    try:
        if by_a:
            if args.a1 is None or args.a2 is None:
                raise ConfigError("both --a1 and --a2 are required")
            return ct.SpectralWindow(args.a1, args.a2)
        if args.theta1 is None or args.theta2 is None:
            raise ConfigError("both --theta1 and --theta2 are required")
        return ct.SpectralWindow.from_theta(args.theta1, args.theta2)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _window_config(args) -> dict:
    if args.a1 is not None:
        return {"a1": args.a1, "a2": args.a2}
    return {"theta1": args.theta1, "theta2": args.theta2}


def _lams(args, minimum: int = 1) -> list[float]:
    lams = args.lams or []
    if len(lams) < minimum:
        raise ConfigError(f"need at least {minimum} --lambda value(s)")
    for l in lams:
        if not (l > 0 and math.isfinite(l)):
            raise ConfigError(f"--lambda must be positive, got {l}")
    return lams


def _need_dtn(domain: dm.ModelDomain):
    if domain.kind not in (dm.Kind.DISK, dm.Kind.BALL):
        raise ConfigError(f"DtN spectra are available for disk and ball, not {domain.kind.value}")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_kappa(args) -> Output:
    try:
        d = kp.check_dimension(args.dim)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    lo, hi, steps = args.a_min, args.a_max, args.steps
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
        raise ConfigError("need finite --a-min <= --a-max")
    if steps < 1 or (steps < 2 and lo != hi):
        raise ConfigError("--steps must be >= 2 (or 1 when --a-min == --a-max)")
    grid = [lo] if steps == 1 else np.linspace(lo, hi, steps).tolist()
    columns = ["a", "kappa", "kappa_quadrature"]
    if d == 3:
        columns.append("kappa_closed_form_d3")
    if args.halfline:
        columns.append("kappa_halfline")
    rows = []
    for a in grid:
        row = [a, kp.kappa(a, d), kp.kappa_quadrature(a, d).value]
        if d == 3:
            row.append(kp.kappa_closed_form_d3(a).value)
        if args.halfline:
            from .halfline import kappa_from_boundary_layer

            row.append(kappa_from_boundary_layer(a, d, rtol=args.tol_rel) if a != 0 else math.nan)
        rows.append(row)
    config = {"command": "kappa", "dim": d, "a_min": lo, "a_max": hi, "steps": steps,
              "halfline": bool(args.halfline)}
    result = {"columns": columns, "rows": rows}
    refs = {"neumann_value": kp.neumann_value(d), "dirichlet_value": kp.dirichlet_value(d)}

    def figure(path):
        from . import plotting

        cols = {name: [r[i] for r in rows] for i, name in enumerate(columns) if i > 0}
        plotting.kappa_curve(path, grid, cols, d)

    return Output(config, columns, rows, result, refs, figure=figure)


def cmd_spectrum(args) -> Output:
    domain = _domain(args)
    _need_dtn(domain)
    lam = _lams(args)[0]
    if args.n_max < 0:
        raise ConfigError("--n-max must be nonnegative")
    beta, pole = dm.dtn_branch_values(domain, lam, args.n_max)
    mult = dm.multiplicities(domain, args.n_max)
    rows = [[i, int(mult[i]), "POLE" if pole[i] else float(beta[i])] for i in range(args.n_max + 1)]
    columns = ["index", "multiplicity", "beta"]
    config = {"command": "spectrum", **_domain_config(args), "lambda": lam, "n_max": args.n_max}
    warn = [f"lambda={lam!r} is a Dirichlet frequency on branch {i}" for i in np.flatnonzero(pole)]

    def figure(path):
        from . import plotting

        plotting.branch_values(path, np.arange(args.n_max + 1), np.nan_to_num(beta), pole,
                               f"{domain.kind.value}, lambda={lam:g}")

    return Output(config, columns, rows, {"columns": columns, "rows": rows}, {}, warn, figure=figure)


def cmd_count(args) -> Output:
    domain = _domain(args)
    _need_dtn(domain)
    window = _window(args)
    if not window.finite:
        raise ConfigError("count needs a finite window")
    lams = _lams(args)
    reports = ct.parallel_map(lambda l: ct.count_dtn(domain, l, window), lams)
    columns = ["lambda", "count", "weyl_prediction", "rel_discrepancy"]
    rows = [[r.lam, r.count, r.weyl_prediction, r.rel_discrepancy] for r in reports]
    config = {"command": "count", **_domain_config(args), **_window_config(args), "lambda": lams}
    result = {"counts": [{"lambda": r.lam, "count": r.count} for r in reports]}
    refs = {"weyl_prediction": [r.weyl_prediction for r in reports],
            "kappa_a1": kp.kappa(window.a1, domain.d), "kappa_a2": kp.kappa(window.a2, domain.d)}
    warn = [w for r in reports for w in r.pole_warnings]
    return Output(config, columns, rows, result, refs, warn)


def cmd_bs_check(args) -> Output:
    domain = _domain(args)
    _need_dtn(domain)
    window = _window(args)
    if not window.finite:
        raise ConfigError("bs-check needs a finite window")
    lams = _lams(args)
    checks = ct.parallel_map(lambda l: ct.birman_schwinger_check(domain, l, window), lams)
    columns = ["lambda", "lhs", "rhs", "equal"]
    rows = [[c.lam, c.lhs, c.rhs, c.equal] for c in checks]
    config = {"command": "bs-check", **_domain_config(args), **_window_config(args), "lambda": lams}
    if len(checks) == 1:
        c = checks[0]
        result = {"lhs": c.lhs, "rhs": c.rhs, "equal": c.equal}
    else:
        result = {"checks": [{"lambda": c.lam, "lhs": c.lhs, "rhs": c.rhs, "equal": c.equal} for c in checks]}
    bad = [{"lambda": c.lam, "index": b.index, "dtn": b.dtn, "robin": b.robin}
           for c in checks for b in c.discrepancies]
    if bad:
        result["discrepancies"] = bad
    warn = [w for c in checks for w in c.pole_warnings]
    code = EXIT_OK if all(c.equal for c in checks) else EXIT_IDENTITY
    return Output(config, columns, rows, result, {}, warn, exit_code=code)


def cmd_weyl_fit(args) -> Output:
    domain = _domain(args)
    _need_dtn(domain)
    window = _window(args)
    if not window.finite:
        raise ConfigError("weyl-fit needs a finite window")
    lams = _lams(args, minimum=3)
    try:
        fit = ct.weyl_fit(domain, window, lams)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    columns = ["lambda", "count", "count_over_lambda_power", "discrepancy"]
    p = fit.reference_power
    rows = [[l, n, n / l**p, dsc] for l, n, dsc in zip(fit.lams, fit.counts, fit.discrepancies)]
    config = {"command": "weyl-fit", **_domain_config(args), **_window_config(args), "lambda": lams}
    result = {"fitted_power": fit.power, "fitted_coefficient": fit.coefficient,
              "fitted_coefficient_free": fit.coefficient_free,
              "counts": list(fit.counts), "discrepancies": list(fit.discrepancies)}
    refs = {"power": fit.reference_power, "coefficient": fit.reference_coefficient}

    def figure(path):
        from . import plotting

        plotting.weyl_ladder(path, fit.lams, fit.counts, p, fit.reference_coefficient)

    return Output(config, columns, rows, result, refs, figure=figure)


def cmd_measure(args) -> Output:
    domain = _domain(args)
    _need_dtn(domain)
    lam = _lams(args)[0]
    if args.bins < 1:
        raise ConfigError("--bins must be positive")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", dm.DirichletPoleWarning)
        try:
            hist = ct.limiting_measure_histogram(domain, lam, args.bins, args.theta_lo, args.theta_hi)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    columns = ["theta_lo", "theta_hi", "mass", "reference"]
    rows = [[hist.edges[i], hist.edges[i + 1], hist.masses[i], hist.reference[i]]
            for i in range(args.bins)]
    config = {"command": "measure", **_domain_config(args), "lambda": lam, "bins": args.bins,
              "theta_lo": args.theta_lo, "theta_hi": args.theta_hi}
    result = {"edges": hist.edges, "masses": hist.masses}
    refs = {"reference_density": hist.reference}

    def figure(path):
        from . import plotting

        plotting.measure_histogram(path, hist.edges, hist.masses, hist.reference)

    return Output(config, columns, rows, result, refs, [str(w.message) for w in caught], figure=figure)


def cmd_dirichlet_limit(args) -> Output:
    domain = _domain(args)
    if domain.kind not in (dm.Kind.DISK, dm.Kind.BALL, dm.Kind.RECTANGLE):
        raise ConfigError("dirichlet-limit supports disk, ball and rect")
    if not args.h:
        raise ConfigError("need at least one --h")
    if any(not h > 0 for h in args.h):
        raise ConfigError("--h must be positive")
    checks = ct.parallel_map(lambda h: ct.dirichlet_limit_check(domain, h), args.h)
    columns = ["h", "robin_at_proxy", "dirichlet_count", "equal"]
    rows = [[c.h, c.robin_at_proxy, c.dirichlet_count, c.equal] for c in checks]
    config = {"command": "dirichlet-limit", **_domain_config(args), "h": args.h,
              "proxy": ct.DIRICHLET_PROXY}
    result = {"checks": [{"h": c.h, "robin_at_proxy": c.robin_at_proxy,
                          "dirichlet_count": c.dirichlet_count, "equal": c.equal} for c in checks]}
    refs = {"dirichlet_count": [c.dirichlet_count for c in checks]}
    warn = [f"h={c.h!r}: a Dirichlet eigenvalue lies within 1e-6 of 1/h^2" for c in checks if c.near_threshold]
    code = EXIT_OK if all(c.equal for c in checks) else EXIT_IDENTITY
    return Output(config, columns, rows, result, refs, warn, exit_code=code)


def cmd_robin_term(args) -> Output:
    domain = _domain(args)
    if domain.kind not in (dm.Kind.DISK, dm.Kind.BALL, dm.Kind.RECTANGLE):
        raise ConfigError("robin-term supports disk, ball and rect")
    lam = _lams(args)[0]
    if args.samples < 1:
        raise ConfigError("--samples must be positive")
    term = ct.robin_second_term(domain, args.a, lam, samples=args.samples)
    columns = ["lambda", "second_term"]
    rows = [[l, v] for l, v in zip(term.samples, term.values)]
    config = {"command": "robin-term", **_domain_config(args), "a": args.a, "lambda": lam,
              "samples": args.samples}
    result = {"window_mean": term.mean, "rel_error": term.rel_error}
    refs = {"kappa_times_boundary_volume": term.reference}

    def figure(path):
        from . import plotting

        plotting.second_term(path, term.samples, term.values, term.reference)

    return Output(config, columns, rows, result, refs, figure=figure)


COMMANDS = {
    "kappa": (cmd_kappa, "csv"),
    "spectrum": (cmd_spectrum, "csv"),
    "count": (cmd_count, "json"),
    "bs-check": (cmd_bs_check, "json"),
    "weyl-fit": (cmd_weyl_fit, "json"),
    "measure": (cmd_measure, "json"),
    "dirichlet-limit": (cmd_dirichlet_limit, "json"),
    "robin-term": (cmd_robin_term, "json"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dtnlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"dtnlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, dtn=True):
        p.add_argument("--format", choices=["csv", "json"], default=None)
        p.add_argument("--out", default="-", help="output file, '-' for stdout")
        p.add_argument("--figure", default=None, help="also render a figure (png, pdf or svg)")
        if dtn:
            p.add_argument("--domain", choices=["disk", "ball", "rect", "hemisphere"], default="disk")
            p.add_argument("--radius", type=float, default=1.0)
            p.add_argument("--l1", type=float, default=1.0)
            p.add_argument("--l2", type=float, default=1.0)

    def window(p):
        p.add_argument("--a1", type=float)
        p.add_argument("--a2", type=float)
        p.add_argument("--theta1", type=float)
        p.add_argument("--theta2", type=float)

    def lams(p):
        p.add_argument("--lambda", dest="lams", type=float, action="append",
                       help="frequency; repeat for several")

    p = sub.add_parser("kappa", help="tabulate kappa(a)")
    common(p, dtn=False)
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--a-min", type=float, default=-5.0)
    p.add_argument("--a-max", type=float, default=5.0)
    p.add_argument("--steps", type=int, default=41)
    p.add_argument("--halfline", action="store_true", help="add the boundary-layer column (slow)")
    p.add_argument("--tol-rel", type=float, default=1e-3)
    p.add_argument("--regen-golden", action="store_true", help="rewrite the stored kappa table")

    p = sub.add_parser("spectrum", help="DtN branch values")
    common(p)
    lams(p)
    p.add_argument("--n-max", type=int, default=10)

    for name, text in (("count", "DtN eigenvalues in a window"),
                       ("bs-check", "Birman-Schwinger integer identity"),
                       ("weyl-fit", "power-law fit of window counts")):
        p = sub.add_parser(name, help=text)
        common(p)
        window(p)
        lams(p)

    p = sub.add_parser("measure", help="histogram of Cayley angles")
    common(p)
    lams(p)
    p.add_argument("--bins", type=int, default=32)
    p.add_argument("--theta-lo", type=float, default=0.3)
    p.add_argument("--theta-hi", type=float, default=2 * math.pi - 0.3)

    p = sub.add_parser("dirichlet-limit", help="Robin count at a = -1e6 vs Dirichlet count")
    common(p)
    p.add_argument("--h", type=float, action="append")

    p = sub.add_parser("robin-term", help="window-averaged Robin second term")
    common(p)
    lams(p)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--samples", type=int, default=ct.ROBIN_AVERAGE_SAMPLES)
    return parser


def _write(text: str, dest: str):
    if dest == "-":
        sys.stdout.write(text)
    else:
        with open(dest, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def regenerate_golden() -> Path:
    args = build_parser().parse_args(GOLDEN_ARGV)
    GOLDEN_DIR.mkdir(exist_ok=True)
    _write(render_csv(cmd_kappa(args)), str(GOLDEN_KAPPA))
    return GOLDEN_KAPPA


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # --help and --version exit 0; usage errors exit 2
        if exc.code in (0, None):
            raise
        return EXIT_CONFIG
    fn, default_format = COMMANDS[args.command]
    if getattr(args, "regen_golden", False):
        path = regenerate_golden()
        print(f"wrote {path}", file=sys.stderr)
        return EXIT_OK
    start = time.perf_counter()
    try:
        try:
            ct.thread_count()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", dm.DirichletPoleWarning)
            out = fn(args)
        for w in caught:
            msg = str(w.message)
            if msg not in out.pole_warnings:
                out.pole_warnings.append(msg)
    except ConfigError as exc:
        print(f"dtnlab: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except dm.UnsupportedDomainError as exc:
        print(f"dtnlab: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    runtime_ms = 1e3 * (time.perf_counter() - start)
    fmt_name = args.format or default_format
    text = render_csv(out) if fmt_name == "csv" else render_json(out, runtime_ms)
    _write(text, args.out)
    if args.figure and out.figure is not None:
        out.figure(args.figure)
    elif args.figure:
        print(f"dtnlab: no figure for {args.command}", file=sys.stderr)
    return out.exit_code


if __name__ == "__main__":
    raise SystemExit(main())

"""Command-line front end: one subcommand per verification stage.

Every output embeds the full run configuration and a format version, and
contains no timestamps, so equal configurations give byte-identical files.
Exit status: 0 when every requested residual passes, 1 on any failure,
2 when a cell was skipped for lack of precision and ``--strict`` is set.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import mpmath as mp

from . import __version__
from .auxiliary import IDENTITY_NAMES, export_aux_csv, identity_residuals
from .errors import InsufficientPrecisionError
from .ladder import compatibility_residuals, expansion_residuals, expansion_values, ladder_values, pn_ode_residual
from .orthopoly import export_recurrence_csv, hankel_det_direct, recurrence_table
from .painleve_verify import chebyshev_grid, export_painleve_csv, painleve_matrix
from .pipeline import build_cell
from .report import CSV_COLUMNS, FAIL, PASS, SKIPPED, THRESHOLDS, ResidualReport, residual_rows, rows_to_csv
from .scaling_asymptotics import (
    EDGE_SIDES,
    edge_params,
    edge_ratio_study,
    export_edge,
    export_scaling,
    ln_barnes_g,
    scaling_decay_study,
)
from .weight_moments import FORMAT_VERSION, PrecisionContext, WeightParams, as_fraction, moment_table

CACHE_ENV = "HANKEL_PAINLEVE_CACHE"
DEFAULT_Z = ("2+1j", "-1", "3", "-2+1j", "0.5+1j")
DEFAULT_DISTANCES = ("1/10", "1/100", "1/1000", "1/10000")

EXIT_OK, EXIT_FAIL, EXIT_SKIPPED = 0, 1, 2


@dataclass
class RunConfig:
    """Everything needed to reproduce a run; echoed into every output."""

    command: str
    params: WeightParams | None
    prec: PrecisionContext
    n_max: int | None = None
    t_grid: list | None = None
    options: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    output: str | None = None
    cache_dir: str | None = None

    def as_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "package_version": __version__,
            "command": self.command,
            "params": self.params.as_dict() if self.params else None,
            "precision": self.prec.as_dict(),
            "n_max": self.n_max,
            "t_grid": [str(t) for t in self.t_grid] if self.t_grid else None,
            "options": self.options,
            "thresholds": self.thresholds,
            "output": self.output,
            "cache_dir": self.cache_dir,
        }


def _decimal(text: str) -> Fraction:
    try:
        return as_fraction(text)
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a decimal or rational number: {text!r}") from exc


def _int_list(text: str):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}") from exc


def _load_thresholds(profile: str | None) -> dict:
    """Overrides from a JSON file path or inline ``class=value,class=value``."""
    out = dict(THRESHOLDS)
    if not profile:
        return out
    if os.path.exists(profile):
        data = json.loads(Path(profile).read_text())
    else:
        data = {}
        for item in profile.split(","):
            key, _, value = item.partition("=")
            data[key.strip()] = value.strip()
    for key, value in data.items():
        if key not in THRESHOLDS:
            raise ValueError(f"unknown identity class {key!r}; known: {sorted(THRESHOLDS)}")
        out[key] = float(value)
    return out


def _t_grid(text: str | None):
    if text is None or text == "chebyshev":
        return chebyshev_grid()
    return [as_fraction(v) for v in text.split(",") if v.strip()]


_COMPLEX = re.compile(r"^(?P<re>[+-]?[0-9.]+(?:e[+-]?\d+)?)?(?P<im>[+-]?[0-9.]*(?:e[+-]?\d+)?)j$", re.IGNORECASE)


def _z_value(text: str):
    """Parse ``x``, ``x+yj`` or ``yj`` with both parts taken as exact decimals."""
    text = text.strip().replace(" ", "")
    if not text.lower().endswith("j"):
        return mp.mpf(as_fraction(text).numerator) / as_fraction(text).denominator
    m = _COMPLEX.match(text)
    if not m:
        raise ValueError(f"cannot parse complex point {text!r}")
    re_s, im_s = m.group("re"), m.group("im")
    if im_s == "":
        # "yj": the leading number is the imaginary part
        re_s, im_s = "0", re_s or "1"
    elif im_s in ("+", "-"):
        im_s += "1"
    re_part, im_part = as_fraction(re_s or "0"), as_fraction(im_s)
    to = lambda q: mp.mpf(q.numerator) / q.denominator  # noqa: E731
    return mp.mpc(to(re_part), to(im_part))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    w = common.add_argument_group("weight")
    w.add_argument("--alpha", type=_decimal, default=Fraction(1))
    w.add_argument("--beta", type=_decimal, default=Fraction(1))
    w.add_argument("--gamma", type=_decimal, default=Fraction(1))
    w.add_argument("--A", dest="A", type=_decimal, default=Fraction(1))
    w.add_argument("--B", dest="B", type=_decimal, default=Fraction(1))
    w.add_argument("--t", type=_decimal, default=Fraction(1, 2))
    p = common.add_argument_group("precision")
    p.add_argument("--bits", type=int, default=512, help="working precision in bits")
    p.add_argument("--quad-tol", type=float, default=1e-60, help="relative quadrature convergence tolerance")
    p.add_argument("--fd-step", type=_decimal, default=Fraction(1, 10**20), help="micro-stencil spacing in t")
    p.add_argument("--guard-digits", type=int, default=10)
    o = common.add_argument_group("output")
    o.add_argument("--output", "-o", help="output file (default: stdout)")
    o.add_argument("--cache-dir", default=None, help=f"moment cache directory (default: ${CACHE_ENV})")
    o.add_argument("--tolerance-profile", default=None, help="JSON file or 'class=value,...' overriding thresholds")
    o.add_argument("--strict", action="store_true", help="exit 2 when any cell is skipped for precision")

    parser = argparse.ArgumentParser(prog="hankel-painleve", description="Hankel determinants of a perturbed Jacobi weight and their Painleve structure.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("moments", parents=[common], help="moment table as JSON")
    s.add_argument("--k", type=int, default=None, help="single moment index")
    s.add_argument("--K", type=int, default=8, help="highest index of the table")

    for name, text in (("recurrence", "recurrence table CSV"), ("aux", "auxiliary table CSV")):
        s = sub.add_parser(name, parents=[common], help=text)
        s.add_argument("--n-max", type=int, default=8)

    s = sub.add_parser("identities", parents=[common], help="algebraic identity residual matrix")
    s.add_argument("--n", type=int, default=4, help="check 1..n")

    s = sub.add_parser("ladder", parents=[common], help="ladder compatibility, expansion and ODE residuals")
    s.add_argument("--n", type=int, default=3, help="check 1..n")
    s.add_argument("--z", default=",".join(DEFAULT_Z), help="comma-separated sample points off [0, 1]")

    s = sub.add_parser("painleve", parents=[common], help="t-derivative relations and Painleve VI residuals")
    s.add_argument("--n", type=_int_list, default=[1, 2, 3], help="comma-separated degrees")
    s.add_argument("--t-grid", default="chebyshev", help="'chebyshev' (9 points on [0.1, 0.9]) or comma list")

    s = sub.add_parser("scaling", parents=[common], help="double-scaling sigma-PIII decay study")
    s.add_argument("--n-list", type=_int_list, default=[8, 16, 32])
    s.add_argument("--s", type=_decimal, default=Fraction(-1))
    s.add_argument("--summary", default=None, help="JSON summary path (default: <output>.summary.json)")

    s = sub.add_parser("edge", parents=[common], help="edge asymptotic ratio study")
    s.add_argument("--side", choices=["t1", "t0"], default="t1")
    s.add_argument("--n", type=int, default=1)
    s.add_argument("--distances", default=",".join(DEFAULT_DISTANCES))
    s.add_argument("--summary", default=None, help="JSON summary path (default: <output>.summary.json)")

    s = sub.add_parser("all", parents=[common], help="compact acceptance run with a summary verdict")
    s.add_argument("--skip-scaling", action="store_true", help="omit the double-scaling study")
    s.add_argument("--t-grid", default="chebyshev", help="t points for the Painleve stage, as for 'painleve'")
    return parser


def _status(reports) -> int:
    reports = list(reports)
    if any(r.failed for r in reports):
        return EXIT_FAIL
    if any(r.skipped for r in reports):
        return EXIT_SKIPPED
    return EXIT_OK


def _emit(text: str, path: str | None):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _params(args) -> WeightParams:
    return WeightParams(args.alpha, args.beta, args.gamma, args.A, args.B, args.t)


def _prec(args) -> PrecisionContext:
    return PrecisionContext(
        precision_bits=args.bits, quad_rel_tol=args.quad_tol, fd_step=args.fd_step, guard_digits=args.guard_digits
    )


def _header(cfg: RunConfig, kind: str) -> dict:
    return {"format_version": FORMAT_VERSION, "kind": kind, "config": cfg.as_dict()}


def cmd_moments(args, cfg):
    K = args.k if args.k is not None else args.K
    table = moment_table(cfg.params, cfg.prec, K, cache_dir=cfg.cache_dir)
    digits = cfg.prec.precision_bits // 4
    idx = [args.k] if args.k is not None else range(K + 1)
    doc = _header(cfg, "moment_table")
    doc["moments"] = {str(k): mp.nstr(table[k], digits) for k in idx}
    doc["node_counts"] = table.node_counts
    _emit(json.dumps(doc, sort_keys=True, indent=2) + "\n", cfg.output)
    return EXIT_OK


def cmd_recurrence(args, cfg):
    moments = moment_table(cfg.params, cfg.prec, 2 * args.n_max + 2, cache_dir=cfg.cache_dir)
    table = recurrence_table(moments, args.n_max)
    _emit(export_recurrence_csv(table, cfg.as_dict()), cfg.output)
    return EXIT_OK


def cmd_aux(args, cfg):
    cell = build_cell(cfg.params, cfg.prec, args.n_max, parts=("xy", "Rr"), cache_dir=cfg.cache_dir)
    _emit(export_aux_csv(cell.aux, cfg.as_dict()), cfg.output)
    return EXIT_OK


def _identity_reports(params, prec, n, thresholds, cache_dir=None):
    cell = build_cell(params, prec, n + 1, cache_dir=cache_dir)
    out = []
    for k in range(1, n + 1):
        rep = identity_residuals(cell.aux, cell.table, k, thresholds["identities"])
        with prec.workprec():
            det = hankel_det_direct(k, cell.moments)
            rep.add("determinant", abs(cell.table.D[k] - det) / abs(det), abs(det), thresholds["determinant"])
        out.append((k, rep))
    return out


def cmd_identities(args, cfg):
    try:
        reports = _identity_reports(cfg.params, cfg.prec, args.n, cfg.thresholds, cfg.cache_dir)
    except InsufficientPrecisionError as exc:
        reports = []
        for k in range(1, args.n + 1):
            rep = ResidualReport()
            for name in IDENTITY_NAMES + ("determinant",):
                rep.skip(name, cfg.thresholds["identities"], str(exc))
            reports.append((k, rep))
    rows = [row for k, rep in reports for row in residual_rows(cfg.params, k, rep)]
    _emit(rows_to_csv(_header(cfg, "identity_residuals"), rows), cfg.output)
    return _status(rep for _, rep in reports)


def _ladder_reports(params, prec, n, zs, thresholds, cache_dir=None):
    cell = build_cell(params, prec, n + 1, cache_dir=cache_dir)
    out = []
    for ztext in zs:
        lv = ladder_values(_z_value(ztext), cell)
        for k in range(1, n + 1):
            rep = compatibility_residuals(k, None, cell, thresholds["compatibility"], values=lv)
            rep.add("pn_ode", pn_ode_residual(k, None, cell, values=lv), 1, thresholds["pn_ode"])
            out.append((k, ztext, rep))
    far = expansion_values(cell)
    for k in range(1, n + 1):
        out.append((k, "expansion", expansion_residuals(k, cell, thresholds["expansion"], values=far)))
    return out


def cmd_ladder(args, cfg):
    zs = [z for z in args.z.split(",") if z.strip()]
    reports = _ladder_reports(cfg.params, cfg.prec, args.n, zs, cfg.thresholds, cfg.cache_dir)
    rows = []
    for k, z, rep in reports:
        rows.extend(row + [z] for row in residual_rows(cfg.params, k, rep))
    _emit(rows_to_csv(_header(cfg, "ladder_residuals"), rows, CSV_COLUMNS + ["z"]), cfg.output)
    return _status(rep for *_, rep in reports)


def cmd_painleve(args, cfg):
    matrix = painleve_matrix(cfg.params, cfg.prec, args.n, cfg.t_grid, cfg.thresholds, cfg.cache_dir)
    _emit(export_painleve_csv(cfg.params, cfg.prec, matrix, cfg.as_dict()), cfg.output)
    return _status(rep for *_, rep in matrix)


def _write_pair(csv_text, summary_text, output, summary_path):
    if output:
        Path(output).write_text(csv_text)
        Path(summary_path or output + ".summary.json").write_text(summary_text + "\n")
    else:
        sys.stdout.write(csv_text + "\n" + summary_text + "\n")
        if summary_path:
            Path(summary_path).write_text(summary_text + "\n")


def cmd_scaling(args, cfg):
    study = scaling_decay_study(args.n_list, args.s, cfg.params, cfg.prec)
    csv_text, summary = export_scaling(study, cfg.as_dict())
    _write_pair(csv_text, summary, cfg.output, args.summary)
    return EXIT_OK if study.verdict else EXIT_FAIL


def cmd_edge(args, cfg):
    study = edge_ratio_study(args.n, cfg.params, args.side, args.distances.split(","), cfg.prec)
    csv_text, summary = export_edge(study, cfg.as_dict())
    _write_pair(csv_text, summary, cfg.output, args.summary)
    if study.skipped:
        return EXIT_SKIPPED
    return EXIT_OK if study.monotone_tail() else EXIT_FAIL


def cmd_all(args, cfg):
    """A compact pass over every stage at the configured parameters."""
    sections = {}
    codes = []

    def record(name, reports):
        reports = list(reports)
        code = _status(reports)
        codes.append(code)
        worst = [r.worst() for r in reports if r.worst() is not None]
        sections[name] = {
            "verdict": {EXIT_OK: PASS, EXIT_FAIL: FAIL, EXIT_SKIPPED: SKIPPED}[code],
            "cells": len(reports),
            "worst_residual": mp.nstr(max(worst), 6) if worst else None,
        }

    p, prec, thr = cfg.params, cfg.prec, cfg.thresholds
    record("identities", [rep for _, rep in _identity_reports(p, prec, 4, thr, cfg.cache_dir)])
    record("ladder", [rep for *_, rep in _ladder_reports(p, prec, 3, DEFAULT_Z[:2], thr, cfg.cache_dir)])
    record("painleve", [rep for *_, rep in painleve_matrix(p, prec, [1, 2, 3], cfg.t_grid, thr, cfg.cache_dir)])

    barnes = ResidualReport()
    with prec.workprec():
        for x in ("0.3", "1.7", "5.5"):
            lhs = ln_barnes_g(as_fraction(x) + 1, prec) - ln_barnes_g(x, prec)
            barnes.add_equation(f"recurrence@{x}", lhs, mp.loggamma(mp.mpf(x)), thr["barnes"])
    record("barnes", [barnes])

    edge = ResidualReport()
    for side in ("t1", "t0"):
        study = edge_ratio_study(1, edge_params(side, 1, 1, 1, Fraction(1, 2)), side, DEFAULT_DISTANCES, prec)
        with prec.workprec():
            edge.add_equation(f"constant_{side}", study.asymptotic.constant, mp.mpf(1) / 6, thr["edge_constant"])
        edge.add(f"monotone_{side}", 0 if study.monotone_tail() else 1, 1, 0.5)
    record("edge", [edge])

    if not args.skip_scaling:
        study = scaling_decay_study([8, 16, 32], -1, p, prec)
        codes.append(EXIT_OK if study.verdict else EXIT_FAIL)
        sections["scaling"] = {"verdict": PASS if study.verdict else FAIL, "slope": round(study.slope, 6)}

    code = EXIT_FAIL if EXIT_FAIL in codes else (EXIT_SKIPPED if EXIT_SKIPPED in codes else EXIT_OK)
    doc = _header(cfg, "acceptance_summary")
    doc["sections"] = sections
    doc["verdict"] = {EXIT_OK: PASS, EXIT_FAIL: FAIL, EXIT_SKIPPED: SKIPPED}[code]
    _emit(json.dumps(doc, sort_keys=True, indent=2) + "\n", cfg.output)
    return code


COMMANDS = {
    "moments": cmd_moments,
    "recurrence": cmd_recurrence,
    "aux": cmd_aux,
    "identities": cmd_identities,
    "ladder": cmd_ladder,
    "painleve": cmd_painleve,
    "scaling": cmd_scaling,
    "edge": cmd_edge,
    "all": cmd_all,
}


def dispatch(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "edge":
        # the side fixes the jump constants
        args.A, args.B = EDGE_SIDES[args.side]
    try:
        params = _params(args)
        prec = _prec(args)
        thresholds = _load_thresholds(args.tolerance_profile)
        t_grid = _t_grid(getattr(args, "t_grid", None)) if args.command in ("painleve", "all") else None
    except ValueError as exc:
        parser.error(str(exc))
    options = {k: (str(v) if isinstance(v, Fraction) else v) for k, v in sorted(vars(args).items())
               if k not in {"alpha", "beta", "gamma", "A", "B", "t", "bits", "quad_tol", "fd_step", "guard_digits",
                            "output", "cache_dir", "tolerance_profile", "command"}}
    cfg = RunConfig(
        command=args.command,
        params=params,
        prec=prec,
        n_max=getattr(args, "n_max", None),
        t_grid=t_grid,
        options=options,
        thresholds=thresholds,
        output=args.output,
        cache_dir=args.cache_dir or os.environ.get(CACHE_ENV),
    )
    try:
        code = COMMANDS[args.command](args, cfg)
    except ValueError as exc:
        parser.error(str(exc))
    if code == EXIT_SKIPPED and not args.strict:
        return EXIT_OK
    return code


def main(argv=None):
    sys.exit(dispatch(argv))

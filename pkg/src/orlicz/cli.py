"""Command-line front end: ``orlicz eval|norm|minimize|dual|phi-check|suite|density``.

Exit codes: 0 success (all checks pass), 1 a check failed, 2 bad config,
3 input/output failure.
"""
import argparse
import csv
import io
import os
import sys

import numpy as np

from . import _backend
from .config import (
    CONFIG_ERRORS,
    grid_function,
    load_json,
    load_setup,
    pair_function,
    require,
    sampling_from,
)
from .errors import ConfigError
from .functionals import (
    eval_ell,
    eval_F,
    eval_F_power,
    eval_G,
    eval_H,
    eval_H_star,
    eval_pairing_Phi,
    m_subspace_residual,
)
from .norms import f_norm, g_norm, luxemburg
from .phi import build_phi, check_conditions, estimate_growth_constants
from .solver import (
    SolverOptions,
    dual_apply,
    dual_kernel_representation,
    el_residual,
    minimize,
)
from .suites import default_config, emit_report, environment, run_density, run_suite, write_text

DUAL_CSV_MAX_PAIRS = 2 ** 20


def _header(cmd, setup):
    return {"command": cmd, "environment": environment(),
            "grid": setup.grid.describe(), "kernel": setup.kernel.describe(),
            "phi_hash": setup.phi.digest() if setup.phi is not None else None}


def cmd_eval(cfg, args):
    s = load_setup(cfg, args.seed or 0)
    g, k, phi = s.grid, s.kernel, s.phi
    names = cfg.get("functionals", ["F"])
    records = []
    for name in names:
        if name == "F":
            val = eval_F(g, k, phi, grid_function(g, require(cfg, "u"))).as_dict()
        elif name == "G":
            val = eval_G(g, k, phi, cfg.get("p_minus"), grid_function(g, require(cfg, "u"))).as_dict()
        elif name == "F_power":
            val = eval_F_power(g, k, float(require(cfg, "p")),
                               grid_function(g, require(cfg, "u"))).as_dict()
        elif name == "H":
            val = eval_H(g, k, phi, pair_function(g, require(cfg, "U"))).as_dict()
        elif name in ("Hstar", "H*"):
            val = eval_H_star(g, k, phi, pair_function(g, require(cfg, "W"))).as_dict()
        elif name == "Phi":
            val = {"value": eval_pairing_Phi(g, k, phi, grid_function(g, require(cfg, "u")),
                                             grid_function(g, require(cfg, "w")))}
        elif name == "ell":
            val = {"value": eval_ell(g, k, phi, grid_function(g, require(cfg, "u")),
                                     grid_function(g, require(cfg, "v")))}
        elif name == "m_residual":
            val = {"value": m_subspace_residual(g, k, pair_function(g, require(cfg, "W")))}
        else:
            raise ConfigError(f"unknown functional {name!r}")
        records.append({"functional": name, **val, "grid_resolution": g.size,
                        "kernel": k.kind, "phi_hash": phi.digest()})
    return dict(_header("eval", s), results=records), True, {}


def cmd_norm(cfg, args):
    s = load_setup(cfg, args.seed or 0)
    g, k, phi = s.grid, s.kernel, s.phi
    which = args.functional or cfg.get("functional", "f")
    if which == "f":
        rec = {"value": f_norm(g, k, phi, grid_function(g, require(cfg, "u")))}
    elif which == "g":
        rec = {"value": g_norm(g, k, phi, grid_function(g, require(cfg, "u")))}
    elif which in ("lux-F", "lux-G"):
        rec = luxemburg(which[-1], g, k, phi, grid_function(g, require(cfg, "u"))).as_dict()
    elif which == "h":
        rec = luxemburg("H", g, k, phi, pair_function(g, require(cfg, "U"))).as_dict()
    elif which == "hstar":
        rec = luxemburg("Hstar", g, k, phi, pair_function(g, require(cfg, "W"))).as_dict()
    else:
        raise ConfigError(f"unknown norm {which!r}")
    return dict(_header("norm", s), functional=which, result=rec), True, {}


def cmd_minimize(cfg, args):
    s = load_setup(cfg, args.seed or 0)
    g, k, phi = s.grid, s.kernel, s.phi
    p_minus = float(cfg.get("p_minus", phi.p_minus))
    rhs = grid_function(g, cfg.get("g", 0.0))
    u0 = grid_function(g, cfg["u0"]) if "u0" in cfg else None
    opts = SolverOptions.from_json(cfg.get("options"))
    res = minimize(g, k, phi, p_minus, rhs, u0, opts)
    out = res.as_dict()
    out["el_residual"] = el_residual(g, k, phi, p_minus, res.u_star, rhs)
    report = dict(_header("minimize", s), p_minus=p_minus, result=out)
    return report, res.converged, {"u_star.csv": res.u_star.to_csv()}


def cmd_dual(cfg, args):
    s = load_setup(cfg, args.seed or 0)
    g, k, phi = s.grid, s.kernel, s.phi
    w = grid_function(g, require(cfg, "w"))
    values = []
    us = cfg.get("u", [])
    for spec in [us] if isinstance(us, (str, dict)) else us:
        values.append({"u": spec if isinstance(spec, str) else "<data>",
                       "value": dual_apply(g, k, phi, w, grid_function(g, spec))})
    W = dual_kernel_representation(g, k, phi, w)
    norm = luxemburg("F", g, k, phi, w).value
    report = dict(_header("dual", s), norm=norm, self_value=dual_apply(g, k, phi, w, w),
                  values=values, m_residual_of_kernel=m_subspace_residual(g, k, W))
    tables = {}
    if g.size * g.size <= DUAL_CSV_MAX_PAIRS:
        tables["dual_kernel.csv"] = _pair_csv(g, W.values)
    else:
        report["kernel_csv"] = f"skipped: {g.size ** 2} pairs exceed {DUAL_CSV_MAX_PAIRS}"
    return report, True, tables


def _pair_csv(grid, values):
    d = grid.dim
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{k}" for k in range(d)] + [f"y{k}" for k in range(d)] + ["value"])
    nodes = grid.nodes
    for i in range(grid.size):
        for j in range(grid.size):
            w.writerow(["%.17g" % c for c in nodes[i]] + ["%.17g" % c for c in nodes[j]]
                       + ["%.17g" % values[i, j]])
    return buf.getvalue()


def cmd_phi_check(cfg, args):
    sampling = sampling_from(cfg.get("sampling"), int(cfg.get("seed", args.seed or 0)))
    box = cfg.get("box")
    box = (box["lo"], box["hi"]) if isinstance(box, dict) else box
    phi = build_phi(require(cfg, "phi"), box=box, validate=cfg.get("validate", True),
                    sampling=sampling)
    rep = check_conditions(phi, sampling)
    out = {"command": "phi-check", "environment": environment(), "phi_hash": phi.digest(),
           "provenance": phi.provenance(),
           "declared": phi.growth.as_dict() if phi.growth is not None else None,
           "conditions": rep.as_dict()}
    if rep.passed:
        out["estimated"] = estimate_growth_constants(phi, sampling)._asdict()
    return out, rep.passed, {}


def cmd_suite(cfg, args):
    cfg = cfg if cfg is not None else default_config()
    report, records = run_suite(cfg, args.seed, _backend.get_threads())
    timings = [(r.suite, r.scenario, r.elapsed) for r in records]
    return report, report["passed"], {"__timings__": timings}


def cmd_density(cfg, args):
    if cfg is None:
        raise ConfigError("density needs --config")
    report, records = run_density(cfg, args.seed, _backend.get_threads())
    timings = [(r.suite, r.scenario, r.elapsed) for r in records]
    return report, report["passed"], {"__timings__": timings}


COMMANDS = {
    "eval": cmd_eval,
    "norm": cmd_norm,
    "minimize": cmd_minimize,
    "dual": cmd_dual,
    "phi-check": cmd_phi_check,
    "suite": cmd_suite,
    "density": cmd_density,
}


def build_parser():
    p = argparse.ArgumentParser(prog="orlicz", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="base seed (u64)")
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: ORLICZ_THREADS or 1)")
        if name == "norm":
            sp.add_argument("--functional", choices=["f", "g", "h", "hstar", "lux-F", "lux-G"])
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    _backend.set_threads(args.threads if args.threads is not None else _backend.default_threads())
    try:
        cfg = load_json(args.config) if args.config else None
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if cfg is None and args.command not in ("suite",):
        print(f"config error: '{args.command}' needs --config", file=sys.stderr)
        return 2
    try:
        report, ok, tables = COMMANDS[args.command](cfg, args)
    except CONFIG_ERRORS as exc:
        print(f"config error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    try:
        timings = tables.pop("__timings__", None)
        table_name = args.command if args.command in ("suite", "density") else "summary"
        emit_report(report, args.out, table=table_name, timings=timings)
        for name, text in tables.items():
            write_text(os.path.join(args.out, "tables", name), text)
        if "records" not in report:
            write_text(os.path.join(args.out, "tables", "summary.csv"), _summary_csv(report))
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 3
    print(os.path.join(args.out, "report.json"))
    return 0 if ok else 1


def _summary_csv(report):
    """Flatten scalar leaves of the report into ``key,value`` rows."""
    rows = []

    def walk(prefix, obj):
        if isinstance(obj, dict):
            for k, v in obj.items():
                walk(f"{prefix}.{k}" if prefix else str(k), v)
        elif isinstance(obj, (int, float, bool, np.floating)) and not isinstance(obj, str):
            rows.append((prefix, "%.17g" % obj if isinstance(obj, float) else str(obj)))

    walk("", {k: v for k, v in report.items() if k != "environment"})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["key", "value"])
    w.writerows(rows)
    return buf.getvalue()


if __name__ == "__main__":
    sys.exit(main())

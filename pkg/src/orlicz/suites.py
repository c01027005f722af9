"""Inequality suites, density experiments and report serialisation.

Every suite calls the public operations of the package on seeded random
data and records the worst slack of its inequality (positive = holds).
"""
import csv
import io
import math
import os
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__, _backend
from .config import load_setup, grid_function
from .errors import ConfigError, LadderTooShort, OrliczError
from .functionals import (
    eval_ell,
    eval_F,
    eval_F_power,
    lp_norm,
    m_subspace_residual,
    pairing_with_kernel,
)
from .grid import (
    PairFunction,
    mollify,
    quadrature_double,
    small_cutoff,
    support_truncate,
    value_truncate,
)
from .norms import (
    decomposition_ratios,
    f_norm,
    g_norm,
    h_norm,
    h_star_norm,
    l1_ratio,
    luxemburg,
    poincare_certificate,
    verify_sandwich,
    decompose_mean_zero,
)
from .phi import Power, check_conditions, conjugate_jet
from .solver import dual_apply, dual_kernel_representation, energy, energy_gradient

SUITES = ("young", "hoelder", "sandwich", "equivalence", "convexity", "variation",
          "poincare", "density", "dual", "conditions")

TAGS = {
    "young": ["2.27", "3.31"],
    "hoelder": ["6.25"],
    "sandwich": ["3.28", "3.22a", "3.29", "3.30", "3.17a"],
    "equivalence": ["2.6", "3.16", "2.4"],
    "convexity": ["C2"],
    "variation": ["5.12"],
    "poincare": ["6.7", "3.20a", "2.13"],
    "density": ["4.2"],
    "dual": ["2.20", "2.22", "2.14"],
    "conditions": ["C2", "C3", "C4", "C5"],
}

DEFAULT_TOL = {
    "young": 1e-8,
    "hoelder": 1e-8,
    "sandwich": 1e-9,
    "equivalence": 1e-8,
    "root": 1e-8,
    "convexity": 1e-10,
    "variation_exact": 1e-8,
    "variation_rate": 1.8,
    "gradient": 1e-5,
    "poincare": 1e-10,
    "dual_self": 1e-5,
    "dual_repr": 1e-8,
    "dual_m": 1e-9,
    "density_mono": 1e-10,
    "density_ratio": 0.05,
    "density_order": 1.8,
}

DENSITY_TARGET = "x0*step(x0-0.25)*step(0.75-x0)"
DENSITY_LADDER = (0.2, 0.1, 0.05, 0.025, 0.0125, 0.00625)
SMOOTH_TARGET = "(1-((x0-0.5)/0.3)^2)^4*step(0.3-abs(x0-0.5))"
SMOOTH_LADDER = (0.1, 0.05, 0.025)


# ----------------------------------------------------------------------------
# function families


def random_trig(grid, rng, modes=8, scale=1.0):
    """``sum_k (c_k cos(k pi x) + s_k sin(k pi x)) / k^2`` per axis, seeded normals."""
    vals = np.zeros(grid.size)
    for axis in range(grid.dim):
        x = grid.nodes[:, axis]
        c = rng.standard_normal(modes)
        s = rng.standard_normal(modes)
        for k in range(1, modes + 1):
            vals += (c[k - 1] * np.cos(k * math.pi * x) + s[k - 1] * np.sin(k * math.pi * x)) / k**2
    return grid.function(scale * vals)


def family(grid, spec, seed):
    """The random functions of a scenario, deterministic in ``seed``."""
    spec = dict(spec or {})
    kind = spec.get("kind", "trig")
    if kind != "trig":
        raise ConfigError(f"unknown function family {kind!r}")
    rng = np.random.default_rng(seed)
    return [random_trig(grid, rng, int(spec.get("modes", 8)), float(spec.get("scale", 1.0)))
            for _ in range(int(spec.get("count", 12)))]


def random_pairs(grid, rng, count, modes=8):
    """Pair functions ``a(x) b(y) + c(x) - c(y)`` from three trig draws."""
    out = []
    for _ in range(count):
        a, b, c = (random_trig(grid, rng, modes).values for _ in range(3))
        out.append(PairFunction(grid, a[:, None] * b[None, :] + c[:, None] - c[None, :]))
    return out


# ----------------------------------------------------------------------------
# records


@dataclass
class SuiteRecord:
    suite: str
    scenario: str
    checked: int
    worst_slack: float
    passed: bool
    details: dict = field(default_factory=dict)
    elapsed: float = 0.0
    error: str | None = None

    def as_dict(self):
        out = {"suite": self.suite, "scenario": self.scenario,
               "tags": TAGS.get(self.suite, []), "checked": self.checked,
               "worst_slack": self.worst_slack, "passed": self.passed,
               "details": self.details}
        if self.error:
            out["error"] = self.error
        return out


class _Slack:
    """Running minimum of normalised slacks."""

    def __init__(self):
        self.worst = math.inf
        self.count = 0
        self.ok = True

    def add(self, slack, ok=None, n=1):
        slack = np.asarray(slack, dtype=float)
        if slack.size:
            self.worst = min(self.worst, float(np.min(slack)))
            self.ok &= bool(np.all(slack >= 0)) if ok is None else bool(ok)
        self.count += int(n if n != 1 else max(slack.size, 1))


def _relative(rhs, lhs, tol_abs):
    """``(rhs - lhs + tol) / (1 + |rhs|)``: >= 0 iff the check passes."""
    return (rhs - lhs + tol_abs) / (1.0 + np.abs(rhs))


# ----------------------------------------------------------------------------
# suites


def suite_young(scn, tol):
    phi = scn.phi
    s_ = scn.sampling
    zs = s_.z_grid()
    x, y = s_.xy(phi.box, phi.dim)
    jet = phi.bind(x[:, None, None, :], y[:, None, None, :])
    s = zs[None, :, None]
    t = zs[None, None, :]
    f_s = np.broadcast_to(jet(s, 0)[0], (len(x), len(zs), 1))
    conj_t = conjugate_jet(jet, np.broadcast_to(t, (len(x), 1, len(zs))))
    st = s * t
    rec = _Slack()
    young = _relative(conj_t + f_s, st, tol["young"] * (1.0 + st))
    rec.add(young)
    # conjugate of the derivative
    zz = zs[None, :, None]
    f, f1 = (np.broadcast_to(a, (len(x), len(zs), 1)) for a in jet(zz, 1))
    conj_d = conjugate_jet(jet, np.broadcast_to(f1, (len(x), len(zs), 1)))
    rhs = (phi.c2 - 1.0) * f
    cd = _relative(rhs, conj_d, tol["young"] * (1.0 + zz * f1))
    rec.add(cd)
    return rec, {"young_worst": float(np.min(young)), "conj_derivative_worst": float(np.min(cd)),
                 "z_points": len(zs), "xy_samples": len(x)}


def suite_hoelder(scn, tol, count=25):
    g, k, phi = scn.grid, scn.kernel, scn.phi
    rng = np.random.default_rng(scn.seed + 6025)
    pairs = random_pairs(g, rng, 2 * count)
    rec = _Slack()
    ratios = []
    for W, V in zip(pairs[0::2], pairs[1::2]):
        lhs = abs(quadrature_double(g, k, W.values * V.values))
        rhs = 2.0 * h_norm(g, k, phi, V) * h_star_norm(g, k, phi, W)
        rec.add(_relative(rhs, lhs, tol["hoelder"]))
        ratios.append(lhs / rhs if rhs > 0 else 0.0)
    return rec, {"max_ratio": max(ratios), "instances": count}


def suite_sandwich(scn, tol):
    g, k, phi = scn.grid, scn.kernel, scn.phi
    s_ = scn.sampling
    zs = s_.z_grid()
    x, y = s_.xy(phi.box, phi.dim)
    jet = phi.bind(x[:, None, :], y[:, None, :])
    z = zs[None, :]
    pm, pp, beta, c1 = phi.p_minus, phi.p_plus, phi.beta, phi.c1
    shape = (len(x), len(zs))
    f = np.broadcast_to(jet(z, 0)[0], shape)
    rec = _Slack()
    det = {}
    with np.errstate(over="ignore"):
        lo = np.minimum(z**pm, z**pp) / (beta * c1)
        hi = beta * c1 * np.maximum(z**pm, z**pp)
    growth = np.minimum((f - lo) / f, (hi - f) / hi) + tol["sandwich"]
    rec.add(growth)
    det["growth_worst"] = float(np.min(growth))
    worst = math.inf
    for lam in (0.1, 0.5, 2.0, 10.0):
        fl = np.broadcast_to(jet(z / lam, 0)[0], shape)
        lo = min(lam**pm, lam**pp) * fl / beta
        hi = beta * max(lam**pm, lam**pp) * fl
        sl = np.minimum((f - lo) / f, (hi - f) / hi) + tol["sandwich"]
        rec.add(sl)
        worst = min(worst, float(np.min(sl)))
    det["scaling_worst"] = worst
    f2 = np.broadcast_to(jet(2.0 * z, 0)[0], shape)
    dbl = (2.0**pp * beta * f - f2) / f2 + tol["sandwich"]
    rec.add(dbl)
    i, j = np.triu_indices(len(zs), k=0)
    fsum = np.broadcast_to(jet((zs[i] + zs[j])[None, :], 0)[0], (len(x), len(i)))
    sm = (2.0 ** (pp - 1.0) * beta * (f[:, i] + f[:, j]) - fsum) / fsum + tol["sandwich"]
    rec.add(sm)
    det["doubling_worst"] = float(min(np.min(dbl), np.min(sm)))
    worst = math.inf
    for u in scn.family:
        cert = verify_sandwich(g, k, phi, u)
        rec.add(cert.slack + tol["sandwich"])
        worst = min(worst, cert.slack)
    det["functional_worst"] = worst
    det["beta"] = beta
    det["c1"] = c1
    return rec, det


def suite_equivalence(scn, tol):
    g, k, phi = scn.grid, scn.kernel, scn.phi
    rec = _Slack()
    root_worst = 0.0
    lo_ratio, hi_ratio = math.inf, 0.0
    bound = phi.beta ** (1.0 / phi.p_minus)
    for u in scn.family:
        lam = luxemburg("F", g, k, phi, u).value
        if lam > 0:
            res = abs(float(eval_F(g, k, phi, u / lam)) - 1.0)
            root_worst = max(root_worst, res)
            rec.add(tol["root"] - res)
        f = f_norm(g, k, phi, u)
        gv = g_norm(g, k, phi, u)
        rec.add(_relative(gv, 0.5 * f, tol["equivalence"]))
        rec.add(_relative(bound * f, gv, tol["equivalence"]))
        rec.add(_relative(f, lp_norm(g, u, phi.p_minus), tol["equivalence"]))
        if f > 0:
            lo_ratio, hi_ratio = min(lo_ratio, gv / f), max(hi_ratio, gv / f)
    # norm axioms on consecutive pairs
    fam = scn.family
    for u, v in zip(fam, fam[1:]):
        fu, fv = f_norm(g, k, phi, u), f_norm(g, k, phi, v)
        rec.add(_relative(fu + fv, f_norm(g, k, phi, u + v), tol["equivalence"]))
        for s in (0.5, -3.0):
            rec.add(tol["equivalence"] * max(fu, 1.0) - abs(f_norm(g, k, phi, s * u) - abs(s) * fu))
    return rec, {"root_residual_max": root_worst, "g_over_f_min": lo_ratio,
                 "g_over_f_max": hi_ratio, "upper_factor": bound}


def suite_convexity(scn, tol):
    g, k, phi = scn.grid, scn.kernel, scn.phi
    fam = scn.family
    rhs_g = fam[0]
    rec = _Slack()
    for u, v in zip(fam[1:], fam[2:]):
        e_mid = energy(g, k, phi, phi.p_minus, 0.5 * (u + v), rhs_g)
        e_avg = 0.5 * (energy(g, k, phi, phi.p_minus, u, rhs_g)
                       + energy(g, k, phi, phi.p_minus, v, rhs_g))
        rec.add(_relative(e_avg, e_mid, tol["convexity"]))
        f_mid = float(eval_F(g, k, phi, 0.5 * (u + v)))
        f_avg = 0.5 * (float(eval_F(g, k, phi, u)) + float(eval_F(g, k, phi, v)))
        rec.add(_relative(f_avg, f_mid, tol["convexity"]))
    return rec, {}


def is_square(phi):
    node = phi.node
    return (type(node) is Power and node.p.expr is None and node.p.const == 2.0
            and node.b.expr is None)


def variation_remainders(grid, kernel, phi, u, v, ts):
    f0 = float(eval_F(grid, kernel, phi, u))
    ell = eval_ell(grid, kernel, phi, u, v)
    return [float(eval_F(grid, kernel, phi, u + t * v)) - f0 - t * ell for t in ts]


def gradient_fd_error(grid, kernel, phi, p_minus, u, g, h=1e-6):
    """Max over nodes of ``|grad_i - fd_i| / (1 + |grad_i|)`` with central differences."""
    grad = energy_gradient(grid, kernel, phi, p_minus, u, g).values
    step = h * max(1.0, float(np.max(np.abs(u.values))))
    fd = np.empty(grid.size)
    for i in range(grid.size):
        e = np.zeros(grid.size)
        e[i] = step
        fd[i] = (energy(grid, kernel, phi, p_minus, u + e, g)
                 - energy(grid, kernel, phi, p_minus, u - e, g)) / (2.0 * step)
    return float(np.max(np.abs(grad - fd) / (1.0 + np.abs(grad))))


def suite_variation(scn, tol):
    g, k, phi = scn.grid, scn.kernel, scn.phi
    fam = scn.family
    rec = _Slack()
    det = {}
    if is_square(phi):
        ts = (0.5, 0.1, 0.01)
        worst = 0.0
        for u, v in zip(fam, fam[1:]):
            fv = float(eval_F(g, k, phi, v))
            for t, r in zip(ts, variation_remainders(g, k, phi, u, v, ts)):
                err = abs(r - t * t * fv) / (t * t * fv)
                worst = max(worst, err)
                rec.add(tol["variation_exact"] - err)
        det["exact_remainder_rel_err"] = worst
    else:
        ts = (1e-2, 1e-3, 1e-4)
        need = tol["variation_rate"] ** math.log2(10.0)
        worst = math.inf
        for u, v in zip(fam, fam[1:]):
            r = [abs(x) / t for x, t in zip(variation_remainders(g, k, phi, u, v, ts), ts)]
            for a, b in zip(r, r[1:]):
                ratio = a / b if b > 0 else math.inf
                worst = min(worst, ratio)
                rec.add((ratio - need) / need)
        det["min_decade_ratio"] = worst
        det["required_decade_ratio"] = need
    gerr = 0.0
    for u, v in zip(fam[:4], fam[1:5]):
        e = gradient_fd_error(g, k, phi, phi.p_minus, u, v)
        gerr = max(gerr, e)
        rec.add(tol["gradient"] - e)
    det["gradient_fd_max_err"] = gerr
    return rec, det


def suite_poincare(scn, tol):
    g, k, phi = scn.grid, scn.kernel, scn.phi
    rec = _Slack()
    det = {}
    fam = scn.family
    c_hat = poincare_certificate(g, k, phi.p_minus, fam)
    rec.add(1.0 if math.isfinite(c_hat) and c_hat > 0 else -1.0)
    det["poincare_constant"] = c_hat
    if k.kind == "constant" and phi.p_minus == 2.0 and len(g.boxes) == 1:
        exact = 1.0 / (2.0 * k.params["c"] * g.total_measure)
        worst = 0.0
        for u in fam:
            u_perp, _ = decompose_mean_zero(g, u)
            from .functionals import lp_power
            ratio = lp_power(g, u_perp, 2.0) / float(eval_F_power(g, k, 2.0, u))
            worst = max(worst, abs(ratio - exact))
            rec.add(tol["poincare"] - abs(ratio - exact))
        det["identity_value"] = exact
        det["identity_max_err"] = worst
    l1 = [l1_ratio(g, k, phi, u) for u in fam]
    dec = [decomposition_ratios(g, k, phi, u) for u in fam]
    det["l1_constant"] = max(l1)
    det["decomposition_c3"] = min(dec)
    det["decomposition_c4"] = max(dec)
    rec.add(1.0 if all(math.isfinite(v) for v in l1 + dec) and min(dec) > 0 else -1.0)
    return rec, det


def suite_dual(scn, tol, count=20):
    g, k, phi = scn.grid, scn.kernel, scn.phi
    fam = scn.family
    w = fam[0]
    rec = _Slack()
    lam = luxemburg("F", g, k, phi, w).value
    self_val = dual_apply(g, k, phi, w, w)
    err_self = abs(self_val - lam * lam)
    rec.add(tol["dual_self"] * max(1.0, lam * lam) - err_self)
    W = dual_kernel_representation(g, k, phi, w)
    rng = np.random.default_rng(scn.seed + 2022)
    us = [random_trig(g, rng) for _ in range(count)]
    sym_a = random_trig(g, rng).values
    S = PairFunction(g, sym_a[:, None] * sym_a[None, :] + np.cos(sym_a[:, None] - sym_a[None, :]))
    m_res = m_subspace_residual(g, k, S)
    W2 = W + S
    err_repr = err_m = err_add = 0.0
    for u, v in zip(us, us[1:] + us[:1]):
        a = dual_apply(g, k, phi, w, u)
        b = pairing_with_kernel(g, k, u, W)
        c = pairing_with_kernel(g, k, u, W2)
        err_repr = max(err_repr, abs(a - b))
        err_m = max(err_m, abs(b - c))
        add = abs(dual_apply(g, k, phi, w, u + v) - a - dual_apply(g, k, phi, w, v))
        err_add = max(err_add, add)
    rec.add(tol["dual_repr"] - err_repr)
    rec.add(tol["dual_m"] - err_m)
    rec.add(tol["dual_repr"] - err_add)
    return rec, {"norm_squared": lam * lam, "self_value": self_val, "self_err": err_self,
                 "repr_max_err": err_repr, "m_member_residual": m_res,
                 "m_shift_max_err": err_m, "additivity_max_err": err_add}


def suite_conditions(scn, tol):
    rep = check_conditions(scn.phi, scn.sampling)
    rec = _Slack()
    rec.add(min(rep.c2_uniform_convexity.values()), ok=rep.passed, n=1)
    d = rep.as_dict()
    d.pop("sampling")
    return rec, d


# ----------------------------------------------------------------------------
# density


def approximation_chain(u, eps, center=None):
    """Value truncation at ``1/eps``, cutoff below ``eps``, support ball ``1/eps``, mollify."""
    v = value_truncate(u, 1.0 / eps)
    v = small_cutoff(v, eps)
    v = support_truncate(v, 1.0 / eps, center)
    return mollify(v, eps)


def density_ladder(grid, kernel, phi, u, ladder, chain=True, center=None):
    if len(ladder) < 3:
        raise LadderTooShort(f"ladder needs at least 3 rungs, got {len(ladder)}")
    gaps, norms = [], []
    for eps in ladder:
        approx = approximation_chain(u, eps, center) if chain else mollify(u, eps)
        diff = u - approx
        gaps.append(float(eval_F(grid, kernel, phi, diff)))
        norms.append(luxemburg("F", grid, kernel, phi, diff).value)
    return gaps, norms


def density_checks(scn, tol):
    spec = dict(scn.raw.get("density") or {})
    g, k, phi = scn.grid, scn.kernel, scn.phi
    target = grid_function(g, spec.get("u", DENSITY_TARGET))
    ladder = tuple(float(e) for e in spec.get("ladder", DENSITY_LADDER))
    center = spec.get("center")
    if center is None:
        lo, hi = g.bounding_box
        center = [0.5 * (a + b) for a, b in zip(lo, hi)]
    rec = _Slack()
    gaps, _ = density_ladder(g, k, phi, target, ladder, True, center)
    for a, b in zip(gaps, gaps[1:]):
        rec.add((a - b + tol["density_mono"]) / (1.0 + a))
    ratio = gaps[-1] / gaps[0] if gaps[0] > 0 else 0.0
    rec.add(tol["density_ratio"] - ratio)
    det = {"ladder": list(ladder), "gaps": gaps, "final_over_initial": ratio}
    smooth = spec.get("smooth_u", SMOOTH_TARGET)
    if smooth:
        s_ladder = tuple(float(e) for e in spec.get("smooth_ladder", SMOOTH_LADDER))
        su = grid_function(g, smooth)
        s_gaps, s_norms = density_ladder(g, k, phi, su, s_ladder, False)
        orders = [math.log(a / b) / math.log(e0 / e1)
                  for a, b, e0, e1 in zip(s_norms, s_norms[1:], s_ladder, s_ladder[1:])]
        for o in orders:
            rec.add(o - tol["density_order"])
        det.update({"smooth_ladder": list(s_ladder), "smooth_gaps": s_gaps,
                    "smooth_norm_gaps": s_norms, "smooth_orders": orders})
    return rec, det


RUNNERS = {
    "young": suite_young,
    "hoelder": suite_hoelder,
    "sandwich": suite_sandwich,
    "equivalence": suite_equivalence,
    "convexity": suite_convexity,
    "variation": suite_variation,
    "poincare": suite_poincare,
    "density": density_checks,
    "dual": suite_dual,
    "conditions": suite_conditions,
}


# ----------------------------------------------------------------------------
# scenarios and reports


@dataclass
class Scenario:
    id: str
    grid: object
    kernel: object
    phi: object
    sampling: object
    seed: int
    family: list
    raw: dict


def default_config():
    return {
        "seed": 0,
        "suites": [s for s in SUITES if s != "density"],
        "scenarios": [{
            "id": "square",
            "domain": {"lo": [0.0], "hi": [1.0], "cells": [32]},
            "kernel": {"kind": "constant", "c": 1.0},
            "phi": {"kind": "power", "p": {"const": 2.0}},
        }],
    }


def load_scenario(obj, index, base_seed):
    if not isinstance(obj, dict):
        raise ConfigError("scenario must be a JSON object")
    seed = int(obj.get("seed", base_seed + index))
    setup = load_setup(dict(obj, seed=seed))
    fam = family(setup.grid, obj.get("family"), seed)
    return Scenario(str(obj.get("id", f"s{index}")), setup.grid, setup.kernel, setup.phi,
                    setup.sampling, seed, fam, obj)


def _run_one(name, scn, tol):
    t0 = time.perf_counter()
    try:
        rec, det = RUNNERS[name](scn, tol)
        out = SuiteRecord(name, scn.id, rec.count, rec.worst, rec.ok, det)
    except OrliczError as exc:
        out = SuiteRecord(name, scn.id, 0, -math.inf, False, {},
                          error=f"{type(exc).__name__}: {exc}")
    out.elapsed = time.perf_counter() - t0
    return out


def _tolerances(config):
    tol = dict(DEFAULT_TOL)
    for k, v in (config.get("tolerances") or {}).items():
        if k not in tol:
            raise ConfigError(f"unknown tolerance {k!r}")
        tol[k] = float(v)
    return tol


def environment():
    return {"package": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "backend": _backend.BACKEND}


def run_suite(config, seed=None, workers=1):
    """Run every selected suite over every scenario; returns ``(report, records)``."""
    if not isinstance(config, dict):
        raise ConfigError("suite config must be a JSON object")
    base_seed = int(config.get("seed", 0) if seed is None else seed)
    suites = list(config.get("suites", SUITES))
    for s in suites:
        if s not in RUNNERS:
            raise ConfigError(f"unknown suite {s!r}")
    tol = _tolerances(config)
    scen_objs = config.get("scenarios", [])
    scenarios = [load_scenario(o, i, base_seed) for i, o in enumerate(scen_objs)] \
        if suites else []
    jobs = [(s, scn) for scn in scenarios for s in suites]
    if workers > 1 and len(jobs) > 1:
        # the pool supplies the parallelism; kernels stay single-threaded inside it
        saved = _backend.get_threads()
        _backend.set_threads(1)
        try:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                records = list(pool.map(lambda j: _run_one(j[0], j[1], tol), jobs))
        finally:
            _backend.set_threads(saved)
    else:
        records = [_run_one(s, scn, tol) for s, scn in jobs]
    echo = dict(config, seed=base_seed)
    report = {
        "command": "suite",
        "config": echo,
        "environment": environment(),
        "records": [r.as_dict() for r in records],
        "passed": all(r.passed for r in records),
    }
    return report, records


def run_density(config, seed=None, workers=1):
    """Density experiments for each scenario (which may carry a ``density`` block)."""
    cfg = dict(config)
    if "scenarios" not in cfg:
        cfg = {"seed": cfg.get("seed", 0), "scenarios": [cfg]}
    cfg["suites"] = ["density"]
    report, records = run_suite(cfg, seed, workers)
    report["command"] = "density"
    return report, records


# ----------------------------------------------------------------------------
# serialisation


def format_float(x):
    if isinstance(x, float) and not math.isfinite(x):
        return '"inf"' if x > 0 else ('"-inf"' if x < 0 else '"nan"')
    return "%.17g" % x


def dumps(obj, indent=0):
    """JSON text with floats at 17 significant digits; key order preserved."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_str(str(k))}: {dumps(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}{dumps(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(float(obj))
    return _str(str(obj))


def _str(s):
    import json
    return json.dumps(s)


def records_csv(records):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["suite", "scenario", "tags", "checked", "worst_slack", "passed"])
    for r in records:
        w.writerow([r["suite"], r["scenario"], " ".join(r["tags"]), r["checked"],
                    format_float(float(r["worst_slack"])).strip('"'), int(bool(r["passed"]))])
    return buf.getvalue()


def records_markdown(records):
    lines = ["| suite | scenario | tags | checked | worst slack | pass |",
             "|---|---|---|---|---|---|"]
    for r in records:
        lines.append(f"| {r['suite']} | {r['scenario']} | {' '.join(r['tags'])} | "
                     f"{r['checked']} | {float(r['worst_slack']):.6g} | "
                     f"{'yes' if r['passed'] else 'NO'} |")
    return "\n".join(lines) + "\n"


def write_text(path, text):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def emit_report(report, out_dir, formats=("json", "csv", "markdown"), table="suite",
                timings=None):
    """Write ``report.json``, ``tables/<table>.csv`` and ``report.md`` under ``out_dir``."""
    written = []
    if "json" in formats:
        p = os.path.join(out_dir, "report.json")
        write_text(p, dumps(report) + "\n")
        written.append(p)
    records = report.get("records")
    if records is not None and "csv" in formats:
        p = os.path.join(out_dir, "tables", f"{table}.csv")
        write_text(p, records_csv(records))
        written.append(p)
    if records is not None and "markdown" in formats:
        p = os.path.join(out_dir, "report.md")
        write_text(p, records_markdown(records))
        written.append(p)
    if timings:
        p = os.path.join(out_dir, "tables", "timings.csv")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["suite", "scenario", "elapsed_s"])
        for row in timings:
            w.writerow([row[0], row[1], "%.6f" % row[2]])
        write_text(p, buf.getvalue())
        written.append(p)
    return written

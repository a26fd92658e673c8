"""Command line entry point: ``bogotool <command> [options]``.

Every command writes JSON-lines records (one per check) to ``--out`` (stdout
by default) and exits 0 when every record passes, 1 otherwise, and 2 on
usage or input errors.  ``--config FILE`` reads defaults from an INI file
whose sections are named after the command, e.g. ``[pstokes.solve]``.
"""

from __future__ import annotations

import argparse
import configparser
import functools
import math
import os
import sys
import time

import numpy as np

from . import _accel, report
from .errors import BogotoolError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- parsing helpers


def _floats(text):
    try:
        return tuple(float(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return tuple(int(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}") from None


def _in_range(lo, hi, kind=float, lo_open=False):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid value {text!r}") from None
        if (v <= lo if lo_open else v < lo) or v > hi:
            raise argparse.ArgumentTypeError(f"{v} outside {'(' if lo_open else '['}{lo}, {hi}]")
        return v

    return conv


P_TYPE = _in_range(1.0, math.inf, lo_open=True)
DELTA_TYPE = _in_range(0.0, math.inf)
COUNT_TYPE = _in_range(1, 10**8, int)


def _common():
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    parent.add_argument("--out", default="-", help="JSON-lines report path, '-' for stdout")
    parent.add_argument("--config", help="INI file with defaults, section per command")
    parent.add_argument("--timing", action="store_true", help="add runtimes to the records")
    return parent


def build_parser():
    common = _common()
    parser = argparse.ArgumentParser(prog="bogotool", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    parsers = {}

    def add(path, helptext, container):
        p = container.add_parser(path.split(".")[-1], parents=[common], help=helptext)
        p.set_defaults(_path=path)
        parsers[path] = p
        return p

    verify = sub.add_parser("verify", help="calculus identities and inequalities")
    vsub = verify.add_subparsers(dest="check", required=True)

    p = add("verify.young", "Young inequalities with computed c_eps", vsub)
    p.add_argument("--p", type=P_TYPE, default=2.0)
    p.add_argument("--delta", type=DELTA_TYPE, default=0.0)
    p.add_argument("--eps", type=_floats, default=(0.1, 1.0))
    p.add_argument("--samples", type=COUNT_TYPE, default=10_000)
    p.set_defaults(func=run_young)

    p = add("verify.hammer", "ratio ranges of the equivalent stress quantities", vsub)
    p.add_argument("--p", type=P_TYPE, default=1.5)
    p.add_argument("--delta", type=DELTA_TYPE, default=0.1)
    p.add_argument("--samples", type=COUNT_TYPE, default=10_000)
    p.add_argument("--seeds", type=COUNT_TYPE, default=3, help="number of reruns (seed, seed+1, ...)")
    p.add_argument("--max-spread", type=float, default=0.1)
    p.set_defaults(func=run_hammer)

    p = add("verify.eq2", "modular difference-quotient inequality on the analytic family", vsub)
    p.add_argument("--p", type=P_TYPE, default=1.5)
    p.add_argument("--delta", type=DELTA_TYPE, default=0.1)
    p.add_argument("--grid", type=_in_range(8, 4096, int), default=128)
    p.add_argument("--h-mults", type=_ints, default=(1, 2, 4))
    p.set_defaults(func=run_eq2)

    p = add("verify.diffquot", "product rule, partial integration and commutation", vsub)
    p.add_argument("--grid", type=_in_range(8, 4096, int), default=64)
    p.add_argument("--h-mults", type=_ints, default=(1, 2, 3))
    p.set_defaults(func=run_diffquot)

    p = add("whitney", "Whitney decomposition of a builtin domain", sub)
    p.add_argument("--shape", choices=("ball", "square", "annulus"), default="ball")
    p.add_argument("--dim", type=_in_range(1, 3, int), default=2)
    p.add_argument("--min-level", type=_in_range(-20, 0, int), default=-8)
    p.add_argument("--samples", type=_in_range(0, 10**8, int), default=100_000)
    p.add_argument("--min-coverage", type=float, default=0.999)
    p.add_argument("--csv", help="write the cube list (level, j1..jn)")
    p.set_defaults(func=run_whitney)

    cz = sub.add_parser("cz", help="Calderon-Zygmund kernels and truncated operators")
    csub = cz.add_subparsers(dest="check", required=True)

    p = add("cz.check", "standard-kernel and CZ condition checks", csub)
    p.add_argument("--kernel", default="riesz-1")
    p.add_argument("--dim", type=_in_range(2, 3, int), default=2)
    p.add_argument("--order", type=_in_range(8, 10**6, int), default=512)
    p.add_argument("--triples", type=COUNT_TYPE, default=100_000)
    p.add_argument("--homog-tol", type=float, default=1e-12)
    p.add_argument("--mean-tol", type=float, default=1e-10)
    p.set_defaults(func=run_cz_check)

    p = add("cz.bound", "eps-stability of measured operator bounds on the unit square", csub)
    p.add_argument("--kernel", default="riesz-1")
    p.add_argument("--grid", type=_in_range(8, 1024, int), default=128)
    p.add_argument("--p", type=P_TYPE, default=2.0)
    p.add_argument("--weight", default="const", help="const, const:c or power:alpha")
    p.add_argument("--orlicz", type=_floats, help="p,delta of an N-function for the modular bound")
    p.add_argument("--eps", type=_floats, default=tuple(2.0**-k for k in range(3, 8)))
    p.add_argument("--count", type=COUNT_TYPE, default=20)
    p.add_argument("--max-variation", type=float, default=2.0)
    p.set_defaults(func=run_cz_bound)

    bog = sub.add_parser("bogovskii", help="the Bogovskii solution operator on a cube")
    bsub = bog.add_subparsers(dest="check", required=True)

    p = add("bogovskii.solve", "apply B to a preset or CSV field", bsub)
    p.add_argument("--n", type=_in_range(1, 3, int), default=2)
    p.add_argument("--grid", type=_in_range(4, 4096, int), default=32)
    p.add_argument("--inner-order", type=_in_range(4, 256, int), default=16)
    p.add_argument("--cube-scale", type=_in_range(0.0, math.inf, lo_open=True), default=1.0)
    p.add_argument("--f", default=None, help="preset name or CSV path")
    p.add_argument("--project-mean", action="store_true")
    p.add_argument("--p", type=P_TYPE, default=2.0)
    p.add_argument("--save", help="write Bf (.csv, otherwise binary)")
    p.set_defaults(func=run_bogovskii_solve)

    p = add("bogovskii.estimates", "refinement and scale study of the residual and bounds", bsub)
    p.add_argument("--grid-list", type=_ints, default=(16, 32, 64))
    p.add_argument("--inner-order", type=_in_range(4, 256, int), default=16)
    p.add_argument("--f", type=lambda s: tuple(v for v in s.split(",") if v), default=None)
    p.add_argument("--scales", type=_floats, default=(0.25, 1.0, 4.0))
    p.add_argument("--p", type=P_TYPE, default=2.0)
    p.add_argument("--min-decrease", type=float, default=1.5)
    p.add_argument("--csv", help="write the refinement table")
    p.set_defaults(func=run_bogovskii_estimates)

    ps = sub.add_parser("pstokes", help="power-law Stokes flow on the unit square")
    psub = ps.add_subparsers(dest="check", required=True)
    for name, helptext, func in (("solve", "energy minimisation", run_pstokes_solve),
                                 ("regularity", "interior regularity quantities", run_pstokes_regularity)):
        p = add(f"pstokes.{name}", helptext, psub)
        p.add_argument("--p", type=_in_range(1.0, 2.0, lo_open=True), default=2.0)
        p.add_argument("--delta", type=DELTA_TYPE, default=0.1)
        p.add_argument("--grid", type=_in_range(6, 1024, int), default=32)
        p.add_argument("--grid-list", type=_ints, help="refinement study, e.g. 16,32,64")
        p.add_argument("--f", choices=("vortex", "zero"), default="vortex")
        p.add_argument("--tol", type=float, default=1e-10)
        p.add_argument("--report", help="alias of --out")
        p.add_argument("--csv", help="write the refinement table")
        p.set_defaults(func=func)
    parsers["pstokes.regularity"].add_argument("--h-mults", type=_ints, default=(1, 2, 4))
    return parser, parsers


def _apply_config(parsers, argv):
    """Re-read ``--config`` sections as parser defaults (command line still wins)."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    cfg = configparser.ConfigParser()
    if not cfg.read(known.config):
        raise UsageError(f"cannot read config file {known.config!r}")
    for section in cfg.sections():
        if section not in parsers:
            raise UsageError(f"unknown config section [{section}]")
        sp = parsers[section]
        actions = {a.dest: a for a in sp._actions}
        values = {}
        for key, raw in cfg[section].items():
            dest = key.replace("-", "_")
            if dest not in actions:
                raise UsageError(f"unknown option {key!r} in [{section}]")
            act = actions[dest]
            if act.const is True:  # store_true
                values[dest] = cfg[section].getboolean(key)
            else:
                try:
                    values[dest] = act.type(raw) if act.type else raw
                except argparse.ArgumentTypeError as exc:
                    raise UsageError(f"[{section}] {key}: {exc}") from None
                if act.choices and values[dest] not in act.choices:
                    raise UsageError(f"[{section}] {key}: {raw!r} not in {act.choices}")
        sp.set_defaults(**values)


# ---------------------------------------------------------------- commands


def run_young(args):
    from .nfunc import NFunctionPD, young_check

    nf = NFunctionPD(args.p, args.delta)
    recs = []
    for eps in args.eps:
        t0 = time.perf_counter()
        rep = young_check(nf, eps, num_samples=args.samples, seed=args.seed)
        recs.append(report.record("young", {"p": args.p, "delta": args.delta, "eps": eps, "samples": args.samples},
                                  rep, rep.passed, "eq:young:1-2", _rt(args, t0)))
    return recs


def run_hammer(args):
    from .tensor import StressModel, hammer_quantities, hammer_seed_spread, random_pairs

    t0 = time.perf_counter()
    model = StressModel.power_law(args.p, args.delta)
    seeds = tuple(range(args.seed, args.seed + args.seeds))
    runs, spread = hammer_seed_spread(model, seeds, args.samples)
    finite = all(math.isfinite(v) for r in runs for pair in r.values() for v in pair)
    params = {"p": args.p, "delta": args.delta, "samples": args.samples, "seeds": list(seeds)}
    recs = [report.record("hammer-ranges", params, {"ranges": runs[0], "spread": spread},
                          finite and spread < args.max_spread, "lem:hammer", _rt(args, t0))]
    if args.p == 2 and args.delta == 0:
        rng = np.random.default_rng(args.seed)
        P, Q = random_pairs(rng, args.samples)
        hq = hammer_quantities(model, P, Q)
        keep = hq.f_gap > 0
        dev = float(np.max(np.abs(hq.monotone[keep] - hq.f_gap[keep]) / hq.f_gap[keep]))
        recs.append(report.record("hammer-linear", params, {"max_rel_dev": dev}, dev <= 1e-12, "eq:3a"))
    return recs


def run_eq2(args):
    from .grid import UniformGrid, analytic_family, modular_dq_inequality
    from .nfunc import NFunctionPD, phi_eval

    t0 = time.perf_counter()
    nf = NFunctionPD(args.p, args.delta)
    psi = functools.partial(phi_eval, nf)
    g = UniformGrid.cell_centered((0.0, 0.0), (1.0, 1.0), args.grid)
    h0 = max(args.h_mults) * g.spacing
    worst, ok = 0.0, True
    rows = []
    for name, (F, dF) in analytic_family(g).items():
        for k in range(2):
            for m in args.h_mults:
                for sign in (1, -1):
                    r = modular_dq_inequality(psi, F, k, m * g.spacing, h0, dF[k], sign, rtol=0.0)
                    ok &= r.passed
                    worst = max(worst, r.lhs / r.rhs if r.rhs > 0 else math.inf)
                    rows.append([name, k + 1, m, sign, r.lhs, r.rhs])
    params = {"p": args.p, "delta": args.delta, "grid": args.grid, "h_mults": list(args.h_mults)}
    return [report.record("eq2", params, {"max_lhs_over_rhs": worst, "cases": len(rows)}, ok, "eq:2",
                          _rt(args, t0))]


def _zero_margin_family(g, margin):
    from .grid import analytic_family

    x = g.coords()
    lo, hi = g.lower + margin, g.upper - margin
    t = (x - lo) / (hi - lo)
    bump = np.prod(np.where((t > 0) & (t < 1), np.sin(np.pi * t) ** 4, 0.0), axis=-1)
    return {name: F.with_values(F.values * bump) for name, (F, _) in analytic_family(g).items()}


def run_diffquot(args):
    from .grid import (UniformGrid, analytic_family, commute_check, partial_integration_check,
                       product_rule_check)

    t0 = time.perf_counter()
    g = UniformGrid.cell_centered((0.0, 0.0), (1.0, 1.0), args.grid)
    fam = [F for F, _ in analytic_family(g).values()]
    hs = [m * g.spacing for m in args.h_mults]
    prod = max(product_rule_check(F, G, k, h, s) for F in fam for G in fam[:2]
               for k in range(2) for h in hs for s in (1, -1))
    comm = max(commute_check(F, k, h, s) for F in fam for k in range(2) for h in hs for s in (1, -1))
    zm = list(_zero_margin_family(g, max(hs) + g.spacing).values())
    part = max(partial_integration_check(F, G, h, k) for F in zm for G in zm[:2] for k in range(2) for h in hs)
    params = {"grid": args.grid, "h_mults": list(args.h_mults)}
    rt = _rt(args, t0)
    return [
        report.record("product-rule", params, {"max_abs": prod}, prod <= 1e-10, "eq:1", rt),
        report.record("partial-integration", params, {"max_abs": part}, part <= 1e-10, "eq:1b", rt),
        report.record("commutation", params, {"max_abs": comm}, comm <= 1e-12, "eq:1a", rt),
    ]


def run_whitney(args):
    from .whitney import make_domain, verify_decomposition, whitney_decompose, write_cubes_csv

    t0 = time.perf_counter()
    dom = make_domain(args.shape, args.dim)
    cubes, stats = whitney_decompose(dom, args.min_level, return_stats=True)
    if args.csv:
        write_cubes_csv(cubes, args.csv)
    rep = verify_decomposition(cubes, dom, samples=args.samples, min_level=args.min_level, seed=args.seed)
    cov_ok = not args.samples or rep.coverage >= args.min_coverage
    params = {"shape": args.shape, "dim": args.dim, "min_level": args.min_level, "samples": args.samples}
    value = dict(report.jsonable(rep), **stats)
    return [report.record("whitney", params, value, rep.passed and cov_ok, "prop:whitney", _rt(args, t0))]


def run_cz_check(args):
    from .czop import builtin_kernel, cz_check, sk_check

    t0 = time.perf_counter()
    K = builtin_kernel(args.kernel, args.dim)
    sk = sk_check(K, num_triples=args.triples, seed=args.seed)
    cz = cz_check(K, order=args.order, seed=args.seed)
    params = {"kernel": args.kernel, "dim": args.dim, "order": args.order, "triples": args.triples}
    rt = _rt(args, t0)
    value_cz = {"homogeneity_dev": cz.homogeneity_dev, "mean_zero_dev": cz.mean_zero_dev,
                "kappa2": cz.kappa2, "kappa2_sq": cz.kappa2**2}
    return [
        report.record("sk", params, {"kappa1": sk.kappa1, "ratios": sk.ratios}, math.isfinite(sk.kappa1),
                      "SK1-SK3", rt),
        report.record("cz1", params, value_cz, cz.homogeneity_dev <= args.homog_tol, "CZ1", rt),
        report.record("cz2", params, value_cz, cz.mean_zero_dev <= args.mean_tol, "CZ2", rt),
        report.record("cz3", params, value_cz, math.isfinite(cz.kappa2), "CZ3", rt),
    ]


def run_cz_bound(args):
    from .czop import (ap_constant, builtin_kernel, bump_family, cz_check, orlicz_bound_ratio, sk_check,
                       weighted_bound_ratio)
    from .grid import UniformGrid
    from .nfunc import NFunctionPD

    t0 = time.perf_counter()
    g = UniformGrid.cell_centered((0.0, 0.0), (1.0, 1.0), args.grid)
    K = builtin_kernel(args.kernel, 2)
    fam = bump_family(g, args.count, args.seed)
    eps = tuple(sorted(args.eps, reverse=True))
    if min(eps) < g.spacing:
        raise UsageError("eps below the grid spacing")
    params = {"kernel": args.kernel, "grid": args.grid, "p": args.p, "weight": args.weight,
              "eps": list(eps), "count": args.count}
    recs = []
    ap = ap_constant(args.weight, args.p, g)
    recs.append(report.record("ap-constant", params, {"ap": ap}, math.isfinite(ap), "def:Ap"))
    rep = weighted_bound_ratio(K, args.p, args.weight, fam, eps)
    recs.append(report.record("weighted-bound", params,
                              {"sup_per_eps": rep.sup_per_eps, "sup_variation": rep.sup_variation,
                               "max_variation": rep.max_variation, "skipped": rep.skipped},
                              rep.sup_variation < args.max_variation, "thm:CZ-weighted", _rt(args, t0)))
    if args.orlicz:
        if len(args.orlicz) != 2:
            raise UsageError("--orlicz expects p,delta")
        nf = NFunctionPD(*args.orlicz)
        K = K.with_constants(sk_check(K, seed=args.seed).kappa1, cz_check(K, seed=args.seed).kappa2)
        rep = orlicz_bound_ratio(K, nf, fam, eps)
        recs.append(report.record("orlicz-bound", dict(params, orlicz=list(args.orlicz)),
                                  {"sup_per_eps": rep.sup_per_eps, "sup_variation": rep.sup_variation,
                                   "max_variation": rep.max_variation, "kappa": [K.kappa1_est, K.kappa2_est]},
                                  rep.sup_variation < args.max_variation, "thm:CZ-orlicz", _rt(args, t0)))
    return recs


def _bogovskii_field(args, cube):
    from . import fieldio
    from .bogovskii import Cube, preset_family

    if args.f and os.path.exists(args.f):
        f = fieldio.read_csv(args.f, rank=0)
        g = f.grid
        return f, Cube(tuple(0.5 * (g.lower + g.upper)), float(g.upper[0] - g.lower[0]))
    name = args.f or ("cos" if cube.ndim == 1 else "sinbump")
    try:
        return preset_family(cube, args.grid, [name])[name], cube
    except BogotoolError as exc:
        raise UsageError(f"{exc} (and no such file)") from None


def run_bogovskii_solve(args):
    from . import fieldio
    from .bogovskii import (Cube, bogovskii_apply, diffquot_bound_ratio, divergence_residual,
                            gradient_bound_ratio, orlicz_bound_ratios)
    from .nfunc import NFunctionPD

    t0 = time.perf_counter()
    cube = Cube((0.5,) * args.n, args.cube_scale)
    f, cube = _bogovskii_field(args, cube)
    sol = bogovskii_apply(f, cube, args.inner_order, project_mean=args.project_mean)
    if args.save:
        (fieldio.write_csv if args.save.endswith(".csv") else fieldio.write_binary)(sol.v, args.save)
    l2, linf = divergence_residual(sol)
    value = {"div_residual_l2_rel": l2, "div_residual_max": linf,
             "grad_ratio": gradient_bound_ratio(sol, args.p),
             "diffquot_ratio": diffquot_bound_ratio(sol, args.p)}
    if args.p > 1:
        value["orlicz_ratios"] = orlicz_bound_ratios(sol, NFunctionPD(args.p, 0.1))
    ok = all(math.isfinite(v) for v in (l2, value["grad_ratio"], value["diffquot_ratio"]))
    params = {"n": args.n, "grid": sol.N, "inner_order": args.inner_order, "cube_side": cube.side,
              "f": args.f, "p": args.p}
    return [report.record("bogovskii-solve", params, value, ok, "thm:bog", _rt(args, t0))]


def run_bogovskii_estimates(args):
    from .bogovskii import (FAMILY_2D, Cube, bogovskii_apply_many, diffquot_bound_ratio, divergence_residual,
                            gradient_bound_ratio, preset_family)

    t0 = time.perf_counter()
    names = args.f or FAMILY_2D
    base = Cube((0.5, 0.5), 1.0)
    res = {name: [] for name in names}
    table = []
    for N in args.grid_list:
        fam = preset_family(base, N, names)
        for name, sol in zip(names, bogovskii_apply_many(list(fam.values()), base, args.inner_order)):
            l2, _ = divergence_residual(sol)
            res[name].append(l2)
            table.append([N, name, l2])
    decreases = {name: [v[i] / v[i + 1] for i in range(len(v) - 1)] for name, v in res.items()}
    ok_dec = all(d >= args.min_decrease for ds in decreases.values() for d in ds)
    recs = [report.record("bogovskii-residual", {"grid_list": list(args.grid_list), "f": list(names)},
                          {"residuals": res, "decrease": decreases}, ok_dec, "thm:bog", _rt(args, t0))]
    N = args.grid_list[-1]
    ratios = {}
    for lam in args.scales:
        cube = base.scaled(lam)
        fam = preset_family(cube, N, names)
        sols = bogovskii_apply_many(list(fam.values()), cube, args.inner_order)
        ratios[lam] = {name: (gradient_bound_ratio(s, args.p), diffquot_bound_ratio(s, args.p))
                       for name, s in zip(names, sols)}
    ref = ratios[args.scales[0]]
    var = max(abs(ratios[lam][n][j] / ref[n][j] - 1) for lam in args.scales for n in names for j in (0, 1))
    recs.append(report.record("bogovskii-scale", {"grid": N, "scales": list(args.scales), "p": args.p},
                              {"ratios": {str(k): v for k, v in ratios.items()}, "max_rel_variation": var},
                              var < 0.05, "thm:bog", _rt(args, t0)))
    if args.csv:
        _write_table(args.csv, ["N", "f", "div_residual_l2_rel"], table)
    return recs


def _pstokes_problem(args, N):
    from .pstokes import PStokesProblem, vortex_force, zero_force
    from .tensor import StressModel

    force = vortex_force() if args.f == "vortex" else zero_force
    return PStokesProblem(StressModel.power_law(args.p, args.delta), force, N)


def run_pstokes_solve(args):
    from .pstokes import apriori_ratio, solve, weak_residual

    recs, table = [], []
    for N in args.grid_list or (args.grid,):
        t0 = time.perf_counter()
        sol = solve(_pstokes_problem(args, N), tol=args.tol)
        E = np.asarray(sol.energy_history)
        mono = bool(np.all(np.diff(E) <= 0) and all(d < 0 for d in sol.energy_changes))
        div = float(np.max(np.abs(sol.divergence())))
        value = {"converged": sol.converged, "iterations": sol.iterations, "grad_norm": sol.grad_norm,
                 "tolerance": sol.tolerance, "energy": float(E[-1]), "energy_monotone": mono,
                 "div_max": div, "weak_residual": weak_residual(sol, seed=args.seed),
                 "apriori_ratio": apriori_ratio(sol)}
        ok = sol.converged and mono and div <= 1e-10
        params = {"p": args.p, "delta": args.delta, "grid": N, "f": args.f, "tol": args.tol}
        recs.append(report.record("pstokes-solve", params, value, ok, "eq:pstokes", _rt(args, t0)))
        table.append([N, sol.iterations, sol.grad_norm, float(E[-1]), value["weak_residual"]])
    if args.csv:
        _write_table(args.csv, ["N", "iterations", "grad_norm", "energy", "weak_residual"], table)
    return recs


def run_pstokes_regularity(args):
    from .pstokes import interior_regularity_check, solve

    grids = args.grid_list or (args.grid,)
    recs, ratios, table = [], [], []
    for N in grids:
        t0 = time.perf_counter()
        sol = solve(_pstokes_problem(args, N), tol=args.tol)
        try:
            rep = interior_regularity_check(sol, h_mults=args.h_mults if N == max(grids) else ())
        except BogotoolError:
            rep = interior_regularity_check(sol, h_mults=())
        ratios.append(rep.ratio)
        value = report.jsonable(rep)
        params = {"p": args.p, "delta": args.delta, "grid": N, "f": args.f}
        ok = sol.converged and math.isfinite(rep.ratio) and (not rep.hs or rep.tang_spread < 2.0)
        recs.append(report.record("interior-regularity", params, value, ok, "eq:est-reg-F2", _rt(args, t0)))
        table.append([N, rep.lhs, rep.rhs, rep.ratio])
    if len(ratios) > 1:
        spread = max(ratios) / min(ratios) if min(ratios) > 0 else math.inf
        recs.append(report.record("interior-regularity-refinement",
                                  {"p": args.p, "delta": args.delta, "grid_list": list(grids)},
                                  {"ratios": ratios, "spread": spread}, spread < 2.0, "eq:est-reg-F2"))
    if args.csv:
        _write_table(args.csv, ["N", "lhs", "rhs", "ratio"], table)
    return recs


# ---------------------------------------------------------------- main


def _rt(args, t0):
    return time.perf_counter() - t0 if args.timing else None


def _write_table(path, header, rows):
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _emit(records, path):
    if path in (None, "-"):
        for rec in records:
            sys.stdout.write(report.dumps(rec) + "\n")
    else:
        report.write_jsonl(records, path)


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, parsers = build_parser()
    try:
        _apply_config(parsers, argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"bogotool: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    _accel.set_threads()
    out = getattr(args, "report", None) or args.out
    try:
        records = args.func(args)
    except (UsageError, BogotoolError, OSError, ValueError) as exc:
        print(f"bogotool {args._path}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _emit(records, out)
    return EXIT_OK if all(r["pass"] for r in records) else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

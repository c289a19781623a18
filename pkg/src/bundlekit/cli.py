"""Command-line front end: load an instance and run configuration, run the
solvers, and write per-iteration traces, summaries, bound comparisons, and
convergence plots.

Exit codes: 0 when the configured stopping criterion is met, 1 on a config
or validation error, 2 when the iteration cap is hit first."""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

import numpy as np
from jsonschema import ValidationError, validate

from . import bounds as bnd
from .bundle import Policy
from .instances import (MaxAffineSpec, WorstCaseParams, make_abs_oracle,
                        make_composite, make_max_affine,
                        make_random_max_affine, make_worst_case)
from .problem import ProblemInstance, evaluate_phi
from .solvers import RpbConfig, RunTrace, Termination, cscs_run, rpb_run

log = logging.getLogger("bundlekit")

TRACE_COLUMNS = ["j", "k", "kind", "t_j", "m_j", "phi_xj", "phi_xtilde",
                 "phi_zhat", "gap_to_phistar", "bundle_size",
                 "subproblem_gap", "subproblem_iters", "oracle_f_calls",
                 "oracle_g_calls"]

_SET_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["type"],
    "properties": {
        "type": {"enum": ["box", "ball"]},
        "center": {"type": "array", "items": {"type": "number"}},
        "half_widths": {"type": "array", "items": {"type": "number"}},
        "radius": {"type": "number"},
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["instance", "solver", "lam"],
    "properties": {
        "instance": {
            "type": "object",
            "additionalProperties": False,
            "required": ["family"],
            "properties": {
                "family": {"enum": ["abs", "max_affine", "worst_case"]},
                "n": {"type": "integer", "minimum": 1},
                "pieces": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer"},
                "m_f": {"type": "number"},
                "intercept_scale": {"type": "number"},
                "mu": {"type": "number"},
                "r0": {"type": "number"},
                "eps_bar": {"type": "number"},
                "x0": {"type": "array", "items": {"type": "number"}},
                "phi_star": {"type": "number"},
                "d0": {"type": "number"},
            },
        },
        "composite": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["zero", "quadratic", "box", "ball", "l1"]},
                "mu": {"type": "number"},
                "center": {"type": "array", "items": {"type": "number"}},
                "lower": {"type": "array", "items": {"type": "number"}},
                "upper": {"type": "array", "items": {"type": "number"}},
                "radius": {"type": "number"},
                "weight": {"type": "number"},
            },
        },
        "solver": {"enum": ["rpb", "cscs", "rpb-descent"]},
        "lam": {"type": "number", "exclusiveMinimum": 0},
        "delta": {"type": "number", "exclusiveMinimum": 0},
        "policy": {"type": "string"},
        "termination": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["eps_solution", "triple", "pair",
                                  "max_iterations"]},
                "eps_bar": {"type": "number"},
                "rho_hat": {"type": "number"},
                "eps_hat": {"type": "number"},
                "set": _SET_SCHEMA,
            },
        },
        "max_iterations": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
        "descent_gamma": {"type": "number"},
        "descent_alpha": {"type": "number"},
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["strong", "convex", "pair"]},
                "points": {"type": "integer", "minimum": 1},
                "lams": {"type": "array",
                         "items": {"type": "number", "exclusiveMinimum": 0}},
                "solvers": {"type": "array",
                            "items": {"enum": ["rpb", "cscs"]}},
                "eps_bar": {"type": "number"},
            },
        },
    },
}


class ConfigError(Exception):
    pass


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}")
    try:
        validate(cfg, CONFIG_SCHEMA)
    except ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "(root)"
        raise ConfigError(f"{path}: at {where}: {exc.message}")
    return cfg


def build_instance(cfg: dict) -> ProblemInstance:
    spec = cfg["instance"]
    family = spec["family"]
    comp_cfg = cfg.get("composite", {"kind": "zero"})

    if family == "worst_case":
        for key in ("m_f", "r0", "eps_bar", "n"):
            if key not in spec:
                raise ConfigError(f"worst_case instance needs {key!r}")
        if "composite" in cfg:
            raise ConfigError("worst_case fixes its own composite term")
        params = WorstCaseParams(m_f=spec["m_f"], mu=spec.get("mu", 0.0),
                                 r0=spec["r0"], eps_bar=spec["eps_bar"],
                                 n=spec["n"])
        try:
            return make_worst_case(params)
        except ValueError as exc:
            raise ConfigError(str(exc))

    if family == "abs":
        f = make_abs_oracle()
        n = 1
        x0 = spec.get("x0", [1.0])
    else:
        n = spec.get("n", 10)
        ma = make_random_max_affine(n, spec.get("pieces", 20),
                                    spec.get("seed", 0),
                                    m_f=spec.get("m_f", 1.0),
                                    intercept_scale=spec.get(
                                        "intercept_scale", 0.1))
        f = make_max_affine(ma)
        x0 = spec.get("x0", list(np.zeros(n)))
    if len(x0) != n:
        raise ConfigError(f"x0 has dimension {len(x0)}, expected {n}")

    kind = comp_cfg["kind"]
    params = {k: v for k, v in comp_cfg.items() if k != "kind"}
    if kind == "l1":
        params.setdefault("dim", n)
    try:
        h = make_composite(kind, **params)
        return ProblemInstance(f=f, h=h, x0=np.asarray(x0, dtype=float),
                               known_phi_star=spec.get("phi_star"),
                               known_d0_bound=spec.get("d0"))
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc))


def build_termination(cfg: dict) -> Termination:
    t = cfg.get("termination", {"kind": "max_iterations"})
    kind = t["kind"]
    try:
        if kind == "pair":
            s = t.get("set")
            if s is None:
                raise ConfigError("pair termination needs a bounding set")
            if s["type"] == "box":
                bset = bnd.BoundingBox(center=np.asarray(s["center"]),
                                       half_widths=np.asarray(s["half_widths"]))
            else:
                bset = bnd.BoundingBall(center=np.asarray(s["center"]),
                                        radius=s["radius"])
            return Termination("pair", eps_bar=t.get("eps_bar"),
                               bounding_set=bset)
        return Termination(kind, eps_bar=t.get("eps_bar"),
                           rho_hat=t.get("rho_hat"), eps_hat=t.get("eps_hat"))
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"bad termination: {exc}")


def run_from_config(cfg: dict, max_iter_override=None) -> tuple:
    instance = build_instance(cfg)
    termination = build_termination(cfg)
    max_iter = max_iter_override or cfg.get("max_iterations", 1000)
    solver = cfg["solver"]
    if solver == "cscs":
        trace = cscs_run(instance, cfg["lam"], termination, max_iter)
    else:
        if "delta" not in cfg:
            raise ConfigError("rpb solvers need delta")
        try:
            rc = RpbConfig(
                lam=cfg["lam"], delta=cfg["delta"],
                policy=Policy.parse(cfg.get("policy", "lean")),
                termination=termination, max_iterations=max_iter,
                serious_rule="descent" if solver == "rpb-descent" else "rpb_tj",
                descent_gamma=cfg.get("descent_gamma", 0.5),
                descent_alpha=cfg.get("descent_alpha", 0.0))
        except ValueError as exc:
            raise ConfigError(str(exc))
        trace = rpb_run(instance, rc)
    return instance, trace


def _fmt(x) -> str:
    if isinstance(x, float):
        return "%.17g" % x
    return str(x)


def write_trace_csv(path: str, trace: RunTrace, phi_star=None):
    lines = [",".join(TRACE_COLUMNS)]
    for r in trace.records:
        gap = "" if phi_star is None else _fmt(r.phi_zhat - phi_star)
        row = [r.j, r.serious_count, r.kind, r.t_j, r.m_j, r.phi_xj,
               r.phi_xtilde, r.phi_zhat, gap, r.bundle_size,
               r.subproblem_gap, r.subproblem_iters, r.oracle_f_calls,
               r.oracle_g_calls]
        lines.append(",".join(gap if i == 8 else _fmt(v)
                              for i, v in enumerate(row)))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def summarize(instance: ProblemInstance, trace: RunTrace, cfg: dict) -> dict:
    serious = sum(1 for r in trace.records if r.kind == "serious")
    null = trace.iterations - serious
    phi_star = instance.known_phi_star
    zhat = trace.best_point()
    summary = {
        "solver": trace.solver,
        "lam": trace.lam,
        "delta": None if math.isnan(trace.delta) else trace.delta,
        "iterations": trace.iterations,
        "serious": serious,
        "null": null,
        "converged": trace.converged,
        "termination_reason": trace.termination_reason,
        "phi_best": evaluate_phi(instance, zhat),
        "oracle_f_calls": trace.oracle_f_calls,
        "oracle_g_calls": trace.oracle_g_calls,
        "subproblem_solves": trace.subproblem_solves,
    }
    if phi_star is not None:
        summary["phi_star"] = phi_star
        summary["gap_to_phistar"] = summary["phi_best"] - phi_star
    spec = cfg.get("instance", {})
    if spec.get("family") == "worst_case":
        params = WorstCaseParams(m_f=spec["m_f"], mu=spec.get("mu", 0.0),
                                 r0=spec["r0"], eps_bar=spec["eps_bar"],
                                 n=spec["n"])
        case, k0, gamma, tau, _ = params.resolve()
        summary["worst_case"] = {"case": case, "k0": k0, "gamma": gamma,
                                 "tau": tau}
    d0 = instance.known_d0_bound
    if instance.known_x_star is not None:
        d0 = float(np.linalg.norm(instance.x0 - instance.known_x_star))
    eps_bar = cfg.get("termination", {}).get("eps_bar") \
        or spec.get("eps_bar")
    if eps_bar:
        report = bnd.bound_report(trace.lam, instance.f.lipschitz_bound,
                                  instance.h.lipschitz, instance.h.modulus,
                                  d0, eps_bar)
        summary["bounds"] = report.as_dict()
        checks = {}
        if "serious" in report.values:
            checks["serious_within_bound"] = serious <= report.values["serious"]
        if "total" in report.values and trace.converged:
            checks["total_within_bound"] = \
                trace.iterations <= report.values["total"]
        summary["bound_checks"] = checks
    return summary


def _svg_line_chart(series: dict, title: str, log_y: bool = False,
                    width: int = 640, height: int = 400) -> str:
    """Minimal SVG polyline chart; series maps labels to (xs, ys)."""
    pad = 50
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]
    pts_all = []
    for xs, ys in series.values():
        for x, y in zip(xs, ys):
            if log_y and y <= 0:
                continue
            pts_all.append((x, math.log10(y) if log_y else y))
    if not pts_all:
        pts_all = [(0, 0), (1, 1)]
    xmin = min(p[0] for p in pts_all)
    xmax = max(p[0] for p in pts_all) or 1
    ymin = min(p[1] for p in pts_all)
    ymax = max(p[1] for p in pts_all)
    if xmax == xmin:
        xmax = xmin + 1
    if ymax == ymin:
        ymax = ymin + 1

    def sx(x):
        return pad + (x - xmin) / (xmax - xmin) * (width - 2 * pad)

    def sy(y):
        return height - pad - (y - ymin) / (ymax - ymin) * (height - 2 * pad)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<text x="{width // 2}" y="20" text-anchor="middle" '
             f'font-size="14">{title}</text>']
    axis = (f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" '
            f'y2="{height - pad}" stroke="black"/>'
            f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" '
            f'stroke="black"/>')
    parts.append(axis)
    for ci, (label, (xs, ys)) in enumerate(series.items()):
        pts = []
        for x, y in zip(xs, ys):
            if log_y:
                if y <= 0:
                    continue
                y = math.log10(y)
            pts.append(f"{sx(x):.2f},{sy(y):.2f}")
        if pts:
            color = colors[ci % len(colors)]
            parts.append(f'<polyline points="{" ".join(pts)}" fill="none" '
                         f'stroke="{color}" stroke-width="1.5"/>')
            parts.append(f'<text x="{width - pad}" y="{pad + 16 * ci}" '
                         f'text-anchor="end" font-size="12" fill="{color}">'
                         f'{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def write_plots(out_dir: str, trace: RunTrace, phi_star=None):
    js = [r.j for r in trace.records]
    ts = [max(r.t_j, 0.0) for r in trace.records]
    svg = _svg_line_chart({"t_j": (js, ts)}, "relaxed gap t_j per iteration",
                          log_y=False)
    with open(os.path.join(out_dir, "t_j.svg"), "w") as fh:
        fh.write(svg)
    if phi_star is not None:
        gaps = [r.phi_zhat - phi_star for r in trace.records]
        svg = _svg_line_chart({"phi(zhat)-phi*": (js, gaps)},
                              "objective gap of the incumbent (log scale)",
                              log_y=True)
        with open(os.path.join(out_dir, "gap.svg"), "w") as fh:
            fh.write(svg)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.setdefault("instance", {})["seed"] = args.seed
    instance, trace = run_from_config(cfg, args.max_iter)
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    phi_star = instance.known_phi_star
    write_trace_csv(os.path.join(out, "trace.csv"), trace, phi_star)
    summary = summarize(instance, trace, cfg)
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if args.plot:
        write_plots(out, trace, phi_star)
    print(json.dumps(summary, indent=2, sort_keys=True))
    if trace.converged:
        return 0
    return 2


def cmd_bench(args) -> int:
    cfg = load_config(args.config)
    instance = build_instance(cfg)
    sweep = cfg.get("sweep", {})
    eps_bar = sweep.get("eps_bar") \
        or cfg.get("termination", {}).get("eps_bar")
    if eps_bar is None:
        raise ConfigError("bench needs eps_bar in sweep or termination")
    m_f = instance.f.lipschitz_bound
    m_h = instance.h.lipschitz
    mu = instance.h.modulus
    d0 = instance.known_d0_bound
    if instance.known_x_star is not None:
        d0 = float(np.linalg.norm(instance.x0 - instance.known_x_star))

    if "lams" in sweep:
        lams = sweep["lams"]
    else:
        kind = sweep.get("kind", "convex")
        rng = bnd.lambda_ranges(kind, m_f, eps_bar, d0=d0, m_h=m_h, mu=mu)
        if not rng.valid:
            raise ConfigError(f"lambda range empty: {rng.note}")
        points = sweep.get("points", 5)
        lams = list(np.geomspace(rng.lo, rng.hi, points))

    solvers = sweep.get("solvers", ["rpb", "cscs"])
    delta = cfg.get("delta", eps_bar / 2)
    max_iter = cfg.get("max_iterations", 1000)
    term = Termination("eps_solution", eps_bar=eps_bar) \
        if instance.known_phi_star is not None \
        else Termination("max_iterations")

    rows = []
    all_ok = True
    for lam in lams:
        for solver in solvers:
            if solver == "cscs":
                trace = cscs_run(instance, lam, term, max_iter)
            else:
                rc = RpbConfig(lam=lam, delta=delta,
                               policy=Policy.parse(cfg.get("policy", "lean")),
                               termination=term, max_iterations=max_iter)
                trace = rpb_run(instance, rc)
            serious = sum(1 for r in trace.records if r.kind == "serious")
            row = {"solver": solver, "lam": lam,
                   "iterations": trace.iterations, "serious": serious,
                   "null": trace.iterations - serious,
                   "converged": trace.converged,
                   "all_serious": serious == trace.iterations}
            if d0 is not None:
                row["bound_serious"] = bnd.bound_serious(d0, lam, mu, eps_bar)
                row["bound_cscs"] = bnd.bound_cscs(d0, lam, mu, m_f, eps_bar)
                try:
                    row["bound_null"] = bnd.bound_null(lam, m_f, m_h, mu,
                                                       d0, eps_bar)
                    row["bound_total"] = bnd.bound_total(lam, m_f, m_h, mu,
                                                         d0, eps_bar)
                except ValueError:
                    pass
                if trace.converged:
                    if solver == "cscs":
                        ok = trace.iterations <= row["bound_cscs"] \
                            or not bnd.cscs_lambda_valid(lam, m_f, eps_bar)
                    else:
                        ok = serious <= row["bound_serious"]
                        if "bound_total" in row:
                            ok = ok and trace.iterations <= row["bound_total"]
                    row["bound_ok"] = ok
                    all_ok = all_ok and ok
            rows.append(row)
            log.info("bench: %s lam=%.4g iters=%d serious=%d", solver, lam,
                     trace.iterations, serious)

    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "bench.json"), "w") as fh:
        json.dump(rows, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(rows, indent=2, sort_keys=True))
    return 0 if all_ok else 2


def cmd_lowerbound(args) -> int:
    try:
        params = WorstCaseParams(m_f=args.m_f, mu=args.mu, r0=args.r0,
                                 eps_bar=args.eps_bar, n=args.n)
        instance = make_worst_case(params)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    case, k0, gamma, tau, _ = params.resolve()
    floor = bnd.lower_bound(args.m_f, args.mu, args.r0, args.eps_bar)
    term = Termination("eps_solution", eps_bar=args.eps_bar)
    max_iter = args.max_iter or max(4 * floor, 200)
    results = {"case": case, "k0": k0, "gamma": gamma, "tau": tau,
               "lower_bound": floor, "runs": []}
    ok = True
    for lam in args.lam:
        rc = RpbConfig(lam=lam, delta=args.eps_bar / 2,
                       policy=Policy("lean"), termination=term,
                       max_iterations=max_iter)
        for name, trace in (("rpb", rpb_run(instance, rc)),
                            ("cscs", cscs_run(instance, lam, term, max_iter))):
            observed = trace.iterations if trace.converged else None
            entry = {"solver": name, "lam": lam, "converged": trace.converged,
                     "iterations_to_eps": observed}
            if observed is not None:
                entry["respects_lower_bound"] = observed >= floor
                ok = ok and observed >= floor
            results["runs"].append(entry)
    print(json.dumps(results, indent=2, sort_keys=True))
    return 0 if ok else 2


def cmd_bounds(args) -> int:
    report = bnd.bound_report(args.lam, args.m_f, args.m_h, args.mu,
                              args.d0, args.eps_bar)
    print(json.dumps(report.as_dict(), indent=2, sort_keys=True))
    return 0


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bundlekit")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="run one solver from a JSON config")
    ps.add_argument("--config", required=True)
    ps.add_argument("--out", default=None)
    ps.add_argument("--plot", action="store_true")
    ps.add_argument("--seed", type=int, default=None)
    ps.add_argument("--max-iter", type=int, default=None)
    ps.set_defaults(func=cmd_solve)

    pb = sub.add_parser("bench", help="sweep lambda and compare to bounds")
    pb.add_argument("--config", required=True)
    pb.add_argument("--out", default=None)
    pb.set_defaults(func=cmd_bench)

    pl = sub.add_parser("lowerbound",
                        help="empirical check of the lower complexity bound")
    pl.add_argument("--m-f", type=float, required=True)
    pl.add_argument("--mu", type=float, default=0.0)
    pl.add_argument("--r0", type=float, required=True)
    pl.add_argument("--eps-bar", type=float, required=True)
    pl.add_argument("--n", type=int, required=True)
    pl.add_argument("--lam", type=float, action="append", required=True)
    pl.add_argument("--max-iter", type=int, default=None)
    pl.set_defaults(func=cmd_lowerbound)

    pc = sub.add_parser("bounds", help="print bound formula values")
    pc.add_argument("--lam", type=float, required=True)
    pc.add_argument("--m-f", type=float, required=True)
    pc.add_argument("--m-h", type=float, default=0.0)
    pc.add_argument("--mu", type=float, default=0.0)
    pc.add_argument("--d0", type=float, default=None)
    pc.add_argument("--eps-bar", type=float, required=True)
    pc.set_defaults(func=cmd_bounds)
    return p


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("BUNDLEKIT_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s")
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

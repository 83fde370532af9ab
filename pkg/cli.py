#!/usr/bin/env python3
"""
Monodromy Lab: CLI Interface

Usage:
    python cli.py bifdiag --k 1.8,2.0              (critical values on K-slices + threads)
    python cli.py monodromy --loop gamma1          (SL(3,Z) monodromy of a default loop)
    python cli.py monodromy --loop gamma3 --base 2,1,1.8 --radius 0.4
    python cli.py monodromy --loop custom --waypoints loop.json
    python cli.py a2 --loop 3 --verify-normal-form (Picard-Lefschetz matrix, Taylor checks)
    python cli.py lax-check --family l1 --b 1.2    (spectral polynomial at a critical value)
    python cli.py flow --field H --time 10         (conservation audit along a trajectory)
    python cli.py reduce --k 1 --delzant           (reduced space at K = k)
    python cli.py fiber --value 2,1,1.8 --periods  (fiber point and period lattice)

Every command accepts --params d1,d2,w,g --seed N --tol name=value --out FILE
--report json|csv (alias --format) -v. The exit status is 0 iff every audit
in the report passed.
"""

import argparse
import contextlib
import json
import os
import sys
import time
from typing import Dict, List

import numpy as np

from fibration import critical_set as cs
from fibration import a2_unfolding as a2
from fibration import lax
from fibration import monodromy as mono
from fibration import reduction as red
from fibration.config import DEFAULT_TOLERANCES, RunConfig, parse_floats, parse_params
from fibration.errors import DegenerateLinearization, DomainError, FibrationError
from fibration.flows import FlowSpec, flow_samples
from fibration.phase_space import (
    STC,
    IntegralValue,
    PhasePoint,
    integrals_array,
    random_phase_point,
    sphere_defect,
)
from fibration.report import Report, slices_to_csv, to_json, write_text


LOOP_CHOICES = ("gamma1", "gamma2", "gamma3", "gamma4", "all", "custom")
A2_CHOICES = ("0", "1", "2", "3", "4", "all")
FIELD_COEFFS = {"H1": (1.0, 0.0, 0.0), "H2": (0.0, 1.0, 0.0), "K": (0.0, 0.0, 1.0)}

RELATION_3X3 = np.array([[1, 0, 0], [0, 1, 1], [0, -1, 0]])
A0_STAR = (4.0 * 2.0 ** (2.0 / 3.0) + 3.0) / 16.0


def format_report(report: Report) -> str:
    """Format a report as a human-readable summary."""
    lines = []

    lines.append("=" * 60)
    lines.append(f"  MONODROMY LAB — {report.command.upper()}")
    lines.append("=" * 60)
    lines.append("")
    p = report.params
    lines.append(f"PARAMS: delta1={p.delta1:g} delta2={p.delta2:g} omega={p.omega:g} g={p.g:g}  seed={report.seed}")
    lines.append("")

    lines.append("AUDITS")
    lines.append("-" * 40)
    for a in report.audits:
        mark = "PASS" if a["passed"] else "FAIL"
        lines.append(f"  [{mark}] {a['name']}: {a['value']:.3e} (bound {a['bound']:.1e})")
    if not report.audits:
        lines.append("  (none)")

    lines.append("")
    lines.append(f"RESULT: {'PASS' if report.passed else 'FAIL'}")
    lines.append("=" * 60)
    return "\n".join(lines)


# ----------------------------
# Commands
# ----------------------------
def cmd_bifdiag(args, cfg: RunConfig) -> Report:
    report = Report("bifdiag", cfg.params, cfg.seed)
    k_values = parse_floats(args.k)
    if not k_values:
        raise DomainError("--k needs at least one value")
    diagram = cs.bifurcation_diagram(k_values, cfg.params, n_samples=args.samples, thread_samples=args.thread_samples)
    report.data.update(diagram)

    rank0 = []
    try:
        for r in cs.rank0_classify(cfg.params, cfg.tol("classify")):
            rank0.append({"sigma_u": r.sigma_u, "sigma_v": r.sigma_v, "value": r.critical_value,
                          "type": r.type, "eigenvalues": r.eigenvalues})
    except DegenerateLinearization as e:
        rank0 = [{"value": v, "type": "degenerate"} for v in cs.rank0_values(cfg.params)]
        report.data["rank0_note"] = str(e)
    report.data["rank0_points"] = rank0

    if cfg.params == STC:
        bm = cs.b_max()
        report.data["b_max"] = bm
        report.add("b_max_root", abs(16 * bm ** 3 - 8 * bm ** 2 + bm - 64), 1e-12 * 64)
        worst = 0.0
        for sl in diagram["slices"]:
            for r in sl["rank1"]:
                worst = max(worst, cs.rank1_sample(r["family"], r["b"]).proportionality_residual)
            report.data.setdefault("ffr_counts", []).append({"k": sl["k"], "count": cs.focus_focus_count(sl["k"])})
        report.add("rank1_proportionality", worst, 1e-10)
    return report


def _load_waypoints(path: str) -> List[IntegralValue]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise DomainError(f"cannot read waypoints from '{path}': {e}")
    try:
        return [IntegralValue.from_array(w) for w in raw]
    except (TypeError, ValueError):
        raise DomainError(f"waypoints in '{path}' must be a list of [h1, h2, k] triples")


def _loop_summary(state) -> Dict:
    out = {
        "loop": state.loop_name,
        "attempts": state.attempts,
        "steps_per_segment": state.steps_per_segment,
        "waypoints": len(state.loop.waypoints) if state.loop else 0,
        "initial_basis": state.initial_basis.matrix() if state.initial_basis else None,
        "final_basis": state.final_basis.matrix() if state.final_basis else None,
        "transport": {
            "steps": state.log.steps,
            "bisections": state.log.bisections,
            "rejected": len(state.log.rejected),
            "max_fiber_residual": state.log.max_fiber_residual,
            "max_angle_residual": state.log.max_angle_residual,
        },
        "errors": state.errors,
    }
    if state.raw is not None:
        out["raw_matrix"] = state.raw.entries
        out["raw_float"] = state.raw.raw
        out["rounding_residual"] = state.raw.residual
        out["conjugated_matrix"] = state.conjugated.entries
        out["reduced_block"] = state.reduced
    return out


def cmd_monodromy(args, cfg: RunConfig) -> Report:
    from pipeline.workflow import run_agent, run_loops

    report = Report("monodromy", cfg.params, cfg.seed)
    base = IntegralValue.from_array(parse_floats(args.base, 3)) if args.base else None
    if args.radius is not None and args.radius <= 0.0:
        raise DomainError(f"--radius must be positive, got {args.radius}")
    placement = {"base": base, "radius": args.radius, "tolerances": cfg.tolerances}
    if args.loop == "custom":
        if not args.waypoints:
            raise DomainError("--loop custom needs --waypoints FILE")
        if base is not None or args.radius is not None:
            raise DomainError("--base and --radius apply to gamma1 ... gamma4; a custom loop takes --waypoints")
        states = [run_agent("custom", cfg.params, cfg.seed, _load_waypoints(args.waypoints), tolerances=cfg.tolerances)]
    elif args.loop == "all":
        if cfg.params != STC:
            raise DomainError("the default loops are defined for the STC parameters only")
        states = run_loops(list(mono.LOOP_LEVELS), cfg.seed, **placement)
    else:
        states = [run_agent(args.loop, cfg.params, cfg.seed, **placement)]

    report.data["loops"] = [_loop_summary(s) for s in states]
    for s in states:
        report.extend([dict(a, name=f"{s.loop_name}.{a['name']}") for a in s.audits])
        if not s.audits:
            report.add(f"{s.loop_name}.completed", 1.0, 0.0)

    if args.loop == "all" and all(s.conjugated is not None for s in states):
        M = {s.loop_name: s.conjugated.entries for s in states}
        left = M["gamma2"] @ M["gamma1"]
        right = M["gamma3"] @ M["gamma4"]
        report.data["relation"] = {"gamma2_gamma1": left, "gamma3_gamma4": right}
        report.add("relation_equal", float(np.sum(left != right)), 0.0)
        report.add("relation_value", float(np.sum(left != RELATION_3X3)), 0.0)
    return report


def cmd_a2(args, cfg: RunConfig) -> Report:
    report = Report("a2", cfg.params, cfg.seed)
    ids = ["1", "2", "3", "4"] if args.loop == "all" else [args.loop]

    loops = {}
    for loop_id in ids:
        if loop_id == "0":
            N0 = a2.composite_monodromy(["1", "2"])
            loops["0"] = {"matrix": N0, "charpoly": [1, -int(np.trace(N0)), int(round(np.linalg.det(N0)))]}
            report.add("loop0.charpoly", float(abs(np.trace(N0) - 1) + abs(round(np.linalg.det(N0)) - 1)), 0.0)
            continue
        res = a2.pl_monodromy(loop_id)
        loops[loop_id] = res
        report.add(f"loop{loop_id}.transposition", 0.0 if res.transposition_ok else 1.0, 0.0)
        report.add(f"loop{loop_id}.min_separation", res.min_separation, a2.ROOT_GUARD,
                   passed=res.min_separation > a2.ROOT_GUARD)
    report.data["loops"] = loops

    if args.loop == "all":
        left = a2.composite_monodromy(["1", "2"])
        right = a2.composite_monodromy(["4", "3"])
        report.add("relation_equal", float(np.sum(left != right)), 0.0)

    if args.verify_normal_form:
        nf = a2.verify_normal_form(cfg.params)
        report.data["normal_form"] = {
            "A": nf.A, "B": nf.B, "kappa_scale": nf.kappa_scale,
            "coefficients": {name: {",".join(map(str, k)): v for k, v in c.items()} for name, c in nf.coefficients.items()},
        }
        report.extend([dict(c, name=f"normal_form.{c['name']}") for c in nf.checks])

    if args.probe:
        value = IntegralValue.from_array(parse_floats(args.probe, 3))
        report.data["probe"] = a2.singular_fiber_probe(value, cfg.params)
    return report


def cmd_lax(args, cfg: RunConfig) -> Report:
    report = Report("lax-check", cfg.params, cfg.seed)

    if args.family:
        sample = cs.rank1_sample(args.family, args.b, cfg.params)
        value = sample.critical_value
        report.data["family"] = sample.family
    elif args.value:
        value = IntegralValue.from_array(parse_floats(args.value, 3))
    else:
        value = cs.C_STAR

    q6 = lax.spectral_poly_from_value(value, cfg.params)
    roots = lax.root_multiplicities(q6.coefficients, cfg.tol("gcd"))
    report.data["value"] = value
    report.data["q6"] = q6.coefficients
    report.data["roots"] = [{"root": r, "multiplicity": m} for r, m in roots]

    if not args.family and not args.value:
        tri = lax.triple_root_check(value, cfg.params)
        report.data["triple_root"] = {"a1": tri.a1, "a0": tri.a0, "model": tri.model}
        report.add("triple_root_residual", tri.residual, 1e-10)
        if cfg.params == STC:
            report.add("a0_closed_form", abs(tri.a0 - A0_STAR), 1e-12)
            report.add("a1_closed_form", abs(tri.a1 + 1.0), 1e-12)
    elif args.family and report.data["family"] in cs.FFR_FAMILIES:
        worst = max(m for _, m in roots) if roots else 0
        report.add("double_roots", float(abs(worst - 2)), 0.0)

    if args.samples < 1:
        raise DomainError(f"--samples must be at least 1, got {args.samples}")
    if args.trajectory_time > 0:
        rng = np.random.default_rng(cfg.seed)
        P = random_phase_point(rng)
        res = lax.lax_residual(
            P, cfg.params, duration=args.trajectory_time, samples=args.samples, tolerance=cfg.tol("flow"),
        )
        report.data["lax_trajectory"] = {"start": P, "duration": res.duration, "samples": res.samples}
        report.add("lax_residual", res.residual, 1e-7)
        report.add("q6_drift", res.coefficient_drift, 1e-8)
    return report


def cmd_flow(args, cfg: RunConfig) -> Report:
    report = Report("flow", cfg.params, cfg.seed)
    if args.point:
        P = PhasePoint.from_array(parse_floats(args.point, 8)).check()
    else:
        P = random_phase_point(np.random.default_rng(cfg.seed))
    coeffs = FIELD_COEFFS.get(args.field, (1.0, 1.0, cfg.params.omega))
    times = np.linspace(0.0, args.time, args.samples + 1)
    X = flow_samples(FlowSpec(coeffs, args.time, cfg.tol("flow")), P, times, cfg.params)

    F = integrals_array(X, cfg.params)
    report.data.update({"field": args.field, "start": P, "times": times, "states": X, "integrals": F})
    report.add("integral_drift", float(np.max(np.abs(F - F[0]))), 1e-9)
    report.add("sphere_defect", max(sphere_defect(x) for x in X), 1e-10)
    report.add("syzygies", max(float(np.max(np.abs(red.syzygies(red.invariants_array(x))))) for x in X), 1e-10)
    return report


def cmd_reduce(args, cfg: RunConfig) -> Report:
    report = Report("reduce", cfg.params, cfg.seed)
    report.data["k"] = args.k
    report.data["type"] = red.reduced_space_type(args.k)

    if args.delzant:
        D = red.delzant_polygon(args.k)
        report.data["delzant"] = {"vertices": D.vertices, "area": red.polygon_area(D)}
        report.add("delzant", 0.0 if red.is_delzant(D) else 1.0, 0.0)

    if args.point:
        theta_u, u3, theta_v, v3 = parse_floats(args.point, 4)
        R = red.ReducedPoint(theta_u, u3, theta_v, v3, args.k)
        h1, h2 = red.reduced_hamiltonians(R, cfg.params)
        lifted = red.section_lift(R)
        alt = red.reduced_hamiltonians_from_invariants(red.invariants_of(lifted), cfg.params)
        report.data["reduced_values"] = {"h1": h1, "h2": h2}
        report.add("section_vs_invariants", max(abs(h1 - alt[0]), abs(h2 - alt[1])), 1e-12)

    X = red.invariants_of(random_phase_point(np.random.default_rng(cfg.seed)))
    B = red.bracket_matrix(X)
    report.add("bracket_antisymmetry", float(np.max(np.abs(B + B.T))), 1e-14)
    names = red.INVARIANT_NAMES
    jac = max(abs(red.jacobi_defect(names[i], names[j], names[m], X))
              for i in range(len(names)) for j in range(i + 1, len(names)) for m in range(j + 1, len(names)))
    report.add("jacobi_identity", jac, 1e-8)
    return report


def cmd_fiber(args, cfg: RunConfig) -> Report:
    report = Report("fiber", cfg.params, cfg.seed)
    target = IntegralValue.from_array(parse_floats(args.value, 3))
    rng = np.random.default_rng(cfg.seed)
    fp = mono.solve_fiber_point_retry(target, rng, cfg.params, tol=cfg.tol("fiber"))
    report.data.update({"value": target, "point": fp.P, "residual": fp.residual})
    report.add("fiber_residual", fp.residual, cfg.tol("fiber"))

    if args.periods:
        if cfg.params == STC and target.distance(mono.R0) < 1e-12:
            g2, g3 = mono.R0_GUESSES
        else:
            g2, g3 = mono.recurrence_guesses(fp, cfg.params)
        basis = mono.lattice_reduce(mono.solve_period_basis(fp, g2, g3, cfg.params, tol=cfg.tol("period")))
        report.data["period_basis"] = basis.matrix()
        closure = max(mono.closure_defect(T, fp.P, cfg.params) for T in (basis.T2, basis.T3))
        report.add("period_closure", closure, mono.CLOSURE_TOL)
        report.add("basis_determinant", abs(basis.determinant()), mono.DET_TOL,
                   passed=abs(basis.determinant()) >= mono.DET_TOL)
    return report


COMMANDS = {
    "bifdiag": cmd_bifdiag,
    "monodromy": cmd_monodromy,
    "a2": cmd_a2,
    "lax-check": cmd_lax,
    "flow": cmd_flow,
    "reduce": cmd_reduce,
    "fiber": cmd_fiber,
}


# ----------------------------
# Argument parsing
# ----------------------------
def _parse_tolerances(items: List[str]) -> Dict[str, float]:
    out = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep or name not in DEFAULT_TOLERANCES:
            raise DomainError(f"--tol expects name=value with name in {sorted(DEFAULT_TOLERANCES)}, got '{item}'")
        try:
            out[name] = float(value)
        except ValueError:
            raise DomainError(f"--tol value must be a number, got '{item}'")
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--params", metavar="D1,D2,W,G", help="System parameters (default: STC 0.5,1.5,1,1)")
    common.add_argument("--seed", type=int, default=0, help="Random seed (default: 0)")
    common.add_argument("--tol", action="append", metavar="NAME=VALUE", help="Tolerance override, repeatable")
    common.add_argument("--out", metavar="FILE", help="Write the report to a file instead of stdout")
    common.add_argument("--report", "--format", dest="format", choices=("json", "csv"), default="json",
                        help="Report format (csv: bifdiag only)")
    common.add_argument("-v", "--verbose", action="store_true", help="Show detailed progress logs")

    parser = argparse.ArgumentParser(
        prog="monodromy-lab",
        description="Singular-fibration analysis of the two-spin Tavis-Cummings system.",
        epilog="Example: python cli.py monodromy --loop gamma1 --out gamma1.json",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bifdiag", parents=[common], help="Critical values on K-slices")
    p.add_argument("--k", required=True, help="Comma-separated K levels")
    p.add_argument("--samples", type=int, default=400, help="Rank-2 samples per slice (default: 400)")
    p.add_argument("--thread-samples", type=int, default=200, help="Points per 3D thread (default: 200)")

    p = sub.add_parser("monodromy", parents=[common], help="Hamiltonian monodromy around a loop")
    p.add_argument("--loop", choices=LOOP_CHOICES, default="gamma1")
    p.add_argument("--waypoints", metavar="FILE", help="JSON list of [h1, h2, k] for --loop custom")
    p.add_argument("--base", metavar="H1,H2,K", help="Base value of gamma1 ... gamma4 (default: 2,1,1.8)")
    p.add_argument("--radius", type=float, help="Circle radius around the focus-focus value (default: 0.5)")

    p = sub.add_parser("a2", parents=[common], help="Picard-Lefschetz monodromy and normal form at c*")
    p.add_argument("--loop", choices=A2_CHOICES, default="all")
    p.add_argument("--verify-normal-form", action="store_true", help="Run the Taylor-coefficient checks")
    p.add_argument("--probe", metavar="H1,H2,K", help="Classify the fiber over a value near c*")

    p = sub.add_parser("lax-check", parents=[common], help="Spectral polynomial checks")
    p.add_argument("--value", metavar="H1,H2,K", help="Integral value (default: c*)")
    p.add_argument("--family", help="Rank-1 family l1 ... l8 (with --b)")
    p.add_argument("--b", type=float, help="Family parameter b")
    p.add_argument("--trajectory-time", type=float, default=5.0, help="Lax-equation audit duration, 0 to skip")
    p.add_argument("--samples", type=int, default=20, help="Sample times along the trajectory (default: 20)")

    p = sub.add_parser("flow", parents=[common], help="Integrate a Hamiltonian flow and audit conservation")
    p.add_argument("--field", choices=("H1", "H2", "K", "H"), default="H")
    p.add_argument("--time", type=float, default=10.0)
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--point", metavar="U1,...,P", help="Start point (default: random from --seed)")

    p = sub.add_parser("reduce", parents=[common], help="S^1-reduced space at K = k")
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--delzant", action="store_true", help="Include the Delzant polygon")
    p.add_argument("--point", metavar="THU,U3,THV,V3", help="Evaluate the reduced Hamiltonians")

    p = sub.add_parser("fiber", parents=[common], help="Fiber point and period lattice over a value")
    p.add_argument("--value", required=True, metavar="H1,H2,K")
    p.add_argument("--periods", action="store_true", help="Also solve the period basis")

    return parser


def run(argv: List[str]) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        cfg = RunConfig(
            params=parse_params(args.params),
            output_path=args.out,
            format=args.format,
            tolerances=_parse_tolerances(args.tol),
            seed=args.seed,
        )
        if cfg.format == "csv" and args.command != "bifdiag":
            raise DomainError("--report csv is available for bifdiag only")
    except FibrationError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1

    start = time.time()
    try:
        # Suppress logs unless verbose mode
        with contextlib.ExitStack() as stack:
            if not args.verbose:
                sink = stack.enter_context(open(os.devnull, "w"))
                stack.enter_context(contextlib.redirect_stdout(sink))
            report = COMMANDS[args.command](args, cfg)
    except FibrationError as e:
        print(f"Error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    elapsed = time.time() - start

    if cfg.format == "csv":
        text = slices_to_csv(report.data["slices"])
    else:
        text = to_json(report)
    write_text(text, cfg.output_path)

    if cfg.output_path:
        print(f"Report saved to {cfg.output_path}")
        print(format_report(report))
        print(f"  Completed in {elapsed:.1f}s")

    return 0 if report.passed else 1


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()

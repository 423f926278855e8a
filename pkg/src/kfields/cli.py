"""Command-line front end.

Exit codes: 0 success, 1 a check failed (or CFL violated), 2 bad input.
"""
from __future__ import annotations

import argparse
import itertools
import json
import sys
from pathlib import Path

import numpy as np

from . import fieldsolve as fs
from .bridge import (
    contactify,
    damped_lift,
    extend_gauge,
    is_projectable,
    project,
    verify_proposition,
    z_dependent_gauge,
)
from .errors import CflViolated, KFieldsError, NotProjectable, ParseError, SchemaError
from .geometry import is_integrable, lie_bracket, random_points, write_atomic
from .kcontact import (
    KContactSystem,
    contact_axiom_check,
    contact_hdw_residual,
    darboux_contact_forms,
    hamiltonian_kvf_contact,
    reeb_conditions,
    reeb_fields,
)
from .ksymplectic import (
    CANONICAL,
    darboux_two_forms,
    hamiltonian_kvf,
    hdw_residual,
    nondegeneracy_check,
)
from .sysfile import load_gauge, load_mapping, load_system

DEFAULT_TOL = 1e-10
REEB_TOL = 1e-12


def _global_flags(defaults: bool) -> argparse.ArgumentParser:
    # the subcommand copies suppress their defaults so that flags given
    # before the subcommand name are not overwritten
    d = (lambda v: v) if defaults else (lambda v: argparse.SUPPRESS)
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=d(0), help="seed for probe points (default 0)")
    p.add_argument("--probes", type=int, default=d(50), help="number of probe points (default 50)")
    p.add_argument("--tol", type=float, default=d(None), help="residual tolerance override")
    p.add_argument("--out", type=Path, default=d(None), help="directory for output files")
    return p


def build_parser() -> argparse.ArgumentParser:
    flags = _global_flags(False)
    parser = argparse.ArgumentParser(prog="kfields", parents=[_global_flags(True)],
                                     description="k-symplectic / k-contact HDW field tools")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kvf", parents=[flags], help="print a Hamiltonian k-vector field")
    p.add_argument("system")
    p.add_argument("--gauge", help="YAML file with a gauge table")

    p = sub.add_parser("check", parents=[flags], help="verify structural axioms and HDW residuals")
    p.add_argument("system")
    p.add_argument("--contactify", action="store_true", help="also check the contactified system")

    p = sub.add_parser("bridge", parents=[flags], help="contactify, solve, project, verify")
    p.add_argument("system")
    p.add_argument("--negative", type=float, default=None, metavar="GAMMA",
                   help="add damped-lift and z-dependent-gauge negative controls")

    p = sub.add_parser("simulate", parents=[flags], help="integrate the vibrating string")
    p.add_argument("config")
    p.add_argument("--reference", type=int, default=None, metavar="M",
                   help="compare with the standing wave of mode M")
    p.add_argument("--convergence", type=int, default=None, metavar="R",
                   help="run R refinement levels and print observed orders")
    return parser


def _tol(args) -> float:
    tol = DEFAULT_TOL if args.tol is None else args.tol
    if not tol > 0:
        raise SchemaError("--tol must be positive")
    return tol


def _status(ok: bool) -> str:
    return "pass" if ok else "FAIL"


def _emit(lines, args, filename):
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        write_atomic(args.out / filename, text)


def cmd_kvf(args) -> int:
    sf = load_system(args.system)
    gauge = load_gauge(args.gauge, sf.system.chart) if args.gauge else (sf.gauge or CANONICAL)
    if sf.contact:
        X = hamiltonian_kvf_contact(sf.system, gauge)
    else:
        X = hamiltonian_kvf(sf.system, gauge)
    _emit(X.lines(), args, "kvf.txt")
    return 0


def _points(chart, args, ranges):
    return random_points(chart, args.probes, np.random.default_rng(args.seed), ranges)


def _check_contact(system: KContactSystem, gauge, args, ranges, tol, lines) -> bool:
    chart = system.chart
    pts = _points(chart, args, ranges)
    ok_all = True
    triples = set()
    axioms_ok = True
    reeb_dev = 0.0
    for j in range(args.probes):
        pt = {c: float(pts[c][j]) for c in chart.coordinates}
        rep = contact_axiom_check(darboux_contact_forms(chart, pt))
        triples.add(rep.triple)
        axioms_ok &= rep.passed
        eta_R, d_eta_R = reeb_conditions(chart, pt)
        reeb_dev = max(reeb_dev, float(np.max(np.abs(eta_R - np.eye(chart.k)))),
                       float(np.max(np.abs(d_eta_R), initial=0.0)))
    triple = ", ".join(str(t) for t in sorted(triples))
    lines.append(f"[{_status(axioms_ok)}] contact axioms (corank ker eta, rank ker d eta, "
                 f"intersection) = {triple}; expected ({chart.k}, {chart.k}, 0)")
    reeb_ok = reeb_dev <= REEB_TOL
    lines.append(f"[{_status(reeb_ok)}] Reeb conditions: max deviation {reeb_dev:.3e} (tol {REEB_TOL:g})")
    R = reeb_fields(system)
    brackets_zero = all(lie_bracket(R.field(a), R.field(b)).is_zero()
                        for a, b in itertools.combinations(range(chart.k), 2))
    lines.append(f"[{_status(brackets_zero)}] Reeb brackets vanish symbolically")
    X = hamiltonian_kvf_contact(system, gauge)
    res = contact_hdw_residual(system, X, pts)
    res_ok = res.max_norm <= tol
    lines.append(f"[{_status(res_ok)}] contact HDW residual: max {res.max_norm:.3e} over "
                 f"{args.probes} probes (tol {tol:g})")
    ok_all &= axioms_ok and reeb_ok and brackets_zero and res_ok
    return ok_all


def cmd_check(args) -> int:
    sf = load_system(args.system)
    tol = _tol(args)
    system, chart = sf.system, sf.system.chart
    gauge = sf.gauge or CANONICAL
    kind = "k-contact" if sf.contact else "k-symplectic"
    lines = [f"system: {kind}, n = {chart.n}, k = {chart.k}, dim = {chart.dim}",
             f"probes: {args.probes} (seed {args.seed})"]
    if sf.contact:
        ok = _check_contact(system, gauge, args, sf.ranges, tol, lines)
    else:
        nd = nondegeneracy_check(darboux_two_forms(chart))
        lines.append(f"[{_status(nd.nondegenerate)}] nondegeneracy: stacked rank {nd.rank} of {nd.dim}")
        X = hamiltonian_kvf(system, gauge)
        pts = _points(chart, args, sf.ranges)
        res = hdw_residual(system, X, pts)
        res_ok = res.max_norm <= tol
        lines.append(f"[{_status(res_ok)}] HDW residual: max {res.max_norm:.3e} over "
                     f"{args.probes} probes (tol {tol:g})")
        integ = is_integrable(X, pts)
        lines.append(f"[info] integrable at probes: {integ.integrable} "
                     f"(max bracket {integ.max_norm:.3e})")
        ok = nd.nondegenerate and res_ok
        if args.contactify:
            pair = contactify(system)
            lines.append(f"contactified: dim = {pair.target.chart.dim}, "
                         f"z = {', '.join(pair.target.chart.z_names)}")
            zr = {**sf.ranges}
            ok = _check_contact(pair.target, extend_gauge(gauge, pair.target), args, zr, tol, lines) and ok
    lines.append(f"result: {_status(ok)}")
    _emit(lines, args, "check.txt")
    return 0 if ok else 1


def cmd_bridge(args) -> int:
    sf = load_system(args.system)
    if sf.contact:
        raise SchemaError(f"{args.system}: bridge expects a k-symplectic system")
    tol = _tol(args)
    system = sf.system
    pair = contactify(system)
    gauge = extend_gauge(sf.gauge or CANONICAL, pair.target)
    pts = _points(system.chart, args, sf.ranges)
    report = verify_proposition(system, gauge, pts, tol=tol)
    out = {"proposition": report.to_dict(), "seed": args.seed}
    ok = report.passed
    if args.negative is not None:
        out["negative_controls"] = _negative_controls(system, args.negative, pts, tol, args.seed)
    text = json.dumps(out, indent=2)
    _emit([text, f"result: {_status(ok)} (max residual {report.max_residual:.3e}, tol {tol:g})"],
          args, "bridge_report.txt")
    return 0 if ok else 1


def _negative_controls(system, gamma, pts, tol, seed) -> dict:
    damped = damped_lift(system, gamma)
    XD = hamiltonian_kvf_contact(damped)
    zpts = {**pts, **{z: np.zeros_like(next(iter(pts.values()))) for z in damped.chart.z_names}}
    contact_res = contact_hdw_residual(damped, XD, zpts).max_norm
    proj = is_projectable(XD, seed=seed)
    entry = {
        "hamiltonian": str(damped.h),
        "contact_residual": contact_res,
        "projectable": proj.projectable,
    }
    if proj.projectable:
        # projects, but onto a field that does not solve the k-symplectic equation of h
        r = hdw_residual(system, project(XD), pts).max_norm
        entry["projected_hdw_residual"] = r
        entry["projection_solves_k_symplectic"] = r <= tol
    else:
        entry["witness"] = _witness(proj.witness)
    out = {"damped_lift": entry}
    if system.chart.k >= 2:
        target = contactify(system).target
        XZ = hamiltonian_kvf_contact(target, z_dependent_gauge(target))
        projz = is_projectable(XZ, seed=seed)
        try:
            project(XZ)
            status = "projectable"
        except NotProjectable:
            status = "NotProjectable"
        out["z_dependent_gauge"] = {
            "contact_residual": contact_hdw_residual(target, XZ, zpts).max_norm,
            "status": status,
            "witness": _witness(projz.witness),
        }
    return out


def _witness(w):
    if w is None:
        return None
    alpha, name, zb, deriv, point = w
    return {"component": f"X{alpha + 1}[{name}]", "z": zb, "derivative": deriv, "point": point}


def cmd_simulate(args) -> int:
    cfg = fs.StringConfig.from_mapping(load_mapping(args.config))
    out = args.out or Path(".")
    try:
        run = fs.simulate_string(cfg)
    except CflViolated as exc:
        print(f"error: CFL number {exc.cfl:.6g} exceeds 1 (c = {cfg.c:.6g}, dt = {cfg.time_step:.6g}, "
              f"dx = {cfg.dx:.6g})", file=sys.stderr)
        return 1
    out.mkdir(parents=True, exist_ok=True)
    run.grid.write_csv(out / "section.csv")
    diag = ["t,energy,hdw_residual_max"] + [
        f"{t!r},{e!r},{r!r}" for t, e, r in zip(run.times.tolist(), run.energy.tolist(),
                                                  run.hdw_residual.tolist())]
    write_atomic(out / "diagnostics.csv", "\n".join(diag) + "\n")
    e0 = run.energy[0]
    drift = float(np.max(np.abs(run.energy - e0)) / e0) if e0 else 0.0
    print(f"N = {cfg.N}, dt = {cfg.time_step:.6g}, CFL = {cfg.cfl_number:.4g}, steps = {cfg.n_steps}")
    print("HDW residuals: " + ", ".join(f"{k}: {v:.3e}" for k, v in run.residuals.items()))
    print(f"energy drift (relative): {drift:.3e}")
    status = 0
    if args.reference is not None:
        ref = fs.StandingWave(cfg.rho, cfg.tau, args.reference, cfg.L)
        err = fs.linf_error(run.grid, ref)
        tol = 1e-3 if args.tol is None else args.tol
        print(f"Linf = {err:.3e} (final time, mode {args.reference}); "
              f"Linf <= {tol:g}: {_status(err <= tol)}")
        status = 0 if err <= tol else 1
    if args.convergence is not None:
        ref = fs.StandingWave(cfg.rho, cfg.tau, args.reference or 1, cfg.L)
        rows = fs.convergence_study(cfg, args.convergence, ref)
        print(f"{'dx':>12} {'Linf':>12} {'order':>8}")
        for row in rows:
            order = "n/a" if row.order is None else f"{row.order:.3f}"
            print(f"{row.dx:12.6g} {row.linf:12.4e} {order:>8}")
    print(f"wrote {out / 'section.csv'} and {out / 'diagnostics.csv'}")
    return status


COMMANDS = {"kvf": cmd_kvf, "check": cmd_check, "bridge": cmd_bridge, "simulate": cmd_simulate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.probes < 1:
        parser.error("--probes must be positive")
    try:
        return COMMANDS[args.command](args)
    except (SchemaError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KFieldsError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Commands: validate, certify, solve-elliptic, solve-parabolic, verify,
exhaust.  All referenced files are loaded and validated before any
computation starts; reports are written atomically.  Exit codes: 0
success, 1 solver non-convergence, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import exhaustion, operators, reports, solvers, superpotential
from .calculus import lp_norm_nodes
from .graphs import GraphFormatError, load_graph, node_function, node_table


class InputError(ValueError):
    """Bad command-line input or malformed input file."""


def _load_json(path: str):
    if not os.path.exists(path):
        raise InputError(f"file not found: {path}")
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc


def _load_superpotential(doc, base_dir: str):
    """Inline object or a path relative to the problem file."""
    if isinstance(doc, str):
        doc = _load_json(os.path.join(base_dir, doc))
    try:
        return superpotential.from_document(doc)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


_PROBLEM_KEYS = {"graph", "superpotential", "f", "parabolic", "solver"}
_PARABOLIC_KEYS = {"T", "steps", "phi0", "f_table", "sp_schedule"}
_SOLVER_KEYS = {"tol", "h_schedule", "strategy", "max_inner"}


def load_problem(path: str):
    """Parse a problem file; returns (graph, sp, f, parabolic dict or None,
    SolverOptions)."""
    doc = _load_json(path)
    base = os.path.dirname(os.path.abspath(path))
    if not isinstance(doc, dict):
        raise InputError(f"{path}: problem document must be an object")
    extra = set(doc) - _PROBLEM_KEYS
    if extra:
        raise InputError(f"{path}: unknown keys {sorted(extra)}")
    for key in ("graph", "superpotential", "f"):
        if key not in doc:
            raise InputError(f"{path}: missing required key {key!r}")
    try:
        g = load_graph(os.path.join(base, doc["graph"]))
    except GraphFormatError as exc:
        raise InputError(f"{doc['graph']}: {exc}") from exc
    sp = _load_superpotential(doc["superpotential"], base)
    try:
        f = node_function(g, doc["f"])
    except GraphFormatError as exc:
        raise InputError(f"{path}: load f: {exc}") from exc

    opts_kwargs = {}
    solver = doc.get("solver", {})
    if not isinstance(solver, dict) or set(solver) - _SOLVER_KEYS:
        raise InputError(f"{path}: malformed 'solver' section")
    if "tol" in solver:
        opts_kwargs["tol"] = float(solver["tol"])
    if "h_schedule" in solver:
        opts_kwargs["h_schedule"] = tuple(float(h)
                                          for h in solver["h_schedule"])
    if "strategy" in solver:
        opts_kwargs["strategy"] = str(solver["strategy"])
    if "max_inner" in solver:
        opts_kwargs["max_inner"] = int(solver["max_inner"])
    try:
        opts = solvers.SolverOptions(**opts_kwargs)
    except ValueError as exc:
        raise InputError(f"{path}: solver options: {exc}") from exc

    parabolic = doc.get("parabolic")
    if parabolic is not None:
        if not isinstance(parabolic, dict) or set(parabolic) - _PARABOLIC_KEYS:
            raise InputError(f"{path}: malformed 'parabolic' section")
        for key in ("T", "steps", "phi0"):
            if key not in parabolic:
                raise InputError(f"{path}: parabolic section missing {key!r}")
    return g, sp, f, parabolic, opts, base


def _build_parabolic(g, sp, f, parabolic, base):
    steps = int(parabolic["steps"])
    phi0 = node_function(g, parabolic["phi0"])
    if "f_table" in parabolic:
        table = parabolic["f_table"]
        if len(table) != steps:
            raise InputError(f"f_table length {len(table)} != steps {steps}")
        f = np.stack([node_function(g, row) for row in table])
    if "sp_schedule" in parabolic:
        try:
            sp = superpotential.schedule_from_document(parabolic["sp_schedule"])
        except ValueError as exc:
            raise InputError(str(exc)) from exc
    return solvers.ParabolicProblem(graph=g, sp=sp, f=f, phi0=phi0,
                                    T=float(parabolic["T"]), steps=steps)


def _emit(doc: dict, args, title: str) -> None:
    if args.format == "machine":
        text = reports.render_json(doc) + "\n"
    else:
        text = reports.render_human(doc, title)
    if args.out:
        reports.write_atomic(args.out, text)
    else:
        sys.stdout.write(text)


def _apply_overrides(opts, args):
    import dataclasses
    if getattr(args, "tol", None) is not None:
        opts = dataclasses.replace(opts, tol=args.tol)
    return opts


def cmd_validate(args) -> int:
    g = load_graph(args.graph)
    _emit(reports.validate_report_dict(g), args, "graph validation")
    return 0


def cmd_certify(args) -> int:
    g, sp, f, _, opts, _ = load_problem(args.problem)
    certs = solvers.certify(solvers.EllipticProblem(g, sp, f))
    doc = {
        "schema_version": reports.SCHEMA_VERSION,
        "certificates": [reports.certificate_dict(c) for c in certs],
        "constants": reports.constants_dict(operators.constants(g)),
    }
    _emit(doc, args, "certificates")
    return 0


def cmd_solve_elliptic(args) -> int:
    g, sp, f, _, opts, _ = load_problem(args.problem)
    opts = _apply_overrides(opts, args)
    rep = solvers.solve_elliptic(solvers.EllipticProblem(g, sp, f), opts)
    _emit(reports.solve_report_dict(g, rep), args, "elliptic solve")
    return 0 if rep.converged else 1


def cmd_solve_parabolic(args) -> int:
    g, sp, f, parabolic, opts, base = load_problem(args.problem)
    if parabolic is None:
        raise InputError(f"{args.problem}: missing 'parabolic' section")
    opts = _apply_overrides(opts, args)
    problem = _build_parabolic(g, sp, f, parabolic, base)
    res = solvers.solve_parabolic(problem, opts)
    _emit(reports.parabolic_report_dict(g, res), args, "parabolic solve")
    return 0 if res.converged else 1


def cmd_verify(args) -> int:
    g, sp, f, _, opts, _ = load_problem(args.problem)
    opts = _apply_overrides(opts, args)
    phi_doc = _load_json(args.phi)
    try:
        phi = node_function(g, phi_doc)
    except GraphFormatError as exc:
        raise InputError(f"{args.phi}: {exc}") from exc
    resid = solvers.verify_inclusion(g, sp, phi, f)
    doc = {
        "schema_version": reports.SCHEMA_VERSION,
        "residual_norm": lp_norm_nodes(g, resid, 2.0),
        "residual": node_table(g, resid),
    }
    _emit(doc, args, "inclusion verification")
    return 0


def cmd_exhaust(args) -> int:
    doc = _load_json(args.generator)
    try:
        gen, f_law = exhaustion.generator_from_document(doc)
    except ValueError as exc:
        raise InputError(f"{args.generator}: {exc}") from exc
    if "superpotential" not in doc:
        raise InputError(f"{args.generator}: missing 'superpotential'")
    sp = _load_superpotential(doc["superpotential"],
                              os.path.dirname(os.path.abspath(args.generator)))
    try:
        radii = [float(r) for r in args.radii.split(",")]
    except ValueError as exc:
        raise InputError(f"bad --radii list: {args.radii!r}") from exc
    rep = exhaustion.exhaust(gen, sp, f_law, radii, args.eps)
    final_g = rep.graphs[-1]
    out = {
        "schema_version": reports.SCHEMA_VERSION,
        "converged": rep.converged,
        "radii": rep.radii,
        "level_sizes": [g.num_nodes for g in rep.graphs],
        "increments": rep.increments,
        "tail_masses": rep.tail_masses,
        "final_solution": node_table(final_g, rep.solutions[-1].phi),
        "final_residual_norm": rep.solutions[-1].residual_norm,
    }
    _emit(out, args, "exhaustion study")
    return 0 if all(r.converged for r in rep.solutions) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphhvi",
        description="Hemivariational inequality solver on weighted graphs")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, problem=True):
        p.add_argument("--out", default=None, help="report output path "
                       "(default: stdout)")
        p.add_argument("--format", choices=("human", "machine"),
                       default="machine")

    p = sub.add_parser("validate", help="validate a graph file")
    p.add_argument("--graph", required=True)
    common(p)
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("certify", help="existence/uniqueness certificates")
    p.add_argument("--problem", required=True)
    common(p)
    p.set_defaults(fn=cmd_certify)

    p = sub.add_parser("solve-elliptic", help="solve the elliptic inclusion")
    p.add_argument("--problem", required=True)
    p.add_argument("--tol", type=float, default=None)
    common(p)
    p.set_defaults(fn=cmd_solve_elliptic)

    p = sub.add_parser("solve-parabolic", help="implicit-Euler time stepping")
    p.add_argument("--problem", required=True)
    p.add_argument("--tol", type=float, default=None)
    common(p)
    p.set_defaults(fn=cmd_solve_parabolic)

    p = sub.add_parser("verify", help="check a candidate solution")
    p.add_argument("--problem", required=True)
    p.add_argument("--phi", required=True, help="JSON map node -> value")
    common(p)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("exhaust", help="solve on growing ball truncations")
    p.add_argument("--generator", required=True)
    p.add_argument("--radii", default="2,4,8,16,32")
    p.add_argument("--eps", type=float, default=1e-6)
    common(p)
    p.set_defaults(fn=cmd_exhaust)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (InputError, GraphFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

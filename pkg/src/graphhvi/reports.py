"""Report documents: deterministic machine (JSON) and human rendering.

Machine reports are byte-deterministic for identical inputs: canonical
node order, insertion-ordered keys, floats with 17 significant digits
(lossless round trip).  Non-finite floats are rendered as strings.
"""

from __future__ import annotations

import json
import os
import math
import tempfile

from .calculus import SobolevNormReport
from .graphs import WeightedGraph, degrees, node_table, volume
from .operators import OperatorConstants
from .solvers import Certificate, ParabolicResult, SolveReport

SCHEMA_VERSION = 1


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def render_json(obj, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = ",\n".join(f'{pad}  {json.dumps(str(k))}: '
                           f'{render_json(v, indent + 1)}'
                           for k, v in obj.items())
        return "{\n" + items + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = ",\n".join(f"{pad}  {render_json(v, indent + 1)}" for v in obj)
        return "[\n" + items + "\n" + pad + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, int):
        return str(obj)
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def norms_dict(n: SobolevNormReport) -> dict:
    return {"l2_node": n.l2_node, "l2_edge": n.l2_edge,
            "w_sum": n.w_sum, "w_hilbert": n.w_hilbert}


def constants_dict(c: OperatorConstants) -> dict:
    return {"m_gamma_lo": c.m_gamma_lo, "m_gamma_hi": c.m_gamma_hi,
            "m_kappa_lo": c.m_kappa_lo, "m_kappa_hi": c.m_kappa_hi,
            "m_coercive": c.m_coercive, "m_bounded": c.m_bounded}


def certificate_dict(c: Certificate) -> dict:
    return {"kind": c.kind, "satisfied": c.satisfied,
            "lhs": c.lhs, "rhs": c.rhs, "note": c.note}


def solve_report_dict(g: WeightedGraph, rep: SolveReport) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "converged": rep.converged,
        "residual_norm": rep.residual_norm,
        "solution": node_table(g, rep.phi),
        "xi": node_table(g, rep.xi),
        "residual": node_table(g, rep.inclusion_residual),
        "norms": norms_dict(rep.norms),
        "constants": constants_dict(rep.constants),
        "certificates": [certificate_dict(c) for c in rep.certificates],
        "trace": [dict(t) for t in rep.iterations],
    }


def parabolic_report_dict(g: WeightedGraph, res: ParabolicResult) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "converged": res.converged,
        "times": [float(t) for t in res.times],
        "states": [node_table(g, row) for row in res.states],
        "step_residual_norms": [r.residual_norm for r in res.reports],
        "constants": constants_dict(res.reports[-1].constants)
        if res.reports else {},
    }


def validate_report_dict(g: WeightedGraph) -> dict:
    from .operators import constants
    degs = degrees(g)
    return {
        "schema_version": SCHEMA_VERSION,
        "num_nodes": g.num_nodes,
        "num_directed_edges": g.num_edges,
        "mu_total": g.mu_total,
        "volume_rho": volume(g),
        "degrees": {v: {"deg_out": d.deg_out, "deg_in": d.deg_in,
                        "deg": d.deg} for v, d in degs.items()},
        "constants": constants_dict(constants(g)),
    }


def render_human(doc: dict, title: str) -> str:
    lines = [title, "=" * len(title)]

    def walk(obj, prefix=""):
        if isinstance(obj, dict):
            for k, v in obj.items():
                if isinstance(v, (dict, list, tuple)):
                    lines.append(f"{prefix}{k}:")
                    walk(v, prefix + "  ")
                else:
                    lines.append(f"{prefix}{k}: {v}")
        elif isinstance(obj, (list, tuple)):
            for i, v in enumerate(obj):
                if isinstance(v, (dict, list, tuple)):
                    lines.append(f"{prefix}[{i}]")
                    walk(v, prefix + "  ")
                else:
                    lines.append(f"{prefix}- {v}")

    walk(doc)
    return "\n".join(lines) + "\n"


def write_atomic(path: str, text: str) -> None:
    """Write via a temp file in the same directory and rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".graphhvi-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise

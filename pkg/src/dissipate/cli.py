"""Command line front end.

Subcommands::

    dissipate check <spec.json> --p 3 [--strict]   pointwise algebraic condition
    dissipate interval <spec.json>                 admissible exponent interval
    dissipate constant <spec.json> --p 4           constant coefficient verdict
    dissipate sufficiency <spec.json> --p 2        quadratic form sufficiency
    dissipate falsify <spec.json> --p 2 --budget 5000 --seed 7
    dissipate simulate <spec.json> --p 2 --dt 1e-4 --t-end 0.05 [--trace-csv out.csv]
    dissipate examples --id 1|2|3                  bundled worked operators

``--format json|text`` is accepted both before and after the subcommand.
Exit codes: 0 analysis completed (whatever the verdict), 1 verdict "not
dissipative" under ``check --strict``, 2 input error.  Reports echo the
normalized inputs and a content digest of the operator document, never
file paths, so output is byte-stable across checkouts.  The environment
variable DISSIPATE_WORKERS caps falsifier concurrency (the result is
identical for any worker count; only wall time changes).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from importlib import resources

import numpy as np

from .coeffspec import (
    EvalDomainError,
    ExprError,
    SpecError,
    bump,
    sample_operator,
    spec_from_dict,
)
from .formcheck import _FAMILY_NAMES, falsify
from .grids import Grid, GridFunction
from .pointwise import (
    LambdaResult,
    NonnegativityError,
    check_p_condition,
    constant_coeff_verdict,
    decompose,
    jacobi_eigh,
    lambda_of,
    p_interval,
    q_sufficiency,
)
from .report import Report, render_report, spec_digest
from .semigroup import discretize, estimate_omega, evolve
from .version import __version__

__all__ = ["main"]

_PRESET_IDS = {1: "example1", 2: "example2", 3: "example3"}


def _load_doc_from_file(path):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as err:
        raise SpecError("$", f"cannot read spec: {err}") from err
    try:
        return json.loads(raw)
    except json.JSONDecodeError as err:
        raise SpecError("$", f"not valid JSON: {err}") from err


def load_preset(name):
    """Parsed document of a bundled operator JSON (presets/<name>.json)."""
    ref = resources.files("dissipate") / "presets" / f"{name}.json"
    return json.loads(ref.read_text(encoding="ascii"))


def _load(path):
    doc = _load_doc_from_file(path)
    return spec_from_dict(doc), spec_digest(doc)


def _field_samples(spec):
    """Coefficient samples for field verdicts: every interior grid node,
    or the box center when all coefficients are constant."""
    if spec.is_constant:
        pts = np.array([[0.5 * (lo + hi) for lo, hi in spec.domain]])
    else:
        pts = Grid.from_spec(spec).points()
    return sample_operator(spec, pts), pts


def _condition_everywhere(sam, p):
    """All-nodes pointwise condition; returns (holds, first_bad_index)."""
    for j in range(sam.A.shape[0]):
        if not check_p_condition(decompose(sam.A[j]), p):
            return False, j
    return True, None


def _im_symmetric(sam):
    im = sam.A.imag
    skew = np.abs(im - im.transpose(0, 2, 1)).max(initial=0.0)
    return skew <= 1e-14 * (1.0 + np.abs(im).max(initial=0.0))


def _qualifier(spec, sam):
    if _im_symmetric(sam) and not spec.has_lower_order_terms:
        return "necessary-and-sufficient"
    return "necessary-only"


def _violating_xi(d, p):
    """A direction on which the pointwise condition fails at exponent p."""
    s = 2.0 * math.sqrt(p - 1.0)
    t = p - 2.0
    best = None
    for sign in (1.0, -1.0):
        pencil = [
            [s * d.S_r[i][j] + sign * t * d.S_i[i][j] for j in range(d.n)]
            for i in range(d.n)
        ]
        vals, vecs = jacobi_eigh(pencil)
        if best is None or vals[0] < best[0]:
            xi = [vecs[i][0] for i in range(d.n)]
            best = (vals[0], xi)
    xi = best[1]
    lead = next((v for v in xi if v != 0.0), 1.0)
    if lead < 0.0:
        xi = [-v for v in xi]
    return xi


def _canonical_bump(grid, domain):
    vals = np.ones(grid.shape)
    for k, mesh in enumerate(grid.meshes()):
        lo, hi = domain[k]
        vals = vals * bump((2.0 * mesh - lo - hi) / (hi - lo))
    return GridFunction(grid, vals)


def _require_p(p):
    if not math.isfinite(p) or p <= 1.0:
        raise SpecError("--p", "exponent must be finite and > 1")
    return float(p)


# ----------------------------------------------------------------------
# subcommand handlers (each returns (Report, exit_code))


def _cmd_check(args):
    spec, digest = _load(args.spec)
    p = _require_p(args.p)
    sam, pts = _field_samples(spec)
    holds, bad = _condition_everywhere(sam, p)
    qualifier = _qualifier(spec, sam)
    if not holds:
        dissipative = False
    elif qualifier == "necessary-and-sufficient":
        dissipative = True
    else:
        dissipative = None
    witness = None
    if bad is not None:
        witness = {
            "node": [float(v) for v in pts[bad]],
            "xi": _violating_xi(decompose(sam.A[bad]), p),
        }
    report = Report(
        command="check",
        spec=digest,
        inputs={"p": p, "strict": bool(args.strict)},
        verdict={
            "decision": holds,
            "criterion": "eq24_pointwise",
            "qualifier": qualifier,
            "dissipative": dissipative,
        },
        numbers={"nodes": int(sam.A.shape[0])},
        witness=witness,
    )
    return report, (1 if args.strict and not holds else 0)


def _p_interval_from(lam, witness_xi=None):
    return p_interval(LambdaResult(lam=lam, witness_xi=witness_xi))


def _cmd_interval(args):
    spec, digest = _load(args.spec)
    sam, pts = _field_samples(spec)
    lam = math.inf
    witness_xi = None
    where = None
    for j in range(sam.A.shape[0]):
        res = lambda_of(decompose(sam.A[j]))
        if res.lam < lam:
            lam, witness_xi, where = res.lam, res.witness_xi, j
    itv = _p_interval_from(lam, witness_xi)
    witness = None
    if witness_xi is not None:
        witness = {"xi": list(witness_xi)}
        if where is not None and sam.A.shape[0] > 1:
            witness["node"] = [float(v) for v in pts[where]]
    report = Report(
        command="interval",
        spec=digest,
        inputs={},
        verdict={
            "decision": lam > 0.0,
            "criterion": "eq24_pointwise",
            "qualifier": _qualifier(spec, sam),
        },
        numbers={
            "lambda": lam,
            "p_min": itv.p_min,
            "p_max": itv.p_max,
            "full": itv.is_full,
            "nodes": int(sam.A.shape[0]),
        },
        witness=witness,
    )
    return report, 0


def _cmd_constant(args):
    spec, digest = _load(args.spec)
    p = _require_p(args.p)
    if not spec.is_constant:
        raise SpecError("$", "constant verdict needs constant coefficients")
    sam, _ = _field_samples(spec)
    b_eff = sam.b[0] + sam.c[0]  # constant c acts as a drift: div(c u) = c . grad u
    v = constant_coeff_verdict(sam.A[0], b_eff, sam.a[0], p)
    notes = ()
    if np.any(sam.c[0] != 0.0):
        notes = ("constant c folded into the drift term",)
    report = Report(
        command="constant",
        spec=digest,
        inputs={"p": p},
        verdict={
            "decision": v.ok,
            "criterion": "const_coeff",
            "reason": v.reason,
        },
        numbers={
            "margin": v.margin,
            "corollary_margin": v.corollary_margin,
            "residual": v.residual,
        },
        witness={"V": list(v.V)} if v.V is not None else None,
        notes=notes,
    )
    return report, 0


def _cmd_sufficiency(args):
    spec, digest = _load(args.spec)
    p = _require_p(args.p)
    sam, pts = _field_samples(spec)
    nodes = sam.A.shape[0]
    all_ok = True
    min_eig = math.inf
    max_res = 0.0
    min_val = math.inf
    witness = None
    for j in range(nodes):
        q = q_sufficiency(
            sam.A[j], sam.b[j], sam.c[j], sam.a[j],
            sam.div_b[j], sam.div_c[j], p, args.alpha, args.beta,
        )
        min_eig = min(min_eig, q.min_eig)
        max_res = max(max_res, q.linear_residual)
        if q.min_value is not None:
            min_val = min(min_val, q.min_value)
        if not q.ok and all_ok:
            all_ok = False
            witness = {"node": [float(v) for v in pts[j]]}
    report = Report(
        command="sufficiency",
        spec=digest,
        inputs={"p": p, "alpha": float(args.alpha), "beta": float(args.beta)},
        verdict={"decision": all_ok, "criterion": "q_sufficient"},
        numbers={
            "nodes": int(nodes),
            "min_eigenvalue": min_eig,
            "max_linear_residual": max_res,
            "min_value": None if min_val is math.inf else min_val,
        },
        witness=witness,
    )
    return report, 0


def _cmd_falsify(args):
    spec, digest = _load(args.spec)
    p = _require_p(args.p)
    res = falsify(spec, p, budget=args.budget, seed=args.seed)
    verdict = {
        "decision": False if res.found else None,
        "criterion": "falsified",
    }
    if not res.found:
        verdict["qualifier"] = "no-counterexample-found"
    witness = None
    if res.found:
        witness = {
            "family": res.family,
            "family_name": _FAMILY_NAMES[res.family],
            "start_index": res.start_index,
            "params": res.params,
        }
    report = Report(
        command="falsify",
        spec=digest,
        inputs={"p": p, "budget": int(args.budget), "seed": int(args.seed)},
        verdict=verdict,
        numbers={
            "value": res.value,
            "threshold": res.threshold,
            "evaluations": int(res.evaluations),
        },
        witness=witness,
    )
    return report, 0


def _cmd_simulate(args):
    spec, digest = _load(args.spec)
    p = _require_p(args.p)
    op = discretize(spec)
    u0 = _canonical_bump(op.grid, spec.domain)
    trace = evolve(op, u0, dt=args.dt, t_end=args.t_end, p=p)
    if args.trace_csv:
        trace.write_csv(args.trace_csv)
    noninc = trace.nonincreasing(per_step_tol=1e-10)
    report = Report(
        command="simulate",
        spec=digest,
        inputs={
            "p": p,
            "dt": float(args.dt),
            "t_end": float(args.t_end),
            "trace_csv": bool(args.trace_csv),
        },
        verdict={"decision": noninc, "criterion": "simulated"},
        numbers={
            "steps": int(len(trace.norms) - 1),
            "norm_initial": float(trace.norms[0]),
            "norm_final": float(trace.norms[-1]),
            "fitted_rate": trace.fitted_rate(),
            "omega_estimate": estimate_omega(trace),
        },
    )
    return report, 0


def _cmd_examples(args):
    name = _PRESET_IDS[args.id]
    doc = load_preset(name)
    spec = spec_from_dict(doc)
    digest = spec_digest(doc)
    if args.id == 1:
        return _example_skew_field(spec, digest), 0
    if args.id == 2:
        return _example_quasi_only(spec, digest), 0
    return _example_constant_endpoint(spec, digest), 0


def _example_skew_field(spec, digest):
    """Dissipative for every p, yet the quadratic sufficiency route and
    the falsifier both (correctly) stay quiet about the other side."""
    sam, _ = _field_samples(spec)
    numbers = {}
    all_hold = True
    for p in (1.5, 2.0, 4.0):
        holds, _ = _condition_everywhere(sam, p)
        numbers[f"condition_p{p:g}"] = holds
        all_hold = all_hold and holds
    nodes = sam.A.shape[0]
    suff_ok = True
    for j in range(nodes):
        q = q_sufficiency(
            sam.A[j], sam.b[j], sam.c[j], sam.a[j],
            sam.div_b[j], sam.div_c[j], 2.0,
        )
        if not q.ok:
            suff_ok = False
            break
    fr = falsify(spec, 2.0, budget=600, seed=0)
    numbers.update(
        {
            "sufficiency_p2": suff_ok,
            "falsify_found": fr.found,
            "falsify_value": fr.value,
            "falsify_evaluations": int(fr.evaluations),
        }
    )
    return Report(
        command="examples",
        spec=digest,
        inputs={"id": 1, "p": [1.5, 2.0, 4.0]},
        verdict={
            "decision": all_hold,
            "criterion": "eq24_pointwise",
            "qualifier": _qualifier(spec, sam),
        },
        numbers=numbers,
        notes=(
            "pointwise condition holds at every node for each tested p",
            "quadratic sufficiency fails at p = 2 although the operator dissipates",
        ),
    )


def _example_quasi_only(spec, digest):
    """Pointwise condition satisfied, yet a wave probe drives the form
    negative: dissipative only up to a finite positive growth bound."""
    sam, _ = _field_samples(spec)
    holds, _ = _condition_everywhere(sam, 2.0)
    fr = falsify(spec, 2.0, budget=1500, seed=0)
    numbers = {
        "condition_p2": holds,
        "falsify_found": fr.found,
        "falsify_value": fr.value,
        "falsify_evaluations": int(fr.evaluations),
    }
    witness = None
    omega = None
    noninc = None
    if fr.found:
        op = discretize(spec)
        trace = evolve(op, fr.witness, dt=1e-4, t_end=0.02, p=2.0)
        omega = estimate_omega(trace)
        noninc = trace.nonincreasing(per_step_tol=1e-10)
        numbers.update(
            {
                "omega_estimate": omega,
                "nonincreasing": noninc,
                "norm_initial": float(trace.norms[0]),
                "norm_final": float(trace.norms[-1]),
            }
        )
        witness = {
            "family": fr.family,
            "family_name": _FAMILY_NAMES[fr.family],
            "start_index": fr.start_index,
            "params": fr.params,
        }
    return Report(
        command="examples",
        spec=digest,
        inputs={"id": 2, "p": 2.0},
        verdict={
            "decision": False if fr.found else None,
            "criterion": "falsified",
            "growth_criterion": "w0_quasi",
            "qualifier": _qualifier(spec, sam),
        },
        numbers=numbers,
        witness=witness,
        notes=(
            "pointwise condition is necessary only: it holds although the form goes negative",
            "the evolved counterexample grows at a finite positive rate",
        ),
    )


def _example_constant_endpoint(spec, digest):
    """Constant coefficients sitting exactly on the admissibility edge at p = 4."""
    p = 4.0
    sam, _ = _field_samples(spec)
    b_eff = sam.b[0] + sam.c[0]
    v = constant_coeff_verdict(sam.A[0], b_eff, sam.a[0], p)
    res = lambda_of(decompose(sam.A[0]))
    itv = _p_interval_from(res.lam, res.witness_xi)
    return Report(
        command="examples",
        spec=digest,
        inputs={"id": 3, "p": p},
        verdict={
            "decision": v.ok,
            "criterion": "const_coeff",
            "reason": v.reason,
        },
        numbers={
            "margin": v.margin,
            "corollary_margin": v.corollary_margin,
            "residual": v.residual,
            "lambda": res.lam,
            "p_min": itv.p_min,
            "p_max": itv.p_max,
        },
        witness={"V": list(v.V)} if v.V is not None else None,
        notes=("both verdict clauses sit at exact equality for p = 4",),
    )


# ----------------------------------------------------------------------
# parser


def _build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--format", choices=("json", "text"), default=None, dest="format_opt",
        help="report rendering (default text)",
    )

    parser = argparse.ArgumentParser(
        prog="dissipate",
        description="Dissipativity analysis of second order operators with complex coefficients.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--format", choices=("json", "text"), default=None, dest="format_root",
        help="report rendering (default text)",
    )
    subs = parser.add_subparsers(dest="cmd")

    sub = subs.add_parser("check", parents=[common], help="pointwise algebraic condition at one exponent")
    sub.add_argument("spec", help="operator JSON document")
    sub.add_argument("--p", type=float, required=True, help="Lebesgue exponent")
    sub.add_argument("--strict", action="store_true", help="exit 1 when the condition fails")

    sub = subs.add_parser("interval", parents=[common], help="admissible exponent interval")
    sub.add_argument("spec")

    sub = subs.add_parser("constant", parents=[common], help="constant coefficient verdict with drift and zero order terms")
    sub.add_argument("spec")
    sub.add_argument("--p", type=float, required=True)

    sub = subs.add_parser("sufficiency", parents=[common], help="quadratic form sufficiency with splitting weights")
    sub.add_argument("spec")
    sub.add_argument("--p", type=float, required=True)
    sub.add_argument("--alpha", type=float, default=0.0)
    sub.add_argument("--beta", type=float, default=0.0)

    sub = subs.add_parser("falsify", parents=[common], help="search for a test function violating the form")
    sub.add_argument("spec")
    sub.add_argument("--p", type=float, required=True)
    sub.add_argument("--budget", type=int, default=2000, help="evaluation budget")
    sub.add_argument("--seed", type=int, default=0)

    sub = subs.add_parser("simulate", parents=[common], help="implicit Euler evolution of a bump, tracking the L^p norm")
    sub.add_argument("spec")
    sub.add_argument("--p", type=float, required=True)
    sub.add_argument("--dt", type=float, required=True)
    sub.add_argument("--t-end", type=float, required=True)
    sub.add_argument("--trace-csv", default=None, help="write the norm trace as CSV")

    sub = subs.add_parser("examples", parents=[common], help="bundled worked operators")
    sub.add_argument("--id", type=int, choices=(1, 2, 3), required=True)

    return parser


_DISPATCH = {
    "check": _cmd_check,
    "interval": _cmd_interval,
    "constant": _cmd_constant,
    "sufficiency": _cmd_sufficiency,
    "falsify": _cmd_falsify,
    "simulate": _cmd_simulate,
    "examples": _cmd_examples,
}


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.cmd is None:
        parser.print_help(sys.stderr)
        return 2
    try:
        report, code = _DISPATCH[args.cmd](args)
    except (
        SpecError,
        ExprError,
        EvalDomainError,
        NonnegativityError,
        OverflowError,
        RuntimeError,
        ValueError,
        OSError,
    ) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    fmt = getattr(args, "format_opt", None) or args.format_root or "text"
    sys.stdout.write(render_report(report, fmt))
    return code


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Exit codes: 0 success, 1 reproduction failure, 2 unreadable or malformed
input (and usage errors), 3 dimension mismatch, 4 numerical failure,
5 a family with more controls than target dimensions.
"""

from __future__ import annotations

import argparse
import sys
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from .capacity import capacity_dual, capacity_primal
from .documents import (
    DocumentError,
    OperatorDocument,
    ResultDocument,
    load_family,
)
from .errors import DimensionMismatch, EigenFailure, EntcapError, OptimizerFailure
from .gco import (
    FamilyDimensionError,
    builtin_families,
    capacity_dual_abelian,
    family_rank,
    gco_build,
    max_entanglement_witness,
)
from .metrics import PureProductStates, d_eigenphase, d_restricted
from .optimize import OptimizerOptions

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_DIMS, EXIT_NUMERIC, EXIT_FAMILY = 0, 1, 2, 3, 4, 5


def _version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "0+unknown"


def _fmt(v) -> str:
    return f"{v:.5g}"


class _Usage(Exception):
    pass


def _opts(args, default_restarts: int) -> OptimizerOptions:
    return OptimizerOptions(seed=args.seed, restarts=args.restarts or default_restarts)


def _dims(args, doc: OperatorDocument | None = None, required: bool = True):
    dims = tuple(args.dims) if args.dims else None
    if doc is not None and doc.dims is not None:
        if dims is not None and dims != doc.dims:
            raise DimensionMismatch(f"--dims {dims} disagree with file dims {doc.dims}")
        dims = dims or doc.dims
    if dims is not None and doc is not None and dims[0] * dims[1] != doc.matrix.shape[0]:
        raise DimensionMismatch(f"dims {dims} do not factor operator dimension "
                                f"{doc.matrix.shape[0]}")
    if dims is None and required:
        raise _Usage("--dims m n is required")
    return dims


# --------------------------------------------------------------------------
# commands


def cmd_metric(args):
    a, b = OperatorDocument.load(args.a), OperatorDocument.load(args.b)
    if a.matrix.shape != b.matrix.shape:
        raise DimensionMismatch(f"operators of shape {a.matrix.shape} and {b.matrix.shape}")
    dims = _dims(args, a, required=False)
    if b.dims is not None and dims is not None and b.dims != dims:
        raise DimensionMismatch(f"operator dims {dims} and {b.dims} differ")
    values = {"d_eigenphase": d_eigenphase(a.matrix, b.matrix)}
    lines = [f"d_eigenphase = {_fmt(values['d_eigenphase'])}"]
    diag = {}
    if dims is not None:
        r = d_restricted(a.matrix, b.matrix, PureProductStates(*dims), _opts(args, 32))
        values["d_pi"] = r.value
        values["d_pi_witness"] = np.asarray(r.witness)
        diag["evaluations"] = r.evaluations
        lines.append(f"d_pi         = {_fmt(r.value)}")
    label = f"{a.label or args.a} vs {b.label or args.b}"
    return values, None, diag, label, lines


def cmd_capacity(args):
    doc = OperatorDocument.load(args.operator)
    m, n = _dims(args, doc)
    want_dual = args.mode in ("dual", "both")
    want_primal = args.mode in ("primal", "both")
    values, diag, lines = {}, {}, []
    status = None
    dual = None
    if want_dual or want_primal:
        dual = capacity_dual(doc.matrix, m, n, _opts(args, 32))
    if want_dual:
        values["C_E"] = dual.value
        values["s_mu"] = dual.s_mu
        values["C_E_witness"] = np.asarray(dual.witness_state)
        diag["dual"] = dual.diagnostics
        status = dual.bound_status
        lines.append(f"C_E = {_fmt(dual.value)}  (s_mu = {_fmt(dual.s_mu)})")
    if want_primal:
        c = capacity_primal(doc.matrix, m, n, _opts(args, 16),
                            include_swap=args.include_swap, dual=dual)
        lu = c.witness_local_unitary
        values["C"] = c.value
        values["C_witness_state"] = np.asarray(c.witness_state)
        values["C_witness_local_unitary"] = {"v1": lu.v1, "v2": lu.v2, "swap": lu.swap}
        values["certified_interval"] = list(c.diagnostics["certified_interval"])
        diag["primal"] = c.diagnostics
        status = c.bound_status
        lo, hi = c.diagnostics["certified_interval"]
        lines.append(f"C   = {_fmt(c.value)}  (certified interval [{_fmt(lo)}, {_fmt(hi)}], "
                     f"swap={lu.swap})")
    if args.mode == "both":
        values["gap"] = values["C"] - values["C_E"]
        values["violation"] = values["gap"] < -5e-3
        lines.append(f"gap = {_fmt(values['gap'])}")
    lines.append(f"bound status: {status.value}")
    return values, status, diag, doc.label or args.operator, lines


def _builtin(spec: str):
    name, _, arg = spec.partition(":")
    cat = builtin_families()
    if name not in cat:
        raise _Usage(f"unknown builtin {name!r}; choose from {', '.join(cat.names())}")
    ctor = cat[name]
    if name == "controlled_W":
        raise _Usage("controlled_W needs a matrix; describe it in a family file")
    if name == "qft_powers":
        return ctor(int(arg or 2))
    if name == "controlled_phase":
        return ctor(float(arg or 1.0))
    if name == "trivial":
        return ctor(int(arg or 2))
    if arg:
        raise _Usage(f"builtin {name!r} takes no parameter")
    return ctor()


def cmd_gco(args):
    if args.builtin:
        try:
            fam = _builtin(args.builtin)
        except ValueError as exc:
            raise _Usage(f"bad builtin parameter: {exc}") from None
        label = args.builtin
    else:
        fam = load_family(args.family)
        label = fam.name or args.family
    g = gco_build(fam)
    m, n = fam.dims
    rank = family_rank(fam, seed=args.seed)
    values = {"m": m, "n": n, "abelian": g.abelian, "family_rank": rank}
    lines = [f"dims {m} x {n}, {'abelian' if g.abelian else 'nonabelian'}, family rank {rank}"]
    ce = capacity_dual(g.unitary, m, n, _opts(args, 32))
    values["C_E"] = ce.value
    diag = {"generic": ce.diagnostics}
    lines.append(f"C_E (generic) = {_fmt(ce.value)}")
    if g.abelian:
        ab = capacity_dual_abelian(g.theta, _opts(args, 32), fam.control_basis)
        values["theta_rank"] = g.theta.rank
        values["theta_phases"] = g.theta.phases
        values["C_E_abelian"] = ab.value
        diag["abelian"] = ab.diagnostics
        lines.append(f"Theta rank {g.theta.rank}, C_E (abelian path) = {_fmt(ab.value)}")
    beta = max_entanglement_witness(fam, OptimizerOptions(seed=args.seed,
                                                          restarts=args.restarts or 64))
    values["witness_beta"] = beta
    if beta is None:
        lines.append("no maximal-entanglement witness found")
    else:
        lines.append("witness beta = [" + ", ".join(
            f"{_fmt(z.real)}{z.imag:+.5g}j" for z in beta) + "]")
    if args.emit_operator:
        OperatorDocument(g.unitary, (m, n), label).dump(args.emit_operator)
        lines.append(f"operator written to {args.emit_operator}")
    return values, ce.bound_status, diag, label, lines


def cmd_reproduce(args):
    from .reproduce import format_table, run_suite

    rows = run_suite(seed=args.seed, quick=args.quick)
    values = {"rows": [r.as_dict() for r in rows],
              "all_passed": all(r.passed for r in rows)}
    lines = [format_table(rows)]
    failed = sum(not r.passed for r in rows)
    lines.append(f"{len(rows) - failed} passed, {failed} failed")
    return values, None, {"quick": args.quick}, "reproduce", lines


# --------------------------------------------------------------------------
# parser


def _add_common(p, suppress: bool):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--seed", type=int, default=d(0), help="base seed (default 0)")
    p.add_argument("--json", action="store_true", default=d(False),
                   help="print the result document as JSON")
    p.add_argument("--restarts", type=int, default=d(None), help="override restart counts")
    p.add_argument("--out", default=d(None), help="also write the result document here")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _Usage(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="entcap", description="Entangling capacities of bipartite unitaries.")
    _add_common(p, suppress=False)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def dims(q, required=False):
        q.add_argument("--dims", nargs=2, type=int, metavar=("M", "N"), required=required,
                       help="factor dimensions of the bipartite space")

    q = sub.add_parser("metric", help="distances between two operators")
    _add_common(q, suppress=True)
    q.add_argument("--a", required=True, help="first operator file")
    q.add_argument("--b", required=True, help="second operator file")
    dims(q)
    q.set_defaults(func=cmd_metric)

    q = sub.add_parser("capacity", help="primal and dual entangling capacities")
    _add_common(q, suppress=True)
    q.add_argument("operator", help="operator file")
    dims(q)
    mode = q.add_mutually_exclusive_group()
    mode.add_argument("--dual", dest="mode", action="store_const", const="dual")
    mode.add_argument("--primal", dest="mode", action="store_const", const="primal")
    mode.add_argument("--both", dest="mode", action="store_const", const="both")
    q.add_argument("--include-swap", action=argparse.BooleanOptionalAction, default=None,
                   help="search swapped local unitaries too (default: when m == n)")
    q.set_defaults(func=cmd_capacity, mode="dual")

    q = sub.add_parser("gco", help="generalised control operators")
    _add_common(q, suppress=True)
    src = q.add_mutually_exclusive_group(required=True)
    src.add_argument("--builtin", help="catalogue name, e.g. cz or qft_powers:3")
    src.add_argument("--family", help="family description file")
    q.add_argument("--emit-operator", metavar="PATH", help="write the assembled operator")
    q.set_defaults(func=cmd_gco)

    q = sub.add_parser("reproduce", help="run the reproduction suite")
    _add_common(q, suppress=True)
    q.add_argument("--quick", action="store_true", help="reduced fuzz counts")
    q.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise _Usage("a command is required: metric, capacity, gco or reproduce")
        values, status, diag, label, lines = args.func(args)
    except _Usage as exc:
        print(f"entcap: usage error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except DocumentError as exc:
        print(f"entcap: invalid input: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except FamilyDimensionError as exc:
        print(f"entcap: {exc}", file=sys.stderr)
        return EXIT_FAMILY
    except DimensionMismatch as exc:
        print(f"entcap: dimension mismatch: {exc}", file=sys.stderr)
        return EXIT_DIMS
    except (EigenFailure, OptimizerFailure, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"entcap: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except EntcapError as exc:
        print(f"entcap: invalid input: {exc}", file=sys.stderr)
        return EXIT_PARSE
    doc = ResultDocument(command=["entcap"] + argv, label=label, values=values,
                         bound_status=status, diagnostics=diag, version=_version(),
                         seed=args.seed)
    text = doc.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text if args.json else "\n".join(lines))
    if args.command == "reproduce" and not values["all_passed"]:
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

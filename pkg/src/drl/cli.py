"""Command-line interface.

Subcommands: ``compile``, ``check``, ``refine``, ``sat``. Exit codes:
0 success, 1 usage or parse error, 2 unsatisfiable constraints, 3 numeric
failure during refinement. Log level comes from the ``DRL_LOG`` env var.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import analysis, compiler, data, lang, refiner
from .errors import (
    BudgetExceededError,
    DrlError,
    NumericFailureError,
    ParseError,
)

log = logging.getLogger("drl")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNSAT = 2
EXIT_NUMERIC = 3


def _add_common(p: argparse.ArgumentParser, *, needs_data: bool,
                constraints_required: bool = True) -> None:
    p.add_argument("--constraints", required=constraints_required,
                   metavar="FILE", help="constraint DSL file")
    if needs_data:
        p.add_argument("--data", required=True, metavar="FILE",
                       help="input CSV (header row mandatory)")
    else:
        p.add_argument("--data", metavar="FILE",
                       help="CSV whose header binds variable names")
    p.add_argument("--order", default="given",
                   help="given | random:SEED | corr | kde | file:PATH")
    p.add_argument("--real", metavar="FILE",
                   help="reference CSV for corr/kde orderings")
    p.add_argument("--epsilon", default="1/1000000",
                   help="strict-inequality slack (rational or decimal)")
    p.add_argument("--tau", type=float, default=refiner.DEFAULT_TAU,
                   help="runtime satisfaction tolerance")
    p.add_argument("--max-clauses", type=int, default=10_000)
    p.add_argument("--max-resolvents", type=int,
                   default=compiler.DEFAULT_MAX_RESOLVENTS)
    p.add_argument("--seed", type=int, default=0,
                   help="seed for --order random without an inline seed")


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="drl",
        description="Compile linear-arithmetic constraints and refine "
                    "numeric records to satisfy them.")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="compile constraints to an artifact")
    _add_common(p, needs_data=False)
    p.add_argument("--out", required=True, metavar="FILE",
                   help="compiled artifact (JSON)")

    p = sub.add_parser("check", help="measure constraint violations in a CSV")
    _add_common(p, needs_data=True)
    p.add_argument("--report", metavar="FILE", help="metrics report (JSON)")
    p.add_argument("--no-figures", action="store_true",
                   help="skip figure rendering next to the report")

    p = sub.add_parser("refine", help="project every CSV row onto the "
                                      "constraint region")
    _add_common(p, needs_data=True, constraints_required=False)
    p.add_argument("--compiled", metavar="FILE",
                   help="reuse a precompiled artifact instead of compiling")
    p.add_argument("--out", required=True, metavar="FILE", help="output CSV")
    p.add_argument("--provenance", metavar="FILE",
                   help="per-change provenance (JSON)")
    p.add_argument("--jacobian", metavar="FILE",
                   help="write per-row Jacobians (JSON)")
    p.add_argument("--report", metavar="FILE",
                   help="write post-refinement metrics (JSON)")
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--skip-errors", action="store_true",
                   help="keep going past numeric failures; failed rows "
                        "retain their input values")

    p = sub.add_parser("sat", help="report satisfiability of a constraint file")
    _add_common(p, needs_data=False)
    return top


def _load_inputs(args, require_data: bool):
    text = Path(args.constraints).read_text(encoding="utf-8")
    cfg = lang.NormalizationConfig(epsilon=Fraction(args.epsilon),
                                   max_clauses=args.max_clauses)
    dataset = None
    csv_binding = None
    if getattr(args, "data", None):
        dataset = data.read_csv(args.data)
        csv_binding = dataset.binding()
    elif require_data:
        raise DrlError("--data is required for this command")
    cset, binding = lang.load_constraints(text, cfg, csv_binding)
    return cset, binding, dataset, cfg


def _resolve_ordering(args, binding: lang.VariableBinding,
                      dataset: data.Dataset | None) -> analysis.VariableOrdering:
    spec = args.order
    D = binding.dimension
    if spec == "given":
        return analysis.ordering_given(D)
    if spec == "random" or spec.startswith("random:"):
        seed = int(spec.split(":", 1)[1]) if ":" in spec else args.seed
        return analysis.ordering_random(D, seed)
    if spec in ("corr", "kde"):
        if dataset is None or not args.real:
            raise DrlError(f"--order {spec} needs both --data and --real")
        real = data.read_csv(args.real)
        perm = dataset.column_permutation(binding.names)
        real_perm = real.column_permutation(binding.names)
        syn = dataset.values[:, perm]
        ref = real.values[:, real_perm]
        if spec == "corr":
            return analysis.ordering_corr(ref, syn)
        return analysis.ordering_kde(ref, syn)
    if spec.startswith("file:"):
        path = spec.split(":", 1)[1]
        names = [ln.strip() for ln in Path(path).read_text().splitlines()
                 if ln.strip()]
        missing = [n for n in names if binding.index(n) is None]
        if missing:
            raise DrlError(f"order file names unknown variables: {missing}")
        if sorted(names) != sorted(binding.names):
            raise DrlError("order file must list every variable exactly once")
        order = tuple(binding.index(n) for n in names)
        return analysis.VariableOrdering(order, "file", {"path": path})
    raise DrlError(f"unknown --order specification {spec!r}")


def _compile(args, cset, binding, ordering) -> compiler.CompiledLayer:
    layer = compiler.compile_chain(
        cset, ordering.order, binding.names, Fraction(args.epsilon),
        max_resolvents=args.max_resolvents)
    for st in layer.step_stats:
        log.info("eliminated %s: +%d -%d +-%d closure %d resolvents %d -> %d",
                 binding.names[st.variable], st.n_plus, st.n_minus, st.n_mixed,
                 st.n_plusplus, st.resolvents, st.result_size)
    return layer


def _print_step_table(layer: compiler.CompiledLayer) -> None:
    print(f"{'variable':<16}{'plus':>6}{'minus':>7}{'mixed':>7}"
          f"{'resolvents':>12}{'result':>8}")
    for st in layer.step_stats:
        print(f"{layer.names[st.variable]:<16}{st.n_plus:>6}{st.n_minus:>7}"
              f"{st.n_mixed:>7}{st.resolvents:>12}{st.result_size:>8}")
    print(f"verdict: {layer.verdict}")


def _cmd_compile(args) -> int:
    cset, binding, dataset, _ = _load_inputs(args, require_data=False)
    ordering = _resolve_ordering(args, binding, dataset)
    layer = _compile(args, cset, binding, ordering)
    Path(args.out).write_text(compiler.layer_to_json(layer), encoding="utf-8")
    _print_step_table(layer)
    if not layer.is_sat:
        print("unsat witness:", _render_clause(layer, layer.witness))
        return EXIT_UNSAT
    return EXIT_OK


def _cmd_sat(args) -> int:
    cset, binding, dataset, _ = _load_inputs(args, require_data=False)
    ordering = _resolve_ordering(args, binding, dataset)
    layer = _compile(args, cset, binding, ordering)
    print(layer.verdict)
    if not layer.is_sat:
        print("witness:", _render_clause(layer, layer.witness))
        return EXIT_UNSAT
    return EXIT_OK


def _render_clause(layer: compiler.CompiledLayer, witness) -> str:
    if witness is None:
        return "<none>"
    from .algebra import ConstraintSet
    from .lang import VariableBinding, roundtrip_print

    cs = ConstraintSet.of([witness], layer.dimension)
    return roundtrip_print(cs, VariableBinding(layer.names)).strip()


def _cmd_check(args) -> int:
    cset, binding, dataset, _ = _load_inputs(args, require_data=True)
    perm = dataset.column_permutation(binding.names)
    matrix = analysis.violation_matrix(cset, dataset.values[:, perm], args.tau)
    report = analysis.metrics_from_matrix(matrix)
    _print_report(report)
    if args.report:
        Path(args.report).write_text(report.to_json(), encoding="utf-8")
        if not args.no_figures:
            from .report import save_violation_figures

            for path in save_violation_figures(report, matrix, args.report):
                log.info("wrote %s", path)
    return EXIT_OK


def _print_report(report: analysis.MetricsReport) -> None:
    print(f"{'rows':>12}  {report.n_rows}")
    print(f"{'constraints':>12}  {report.n_constraints}")
    print(f"{'CVR':>12}  {report.cvr:.4f}%")
    print(f"{'sCVC':>12}  {report.scvc:.4f}%")
    print(f"{'CVC':>12}  {report.cvc:.4f}%")


def _cmd_refine(args) -> int:
    if not args.compiled and not args.constraints:
        raise DrlError("refine needs --constraints or --compiled")
    dataset = data.read_csv(args.data)
    if args.compiled:
        layer = compiler.layer_from_json(
            Path(args.compiled).read_text(encoding="utf-8"))
        cset = layer.constraint_set()
    else:
        text = Path(args.constraints).read_text(encoding="utf-8")
        cfg = lang.NormalizationConfig(epsilon=Fraction(args.epsilon),
                                       max_clauses=args.max_clauses)
        cset, binding = lang.load_constraints(text, cfg, dataset.binding())
        ordering = _resolve_ordering(args, binding, dataset)
        layer = _compile(args, cset, binding, ordering)
    if not layer.is_sat:
        print("unsat witness:", _render_clause(layer, layer.witness))
        return EXIT_UNSAT

    result = refiner.refine_dataset(
        layer, dataset, tau=args.tau, parallelism=args.parallelism,
        skip_errors=args.skip_errors, want_jacobian=bool(args.jacobian))

    perm = dataset.column_permutation(layer.names)
    out_values = dataset.values.copy()
    out_values[:, perm] = result.refined
    changed = np.zeros(dataset.values.shape, dtype=bool)
    snapped = ((result.actions == refiner.A_LEFT)
               | (result.actions == refiner.A_RIGHT))
    changed[:, perm] = snapped
    data.write_csv(args.out, dataset, out_values, changed)

    failed_rows = sorted({row for row, _ in result.failures})
    if args.provenance:
        _write_provenance(args.provenance, layer, result, failed_rows)
    if args.jacobian:
        doc = {"variables": list(layer.names),
               "jacobians": [j.tolist() for j in result.jacobians]}
        Path(args.jacobian).write_text(json.dumps(doc) + "\n", encoding="utf-8")

    # Self-check: refined rows must satisfy the original constraints.
    ok_rows = np.ones(dataset.n_rows, dtype=bool)
    ok_rows[failed_rows] = False
    matrix = analysis.violation_matrix(
        cset, out_values[np.ix_(ok_rows, np.array(perm, dtype=np.intp))],
        args.tau)
    report = analysis.metrics_from_matrix(matrix)
    if report.cvr != 0.0:
        raise DrlError(
            f"self-check failed: refined output has CVR {report.cvr}%")
    if args.report:
        Path(args.report).write_text(report.to_json(), encoding="utf-8")

    n_changed = int(np.count_nonzero(snapped.any(axis=1)))
    print(f"refined {dataset.n_rows} rows ({n_changed} changed, "
          f"{len(failed_rows)} failed); self-check CVR 0.0%")
    if failed_rows and not args.skip_errors:
        return EXIT_NUMERIC
    return EXIT_OK


def _write_provenance(path: str, layer: compiler.CompiledLayer,
                      result, failed_rows: list[int]) -> None:
    entries = []
    n, D = result.actions.shape
    for row in range(n):
        for var in range(D):
            code = result.actions[row, var]
            if code in (refiner.A_LEFT, refiner.A_RIGHT, refiner.A_FAILED):
                entries.append({
                    "row": row,
                    "var": layer.names[var],
                    "action": refiner.ACTIONS[code],
                    "source_constraint_index":
                        int(result.source_constraint[row, var]),
                    "source_disjunct_index":
                        int(result.source_disjunct[row, var]),
                })
    doc = {"changes": entries, "failed_rows": failed_rows}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


_COMMANDS = {
    "compile": _cmd_compile,
    "check": _cmd_check,
    "refine": _cmd_refine,
    "sat": _cmd_sat,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("DRL_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except NumericFailureError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except BudgetExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except DrlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

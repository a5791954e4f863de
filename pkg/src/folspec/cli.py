"""Command-line front end.

    folspec models
    folspec spectrum    --model carriere --truncation 64 --count 20
    folspec invariance  --model carriere [--weight "fourier: 0, 0, 0.7"]...
    folspec cohomology  --model carriere
    folspec estimates   --model hopf-spinor
    folspec convergence --model carriere --ladder 16,32,64
    folspec validate

Exit codes: 0 all checks pass, 1 a check failed, 2 usage error,
3 inconclusive, 4 computational failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .complex import ConditioningError, ConsistencyError, ModelDefinitionError, UnsupportedModelError
from .lab import (
    ExperimentConfig,
    check_conjugation,
    default_weights,
    emit_report,
    run_experiment,
)
from .models import BUILTIN_MODELS, DEFAULT_PARAMETERS, MODEL_KINDS

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_INCONCLUSIVE, EXIT_ERROR = 0, 1, 2, 3, 4
SUBCOMMANDS = ("models", "spectrum", "invariance", "cohomology", "estimates", "convergence",
               "validate")
KIND_OF = {"spectrum": "spectrum", "invariance": "invariance", "cohomology": "duality",
           "estimates": "estimate", "convergence": "convergence", "validate": "validate"}
TOL_NAME = {"spectrum": "rel_tol", "invariance": "rel_tol", "cohomology": "rel_tol",
            "estimates": "slack", "convergence": "convergence", "validate": "identity"}
MODEL_NOTES = {
    "circle-fibration": "q=1, circle base, fiber volume v, kappa_b = -d log v",
    "torus-base": "q=2, flat torus base, fiber volume v",
    "sphere-base": "q=2, round sphere of radius r, taut",
    "hopf-de-rham": "q=2, Hopf flow on S^3, transverse S^2(1/2)",
    "hopf-spinor": "spinor Dirac operator on S^2(r), spin-weight +-1/2",
    "carriere": "q=2, Carriere flow on a hyperbolic mapping torus, non-taut",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


@dataclass
class CommandPlan:
    subcommand: str
    config: ExperimentConfig | None
    fmt: str = "json"
    out: Path | None = None
    conjugation: bool = False
    quiet: bool = False


def build_parser():
    parser = _Parser(prog="folspec", description="Basic Dirac spectra of model foliations.")
    parser.add_argument("--version", action="version", version=f"folspec {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        if name == "models":
            continue
        p.add_argument("--config", type=Path, help="JSON experiment config; flags override it")
        p.add_argument("--model", help=f"one of {', '.join(BUILTIN_MODELS)} or synthetic")
        p.add_argument("--truncation", type=float, help="Fourier N, harmonic L or spinor cap")
        p.add_argument("--weight", action="append", metavar="LITERAL",
                       help='deformation exponent, e.g. "fourier: 0, 0, 0.7071"; repeatable')
        p.add_argument("--count", type=int, help="eigenvalues to compare (default 20)")
        p.add_argument("--tol", type=float, help="main tolerance of the experiment")
        p.add_argument("--out", type=Path, help="report path (default reports/<cmd>-<model>.<fmt>)")
        p.add_argument("--format", choices=("json", "csv"), dest="fmt")
        p.add_argument("--quiet", action="store_true", help="suppress the summary table")
        if name == "convergence":
            p.add_argument("--ladder", help="comma separated truncations, e.g. 16,32,64")
            p.add_argument("--observable", choices=("laplacian", "dirac", "betti"))
        if name == "invariance":
            p.add_argument("--conjugation", action="store_true",
                           help="also check the conjugation identity for the first weight")
    return parser


def _truncation(x):
    return int(x) if x is not None and float(x).is_integer() else x


def parse_invocation(argv=None):
    """Turn argv into a CommandPlan; flags take precedence over --config."""
    args = build_parser().parse_args(argv)
    if args.subcommand == "models":
        return CommandPlan("models", None)
    data = {}
    if args.config is not None:
        try:
            data = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
    data["kind"] = KIND_OF[args.subcommand]
    if args.model is not None:
        data["model"] = args.model
    if args.truncation is not None:
        data["truncation"] = args.truncation
    if data.get("truncation") is not None:
        data["truncation"] = _truncation(data["truncation"])
    if args.weight:
        data["weights"] = args.weight
    if args.count is not None:
        data["count"] = args.count
    if args.tol is not None:
        data.setdefault("tolerances", {})[TOL_NAME[args.subcommand]] = args.tol
    if getattr(args, "observable", None):
        data["observable"] = args.observable
    if getattr(args, "ladder", None):
        try:
            data["ladder"] = [_truncation(float(x)) for x in args.ladder.split(",")]
        except ValueError as exc:
            raise UsageError(f"bad --ladder {args.ladder!r}") from exc
    model = data.get("model", "carriere")
    if model not in MODEL_KINDS:
        raise UsageError(f"unknown model {model!r}; choose from {', '.join(BUILTIN_MODELS)}")
    try:
        config = ExperimentConfig.from_dict(data)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from exc
    outputs = dict(config.outputs)
    fmt = args.fmt or outputs.get("format", "json")
    if fmt not in ("json", "csv"):
        raise UsageError(f"unsupported format {fmt!r}")
    out = args.out or (Path(outputs["path"]) if "path" in outputs else
                       Path("reports") / f"{args.subcommand}-{config.model}.{fmt}")
    return CommandPlan(args.subcommand, config, fmt, out,
                       conjugation=getattr(args, "conjugation", False), quiet=args.quiet)


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------

def _fmt(x):
    return "-" if x is None else f"{x:.3e}"


def summary_table(report):
    """Fixed-width plain-text table of the checks."""
    lines = [f"{'id':>3}  {'status':<12} {'measured':>10} {'tolerance':>10}  check"]
    for c in report.checks:
        lines.append(f"{c['id']:>3}  {c['status']:<12} {_fmt(c['measured']):>10} "
                     f"{_fmt(c['tolerance']):>10}  {c['name']}")
        if "limiting case" in c["detail"]:
            lines.append(f"{'':>3}  {'':<12} {'':>10} {'':>10}  ^ equality: limiting case")
    lines.append(f"verdict: {report.verdict.upper()}")
    return "\n".join(lines)


def _list_models():
    print(f"{'model':<18} {'defaults':<44} description")
    for name in BUILTIN_MODELS:
        params = ", ".join(f"{k}={v}" for k, v in DEFAULT_PARAMETERS[name].items())
        print(f"{name:<18} {params:<44} {MODEL_NOTES[name]}")
    print(f"{'synthetic':<18} {'--config with parameters.document':<44} JSON descriptor")
    return EXIT_PASS


def _run(plan):
    cfg = plan.config
    report = run_experiment(cfg)
    if plan.conjugation:
        phi = cfg.weights[0] if cfg.weights else default_weights(cfg.model)[0]
        extra = check_conjugation(cfg.build(), phi, cfg.tol("conjugation"))
        for c in extra.checks:
            report.add_check(f"conjugation: {c['name']}", c["status"], c["measured"],
                             c["tolerance"], c["detail"])
        report.runs.extend({**r, "name": f"conjugation: {r['name']}"} for r in extra.runs)
    return report


def execute_plan(plan):
    """Run a plan, write its report and print the summary; returns the exit code."""
    if plan.subcommand == "models":
        return _list_models()
    try:
        report = _run(plan)
    except (ModelDefinitionError, UnsupportedModelError, ConsistencyError, ConditioningError,
            np.linalg.LinAlgError, ValueError) as exc:
        print(f"folspec: computation failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    try:
        path = emit_report(report, plan.out, plan.fmt)
    except OSError as exc:
        print(f"folspec: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if not plan.quiet:
        print(summary_table(report))
        print(f"report: {path}")
    return {"pass": EXIT_PASS, "fail": EXIT_FAIL, "inconclusive": EXIT_INCONCLUSIVE}[report.verdict]


def main(argv=None):
    try:
        plan = parse_invocation(argv)
    except UsageError as exc:
        print(f"folspec: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return execute_plan(plan)


if __name__ == "__main__":
    sys.exit(main())

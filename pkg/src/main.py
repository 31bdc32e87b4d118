"""
Command-line front end for tsirelson-norms.
Every command prints one JSON object on stdout (or to --out). Exit codes:
0 on success, 1 on input or library errors, 2 when a verification fails.
"""

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import yaml
from pydantic import ValidationError

from src.averages import (
    AveragingTree,
    BasisSupply,
    build_averaging_tree,
    check_averaging_tree,
    check_restriction,
    restrict_average,
)
from src.config import Config, get_default_config, load_config
from src.enclosure import parse_rational
from src.errors import InputError, TsirelsonError
from src.logging import get_logger, setup_logging
from src.norm import get_engine
from src.reports import report_merge, report_schema, reports_from_lines
from src.schreier import FamilySpec, enumerate_partitions, member, parse_set, schreier_rank
from src.spaces import PRESETS, SpaceSpec
from src.spreading import classify, p_space_params
from src.suites import SUITES, run_all, run_suite
from src.trees import evaluate
from src.vectors import BlockVector

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_FAILED = 2

Result = Tuple[Dict[str, Any], int]


class CLIParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors surface as InputError (exit 1)."""

    def error(self, message: str):
        raise InputError(message, field="arguments")


def _read_text(value: str) -> Tuple[str, Optional[Path]]:
    path = Path(value)
    try:
        if path.is_file():
            return path.read_text(), path
    except OSError:
        # inline JSON longer than a file name
        pass
    return value, None


def load_spec(value: str) -> SpaceSpec:
    """Space spec from a preset name, a JSON/YAML file or inline JSON."""
    if value in PRESETS:
        return PRESETS[value]()
    text, path = _read_text(value)
    if path is not None and path.suffix in (".yaml", ".yml"):
        data = yaml.safe_load(text)
    else:
        data = json.loads(text)
    return SpaceSpec.model_validate(data)


def load_vector(value: str) -> BlockVector:
    """Vector from a JSON file or inline JSON of the form {"coeffs": {"3": "1/2"}}."""
    text, _ = _read_text(value)
    return BlockVector.from_json(json.loads(text))


def load_tree(value: str) -> AveragingTree:
    text, _ = _read_text(value)
    data = json.loads(text)
    return AveragingTree.from_json(data.get("tree", data) if isinstance(data, dict) else data)


def _require(args: argparse.Namespace, name: str) -> Any:
    value = getattr(args, name)
    if value is None:
        raise InputError(f"--{name.replace('_', '-')} is required for {args.command}", field=name)
    return value


def _engine(spec: SpaceSpec, config: Config):
    return get_engine(
        spec,
        config.cap_for(spec.modified),
        config.engine.precision,
        config.engine.max_precision,
    )


# Commands


def cmd_norm(args: argparse.Namespace, config: Config) -> Result:
    spec = load_spec(_require(args, "spec"))
    x = load_vector(_require(args, "vec"))
    value = _engine(spec, config).norm(x, max_order=args.max_order)
    return {"norm": value.to_json()}, EXIT_OK


def cmd_functional(args: argparse.Namespace, config: Config) -> Result:
    spec = load_spec(_require(args, "spec"))
    x = load_vector(_require(args, "vec"))
    engine = _engine(spec, config)
    f = engine.norming_functional(x, max_order=args.max_order)
    return {
        "norm": engine.norm(x, max_order=args.max_order).to_json(),
        "value": evaluate(f, x, config.engine.precision).to_json(),
        "functional": f.to_json(),
        "height": f.height(),
    }, EXIT_OK


def cmd_rank(args: argparse.Namespace, config: Config) -> Result:
    F = parse_set(_require(args, "set"))
    result: Dict[str, Any] = {"set": list(F), "rank": schreier_rank(F)}
    if args.M is not None:
        result["member"] = member(F, FamilySpec.S(args.M))
    return result, EXIT_OK


def cmd_partitions(args: argparse.Namespace, config: Config) -> Result:
    support = parse_set(_require(args, "set"))
    cap = config.cap_for(args.modified)
    partitions: List[dict] = []
    count = 0
    for info in enumerate_partitions(support, args.modified, cap):
        count += 1
        if args.limit is None or len(partitions) < args.limit:
            partitions.append({**info.partition.to_json(), "rank": info.rank, "size": info.size})
    return {"support": list(support), "modified": args.modified, "count": count, "partitions": partitions}, EXIT_OK


def cmd_average_build(args: argparse.Namespace, config: Config) -> Result:
    M = _require(args, "M")
    eps = parse_rational(_require(args, "eps"))
    start = args.start if args.start is not None else config.averages.supply_start
    error_space = load_spec(args.spec) if args.spec else None
    tree = build_averaging_tree(
        BasisSupply(start),
        M,
        eps,
        power_of_two=args.pow2,
        error_space=error_space,
        max_leaves=config.averages.max_leaves,
        prec=config.engine.precision,
    )
    violations = check_averaging_tree(tree)
    return {
        "tree": tree.to_json(),
        "leaves": len(tree.levels[0]),
        "violations": violations,
    }, EXIT_FAILED if violations else EXIT_OK


def cmd_average_restrict(args: argparse.Namespace, config: Config) -> Result:
    tree = load_tree(_require(args, "tree"))
    I = parse_set(_require(args, "set"))
    restricted = restrict_average(tree, I, args.level)
    spec = load_spec(args.spec) if args.spec else None
    cap = config.cap_for(spec.modified) if spec else None
    report = check_restriction(tree, restricted, spec, cap, config.engine.precision)
    return {
        "tree": restricted.to_json(),
        "violations": report.violations,
        "bundle_norms": [v.to_json() for v in report.bundle_norms],
        "pass": report.ok,
    }, EXIT_OK if report.ok else EXIT_FAILED


def cmd_verify(args: argparse.Namespace, config: Config) -> Result:
    if args.suite == "all":
        merged = run_all(config, args.seed, args.samples)
        return merged, EXIT_OK if merged["pass"] else EXIT_FAILED
    params = {"M": args.M} if args.M is not None else None
    report = run_suite(args.suite, config, args.seed, args.samples, params)
    return report.to_json(), EXIT_OK if report.passed else EXIT_FAILED


def cmd_classify(args: argparse.Namespace, config: Config) -> Result:
    spec = load_spec(_require(args, "spec"))
    spreading = config.spreading
    horizon = args.horizon or spreading.horizon
    params = p_space_params(spec, horizon, config.engine.precision)
    result = classify(
        params,
        spreading.trend_low,
        spreading.trend_high,
        spreading.inf_threshold,
        spreading.oscillation_factor,
    )
    return {"space": spec.label(), "class": result.value, "params": params.to_json()}, EXIT_OK


def cmd_report_merge(args: argparse.Namespace, config: Config) -> Result:
    reports: List[dict] = []
    for value in args.reports:
        text, path = _read_text(value)
        if path is None:
            raise InputError(f"no such report file: {value}", field="reports")
        reports.extend(reports_from_lines(text))
    return report_merge(reports), EXIT_OK


def cmd_schema(args: argparse.Namespace, config: Config) -> Result:
    return report_schema(), EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace, Config], Result]] = {
    "norm": cmd_norm,
    "functional": cmd_functional,
    "rank": cmd_rank,
    "partitions": cmd_partitions,
    "average-build": cmd_average_build,
    "average-restrict": cmd_average_restrict,
    "verify": cmd_verify,
    "classify": cmd_classify,
    "report-merge": cmd_report_merge,
    "schema": cmd_schema,
}


def build_parser() -> CLIParser:
    """Create the argument parser with one subcommand per operation."""
    common = CLIParser(add_help=False)
    common.add_argument("--config", type=Path, help="Path to configuration file (YAML)")
    common.add_argument("--spec", help="Space spec: preset name, JSON/YAML file or inline JSON")
    common.add_argument("--vec", help="Vector: JSON file or inline JSON")
    common.add_argument("--set", help="Finite set, e.g. 2,3,4")
    common.add_argument("--M", type=int, help="Schreier order / average height")
    common.add_argument("--eps", help="Error bound as a rational, e.g. 3/4")
    common.add_argument("--samples", type=int, help="Samples per randomized suite")
    common.add_argument("--seed", type=int, help="Seed for randomized suites")
    common.add_argument("--cap", type=int, help="Support cap for enumerations")
    common.add_argument("--prec", type=int, help="Precision in bits for enclosures")
    common.add_argument("--out", type=Path, help="Write JSON here instead of stdout")

    parser = CLIParser(description="tsirelson-norms - norms and averages in mixed Tsirelson spaces")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=CLIParser)

    for name in ("norm", "functional"):
        sub = commands.add_parser(name, parents=[common], help=f"{name} of a vector")
        sub.add_argument("--max-order", type=int, help="Only trees whose leaves have order <= this")
    commands.add_parser("rank", parents=[common], help="Schreier rank of a set")
    sub = commands.add_parser("partitions", parents=[common], help="Enumerate norm-equation partitions")
    sub.add_argument("--modified", action="store_true", help="Allowable instead of admissible partitions")
    sub.add_argument("--limit", type=int, help="Emit at most this many partitions (count is still total)")
    sub = commands.add_parser("average-build", parents=[common], help="Build an averaging tree over the basis")
    sub.add_argument("--start", type=int, help="First basis index supplied")
    sub.add_argument("--pow2", action="store_true", help="Use power-of-two weights")
    sub = commands.add_parser("average-restrict", parents=[common], help="Restrict an averaging tree to I")
    sub.add_argument("--tree", help="Averaging tree JSON (output of average-build)")
    sub.add_argument("--level", type=int, help="Level of the nodes indexed by --set")
    sub = commands.add_parser("verify", parents=[common], help="Run a verification suite")
    sub.add_argument("suite", choices=sorted(SUITES) + ["all"], help="Suite to run")
    sub = commands.add_parser("classify", parents=[common], help="Class 1 / Class 2 classification")
    sub.add_argument("--horizon", type=int, help="Finite horizon for theta_n")
    sub = commands.add_parser("report-merge", parents=[common], help="Merge verify reports")
    sub.add_argument("reports", nargs="+", help="Report files (JSON or JSON lines)")
    commands.add_parser("schema", parents=[common], help="Print the verify report JSON schema")
    return parser


def apply_overrides(config: Config, args: argparse.Namespace) -> Config:
    """Apply --cap and --prec on top of the loaded configuration."""
    if args.cap is not None:
        config.engine.cap_nonmodified = args.cap
        config.engine.cap_modified = args.cap
    if args.prec is not None:
        config.engine.precision = args.prec
        config.engine.max_precision = max(config.engine.max_precision, args.prec)
    return config


def emit(payload: Dict[str, Any], out: Optional[Path]) -> None:
    text = json.dumps(payload, sort_keys=True)
    if out is not None:
        out.write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def run(argv: Optional[List[str]] = None) -> int:
    """Parse argv, run one command and emit its JSON.

    Args:
        argv: Arguments without the program name (sys.argv[1:] when None)

    Returns:
        Exit code
    """
    out: Optional[Path] = None
    started = time.monotonic()
    try:
        args = build_parser().parse_args(argv)
        out = args.out
        config = load_config(args.config) if args.config else get_default_config()
        config = apply_overrides(config, args)
        setup_logging(config.logging)
        payload, code = COMMANDS[args.command](args, config)
    except (InputError, ValidationError, json.JSONDecodeError, yaml.YAMLError) as exc:
        logger.error(f"invalid input: {exc}")
        emit({"error": type(exc).__name__, "message": str(exc)}, out)
        return EXIT_INPUT
    except TsirelsonError as exc:
        logger.error(f"{type(exc).__name__}: {exc}")
        emit({"error": type(exc).__name__, "message": str(exc)}, out)
        return EXIT_INPUT

    emit(payload, out)
    logger.info(
        f"{args.command} finished",
        extra={"command": args.command, "duration_ms": round((time.monotonic() - started) * 1000)},
    )
    return code


def main():
    """Main entry point."""
    sys.exit(run())


if __name__ == "__main__":
    main()

"""
Command-line entry point for the CDL generation toolchain.

Usage:
    # Index a library tree and look names up in it
    cdlgen index cdlgen/data/library/10.1.x --version 10.1.x -o cdl.idx
    cdlgen lookup And --index cdl.idx

    # Check, simulate and grade a block
    cdlgen validate Task4.mo --task 4
    cdlgen simulate Task4.mo --inputs inputs.csv -o trace.csv
    cdlgen conform Task4.mo --task 4

    # Replay the shipped task 4 cassette, or record a new one from a reply script
    cdlgen generate --task 4 --mode replay
    cdlgen cassette build --task 4 -o task4.cassette

    # Review workflow
    cdlgen eval form sessions/task4-0123456789 -o review.ini
    cdlgen eval ingest review.ini
    cdlgen eval report sessions

Data goes to standard output or the ``-o`` target, logs to standard error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import TYPE_CHECKING, NoReturn

import orjson

from cdlgen import __version__
from cdlgen.config import AppConfig, GatewayMode, Settings, default_config_path, load_config
from cdlgen.evaluation import (
    aggregate_report,
    ai_evaluate,
    check_conformance,
    human_eval_form,
    ingest_human_eval,
    task_oracle,
)
from cdlgen.evaluation.basic_logic import run_basic_logic
from cdlgen.evaluation.cost import cost_benefit, cost_benefit_range, format_cost
from cdlgen.evaluation.grading import GradeLevel, grade_candidate
from cdlgen.exceptions import (
    CdlGenError,
    ConfigError,
    ElaborationError,
    EmptyIndex,
    NotFound,
    SimulationError,
    TaskDefinitionError,
    UnparseableVerdict,
)
from cdlgen.modelica import parse_file, print_block
from cdlgen.models import EvaluationRecord, FaultClass, Pathway
from cdlgen.services.faults import seed_fault
from cdlgen.services.gateway import Gateway
from cdlgen.services.library_index import (
    baseline_fuzzy_search,
    build_index,
    compare_retrieval,
    hard_rule_lookup,
    load_library,
    load_rename_map,
    read_index,
    write_index,
)
from cdlgen.services.orchestrator import build_cassette, read_session, run_sessions
from cdlgen.services.prompts import LogicBlock, PromptVariant
from cdlgen.services.tasks import load_reference_task
from cdlgen.services.validator import validate
from cdlgen.simulation import elaborate, format_trace_csv, read_trace_csv, simulate

if TYPE_CHECKING:
    from collections.abc import Sequence

    from cdlgen.models import GenerationSession
    from cdlgen.services.library_index import LibraryIndex

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_EMPTY_INDEX = 2
EXIT_USAGE = 64
EXIT_CONFIG = 78

# most specific first
EXIT_CODES: tuple[tuple[type[CdlGenError], int], ...] = (
    (EmptyIndex, EXIT_EMPTY_INDEX),
    (NotFound, EXIT_FAILED),
    (ConfigError, EXIT_CONFIG),
    (TaskDefinitionError, EXIT_CONFIG),
    (CdlGenError, EXIT_FAILED),
)


class CliParser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with status 64."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def configure_logging(*, verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else Settings.LOG_LEVEL.upper(),
        format="%(asctime)s %(levelname)-8s %(name)s  %(message)s",
        datefmt="%H:%M:%S",
        stream=sys.stderr,
        force=True,
    )


def emit(text: str, output: Path | None = None) -> None:
    if output is None:
        sys.stdout.write(text)
        return
    output.parent.mkdir(parents=True, exist_ok=True)
    output.write_text(text, encoding="utf-8")
    logger.info("Wrote %s", output)


def exit_code_for(exc: CdlGenError) -> int:
    for family, code in EXIT_CODES:
        if isinstance(exc, family):
            return code
    return EXIT_FAILED


# ── Shared loaders ─────────────────────────────────────────────────────────


def _config(args: argparse.Namespace) -> AppConfig:
    return load_config(
        args.config,
        mode=getattr(args, "mode", None),
        cassette=getattr(args, "cassette", None),
    )


def _index(args: argparse.Namespace, config: AppConfig | None = None) -> LibraryIndex:
    """The ``--index`` file when given, otherwise the configured library."""
    config = config or _config(args)
    if getattr(args, "index", None) is None:
        return load_library(config.library)
    rename_map = load_rename_map(config.library.rename_map) if config.library.rename_map is not None else ()
    return read_index(args.index, args.library_root or config.library.root, rename_map)


# ── Library commands ───────────────────────────────────────────────────────


def cmd_index(args: argparse.Namespace) -> int:
    rename_map = load_rename_map(args.rename_map) if args.rename_map is not None else ()
    index = build_index(args.root, args.version, rename_map)
    args.output.parent.mkdir(parents=True, exist_ok=True)
    write_index(index, args.output)
    logger.info("Wrote %d entries to %s", len(index), args.output)
    for skipped in index.skipped:
        logger.warning("Skipped %s", skipped)
    return EXIT_OK


def cmd_lookup(args: argparse.Namespace) -> int:
    index = _index(args)
    if args.fuzzy:
        result = baseline_fuzzy_search(index, args.name, k=args.k)
        if not result.hits:
            raise NotFound(args.name)
    else:
        result = hard_rule_lookup(index, args.name)
    emit(result.as_text())
    return EXIT_OK


def cmd_compare_retrieval(args: argparse.Namespace) -> int:
    index = _index(args)
    names = list(args.names)
    if args.names_file is not None:
        names.extend(line.strip() for line in args.names_file.read_text(encoding="utf-8").splitlines() if line.strip())
    if not names:
        raise ConfigError("compare-retrieval needs at least one name")
    rows, rate = compare_retrieval(index, names)
    lines = [
        f"{row.name}\t{','.join(row.hard_rule) or '-'}\t{row.fuzzy_top or '-'}\t"
        f"{'DIVERGES' if row.diverges else 'same'}"
        for row in rows
    ]
    lines.append(f"divergence rate {rate * 100:.1f}% ({sum(r.diverges for r in rows)}/{len(rows)})")
    emit("\n".join(lines) + "\n", args.output)
    return EXIT_OK


# ── Block commands ─────────────────────────────────────────────────────────


def cmd_validate(args: argparse.Namespace) -> int:
    config = _config(args)
    index = _index(args, config)
    task = load_reference_task(args.task) if args.task else None
    report = validate(parse_file(args.file), index, task, step_size=config.simulation.step_size)
    emit(report.as_text(), args.output)
    logger.info("%d errors, %d warnings", len(report.errors), len(report.warnings))
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_simulate(args: argparse.Namespace) -> int:
    block = parse_file(args.file)
    try:
        network = elaborate(block, _index(args))
        inputs = read_trace_csv(args.inputs, {name: network.kinds[name] for name in network.inputs})
        trace = simulate(network, inputs, args.step, args.horizon)
    except (ElaborationError, SimulationError) as exc:
        logger.error("%s: %s", block.name, exc)  # noqa: TRY400
        return EXIT_FAILED
    emit(format_trace_csv(trace), args.output)
    return EXIT_OK


def cmd_conform(args: argparse.Namespace) -> int:
    config = _config(args)
    task = load_reference_task(args.task)
    options = {"seed": config.simulation.probe_seed if args.seed is None else args.seed}
    if args.tolerance is not None:
        options["tolerance"] = args.tolerance
    block = parse_file(args.file)
    try:
        result = check_conformance(
            task_oracle(task, options),
            block,
            _index(args, config),
            step_size=config.simulation.step_size,
            horizon=config.simulation.horizon,
        )
    except (ElaborationError, SimulationError) as exc:
        logger.error("%s does not simulate: %s", block.name, exc)  # noqa: TRY400
        return EXIT_FAILED
    emit(result.as_text(), args.output)
    if args.trace is not None:
        emit(format_trace_csv(result.trace), args.trace)
    return EXIT_OK if result.passed else EXIT_FAILED


def cmd_grade(args: argparse.Namespace) -> int:
    config = _config(args)
    task = load_reference_task(args.task) if args.task else None
    grade = grade_candidate(
        args.file.read_text(encoding="utf-8"),
        _index(args, config),
        task,
        step_size=config.simulation.step_size,
        horizon=config.simulation.horizon,
    )
    emit(grade.as_text(), args.output)
    target = GradeLevel.WORK if task is not None else GradeLevel.STRUCTURE
    return EXIT_OK if grade.level >= target else EXIT_FAILED


def cmd_seed_fault(args: argparse.Namespace) -> int:
    block, injection = seed_fault(parse_file(args.file), args.fault, args.seed)
    logger.info("Injected %s at %s: %s", injection.fault, injection.location, injection.description)
    emit(print_block(block), args.output)
    return EXIT_OK


# ── Sessions ───────────────────────────────────────────────────────────────


def _output_dir(args: argparse.Namespace, config: AppConfig) -> Path:
    return args.output_dir or config.output.directory


def cmd_generate(args: argparse.Namespace) -> int:
    config = _config(args)
    tasks = [load_reference_task(ref) for ref in args.task]
    output_dir = _output_dir(args, config)
    sessions = run_sessions(tasks, load_library(config.library), config, jobs=args.jobs, output_dir=output_dir)
    for session in sessions:
        emit(f"{session.session_id}\t{session.status}\t{output_dir / session.session_id}\n")
    return EXIT_OK if all(s.converged for s in sessions) else EXIT_FAILED


def cmd_cassette_build(args: argparse.Namespace) -> int:
    config = _config(args)
    script = args.script
    if script is None:
        provider = config.provider_for("generator")
        script = provider.script_path if provider is not None else None
    if script is None:
        raise ConfigError("no reply script: pass --script or configure a scripted provider")
    task = load_reference_task(args.task)
    cassette_path = args.cassette or (args.output_dir or Path()) / f"task{task.task_id}.cassette"
    if cassette_path.exists() and not args.append:
        cassette_path.unlink()
    session = build_cassette(
        script,
        task,
        load_library(config.library),
        config,
        cassette_path,
        output_dir=args.output_dir,
    )
    emit(f"{cassette_path}\t{len(session.transcript)} calls\t{session.status}\n")
    return EXIT_OK if session.converged else EXIT_FAILED


def cmd_basic_logic(args: argparse.Namespace) -> int:
    config = _config(args)
    gateway = Gateway.from_config(config)
    index = load_library(config.library)
    blocks = [LogicBlock(args.block)] if args.block else list(LogicBlock)
    variants = [PromptVariant(args.variant)] if args.variant else list(PromptVariant)
    runs = [run_basic_logic(block, variant, args.trials, gateway, index) for block in blocks for variant in variants]
    emit("".join(run.as_text() for run in runs), args.output)
    return EXIT_OK


def cmd_cost(args: argparse.Namespace) -> int:
    ranged = any(len(values) > 1 for values in (args.baseline, args.assisted, args.modules))
    try:
        if ranged:
            low, high = cost_benefit_range(
                (min(args.baseline), max(args.baseline)),
                (min(args.assisted), max(args.assisted)),
                args.rate,
                (min(args.modules), max(args.modules)),
            )
            text = f"low\n{format_cost(low)}high\n{format_cost(high)}"
        else:
            text = format_cost(cost_benefit(args.baseline[0], args.assisted[0], args.rate, args.modules[0]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    emit(text, args.output)
    return EXIT_OK


# ── Evaluation ─────────────────────────────────────────────────────────────


def _evaluation_path(session_dir: Path, record: EvaluationRecord) -> Path:
    name = "".join(c if c.isalnum() or c in "-_." else "_" for c in record.evaluator_name) or "anonymous"
    return session_dir / "evaluations" / f"{record.evaluator}-{name}.json"


def _write_record(session_dir: Path, record: EvaluationRecord) -> Path:
    path = _evaluation_path(session_dir, record)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(orjson.dumps(record.model_dump(mode="json"), option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS))
    return path


def _read_records(session_dir: Path) -> list[EvaluationRecord]:
    return [
        EvaluationRecord.model_validate(orjson.loads(path.read_bytes()))
        for path in sorted((session_dir / "evaluations").glob("*.json"))
    ]


def cmd_eval_form(args: argparse.Namespace) -> int:
    emit(human_eval_form(read_session(args.session), args.evaluator), args.output)
    return EXIT_OK


def cmd_eval_ingest(args: argparse.Namespace) -> int:
    config = _config(args)
    record = ingest_human_eval(args.form.read_text(encoding="utf-8"))
    session_dir = (args.sessions or config.output.directory) / record.session_id
    if not (session_dir / "session.json").exists():
        raise ConfigError(f"form names session {record.session_id}, which is not in {session_dir.parent}")
    path = _write_record(session_dir, record)
    emit(f"{path}\n")
    return EXIT_OK


def cmd_eval_ai(args: argparse.Namespace) -> int:
    config = _config(args)
    session = read_session(args.session)
    pathway = Pathway(args.pathway or config.pipeline.ai_eval_pathway)
    final = session.final_artifact
    trace_csv = None
    if final is not None and final.trace_file is not None:
        trace_csv = (args.session / final.trace_file).read_text(encoding="utf-8")
    gateway = Gateway.from_config(config)
    try:
        record = ai_evaluate(session, pathway, gateway, load_reference_task(session.task_id), trace_csv=trace_csv)
    except ValueError as exc:
        raise ConfigError(f"{session.session_id}: {exc}") from exc
    except UnparseableVerdict as exc:
        logger.error("%s", exc)  # noqa: TRY400
        return EXIT_FAILED
    path = _write_record(args.session, record)
    emit(f"{path}\t{record.gate}\n")
    return EXIT_OK


def _sessions_under(directory: Path) -> list[Path]:
    if (directory / "session.json").exists():
        return [directory]
    return sorted(path.parent for path in directory.glob("*/session.json"))


def cmd_eval_report(args: argparse.Namespace) -> int:
    session_dirs = _sessions_under(args.directory)
    if not session_dirs:
        raise ConfigError(f"no sessions under {args.directory}")
    sessions: list[GenerationSession] = []
    records: list[EvaluationRecord] = []
    for session_dir in session_dirs:
        session = read_session(session_dir)
        sessions.append(session)
        records.extend(session.evaluations)
        records.extend(_read_records(session_dir))
    report = aggregate_report(records, sessions)
    emit(report.as_csv() if args.csv else report.as_text(), args.output)
    return EXIT_OK


# ── Parser ─────────────────────────────────────────────────────────────────


def build_parser() -> CliParser:
    common = CliParser(add_help=False)
    common.add_argument(
        "--config",
        type=Path,
        default=default_config_path(),
        help="Pipeline config file (default: the shipped offline ci.cfg)",
    )
    common.add_argument("--verbose", "-v", action="store_true", help="Log at DEBUG level")

    indexed = CliParser(add_help=False)
    indexed.add_argument("--index", type=Path, help="Index file (default: scan the configured library)")
    indexed.add_argument("--library-root", type=Path, help="Library tree the index file was built from")

    output = CliParser(add_help=False)
    output.add_argument("-o", "--output", type=Path, help="Write to this file instead of standard output")

    parser = CliParser(prog="cdlgen", description="Generate, check and evaluate CDL control blocks")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = commands.add_parser("index", parents=[common], help="Index a library tree")
    p.add_argument("root", type=Path, help="Library root directory")
    p.add_argument("--version", required=True, help="Library version tag")
    p.add_argument("--rename-map", type=Path, help="Tab-separated old/new package names")
    p.add_argument("-o", "--output", type=Path, required=True, help="Index file to write")
    p.set_defaults(handler=cmd_index)

    p = commands.add_parser("lookup", parents=[common, indexed], help="Find library classes by name")
    p.add_argument("name", help="Class name, short or fully qualified")
    p.add_argument("--fuzzy", action="store_true", help="Token-overlap search instead of exact names")
    p.add_argument("-k", type=int, default=5, help="Hits to keep with --fuzzy (default: 5)")
    p.set_defaults(handler=cmd_lookup)

    p = commands.add_parser(
        "compare-retrieval", parents=[common, indexed, output], help="Exact lookup against fuzzy top-1"
    )
    p.add_argument("names", nargs="*", help="Names to look up")
    p.add_argument("--names-file", type=Path, help="File with one name per line")
    p.set_defaults(handler=cmd_compare_retrieval)

    p = commands.add_parser("validate", parents=[common, indexed, output], help="Static checks on a block")
    p.add_argument("file", type=Path, help="Modelica source file")
    p.add_argument("--task", help="Task id or task file; adds the interface and direction checks")
    p.set_defaults(handler=cmd_validate)

    p = commands.add_parser("simulate", parents=[common, indexed, output], help="Run a block on an input trace")
    p.add_argument("file", type=Path, help="Modelica source file")
    p.add_argument("--inputs", type=Path, required=True, help="Input trace CSV")
    p.add_argument("--step", type=float, help="Step size in seconds (default: from the input trace)")
    p.add_argument("--horizon", type=float, help="Horizon in seconds (default: from the input trace)")
    p.set_defaults(handler=cmd_simulate)

    p = commands.add_parser("conform", parents=[common, indexed, output], help="Check a block against its task oracle")
    p.add_argument("file", type=Path, help="Modelica source file")
    p.add_argument("--task", required=True, help="Task id or task file")
    p.add_argument("--seed", type=int, help="Probe schedule seed (default: [simulation] probe_seed)")
    p.add_argument("--tolerance", type=float, help="Level tolerance as a fraction of the input span")
    p.add_argument("--trace", type=Path, help="Also write the simulated trace to this CSV")
    p.set_defaults(handler=cmd_conform)

    p = commands.add_parser("grade", parents=[common, indexed, output], help="Four-level grade of a block")
    p.add_argument("file", type=Path, help="Modelica source file")
    p.add_argument("--task", help="Task id or task file; needed for the top grade")
    p.set_defaults(handler=cmd_grade)

    p = commands.add_parser("seed-fault", parents=[common, output], help="Inject one known fault into a block")
    p.add_argument("file", type=Path, help="Modelica source file")
    p.add_argument("--fault", required=True, choices=[f.value for f in FaultClass], help="Fault class")
    p.add_argument("--seed", type=int, default=0, help="Random seed (default: 0)")
    p.set_defaults(handler=cmd_seed_fault)

    p = commands.add_parser("generate", parents=[common], help="Run generation sessions")
    p.add_argument("--task", action="append", required=True, help="Task id or task file; repeat for several")
    p.add_argument("--mode", type=GatewayMode, choices=list(GatewayMode), help="Override [gateway] mode")
    p.add_argument("--cassette", type=Path, help="Override [gateway] cassette")
    p.add_argument("--output-dir", type=Path, help="Session directory root (default: [output] directory)")
    p.add_argument("--jobs", "-j", type=int, default=1, help="Sessions run in parallel (default: 1)")
    p.set_defaults(handler=cmd_generate)

    cassette = commands.add_parser("cassette", help="Offline reply cassettes")
    cassette_commands = cassette.add_subparsers(dest="cassette_command", required=True, metavar="COMMAND")
    p = cassette_commands.add_parser("build", parents=[common], help="Record a cassette from a reply script")
    p.add_argument("--task", required=True, help="Task id or task file")
    p.add_argument("--script", type=Path, help="Reply script (default: the generator provider's script_path)")
    p.add_argument(
        "--cassette",
        "-o",
        type=Path,
        help="Cassette to write (default: task<id>.cassette in --output-dir or the working directory)",
    )
    p.add_argument("--append", action="store_true", help="Keep existing records instead of starting over")
    p.add_argument("--output-dir", type=Path, help="Where the cassette and the recorded session go")
    p.set_defaults(handler=cmd_cassette_build)

    p = commands.add_parser("basic-logic", parents=[common, output], help="Repeated single-block generation")
    p.add_argument("--block", choices=[b.value for b in LogicBlock], help="Logic block (default: all)")
    p.add_argument("--variant", choices=[v.value for v in PromptVariant], help="Prompt variant (default: both)")
    p.add_argument("--trials", type=int, default=10, help="Trials per block and variant (default: 10)")
    p.add_argument("--mode", type=GatewayMode, choices=list(GatewayMode), help="Override [gateway] mode")
    p.add_argument("--cassette", type=Path, help="Override [gateway] cassette")
    p.set_defaults(handler=cmd_basic_logic)

    p = commands.add_parser("cost", parents=[common, output], help="Labor cost-benefit estimate")
    p.add_argument("--baseline", type=float, nargs="+", required=True, help="Manual hours per module, or a range")
    p.add_argument("--assisted", type=float, nargs="+", required=True, help="Assisted hours per module, or a range")
    p.add_argument("--rate", type=float, required=True, help="Hourly labor rate")
    p.add_argument("--modules", type=int, nargs="+", default=[1], help="Module count, or a range (default: 1)")
    p.set_defaults(handler=cmd_cost)

    evaluation = commands.add_parser("eval", help="Review forms, AI verdicts and reports")
    eval_commands = evaluation.add_subparsers(dest="eval_command", required=True, metavar="COMMAND")
    p = eval_commands.add_parser("form", parents=[common, output], help="Blank review form for a session")
    p.add_argument("session", type=Path, help="Session directory")
    p.add_argument("--evaluator", default="", help="Pre-fill the evaluator name")
    p.set_defaults(handler=cmd_eval_form)

    p = eval_commands.add_parser("ingest", parents=[common], help="Store a filled review form")
    p.add_argument("form", type=Path, help="Filled form")
    p.add_argument("--sessions", type=Path, help="Session directory root (default: [output] directory)")
    p.set_defaults(handler=cmd_eval_ingest)

    p = eval_commands.add_parser("ai", parents=[common], help="Ask the evaluator model for a verdict")
    p.add_argument("session", type=Path, help="Session directory")
    p.add_argument("--pathway", choices=[p.value for p in Pathway], help="Default: [pipeline] ai_eval_pathway")
    p.add_argument("--mode", type=GatewayMode, choices=list(GatewayMode), help="Override [gateway] mode")
    p.add_argument("--cassette", type=Path, help="Override [gateway] cassette")
    p.set_defaults(handler=cmd_eval_ai)

    p = eval_commands.add_parser("report", parents=[common, output], help="Aggregate reviewed sessions")
    p.add_argument("directory", type=Path, help="Session directory root, or one session directory")
    p.add_argument("--csv", action="store_true", help="One CSV row per session")
    p.set_defaults(handler=cmd_eval_report)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(verbose=args.verbose)
    try:
        return args.handler(args)
    except CdlGenError as exc:
        logger.error("%s", exc)  # noqa: TRY400
        return exit_code_for(exc)
    except OSError as exc:
        logger.error("%s", exc)  # noqa: TRY400
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())

"""Generation sessions.

A session asks the selector for library modules, asks the generator for a
block, then pushes every artifact through the compile gate and the simulate
gate. A failing gate feeds its log back through the iteration prompt until
the gate passes or its budget runs out. With AI evaluation on, a converged
block also gets a yes/no verdict, and a "no" spends an evaluation iteration
on one more repair.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import logging
import re
import shutil
import tempfile
from collections import Counter
from dataclasses import dataclass, field
from datetime import UTC, datetime
from pathlib import Path
from typing import TYPE_CHECKING

import orjson

from cdlgen.config import AppConfig, CompileBackend, GatewayMode, SelectionMode
from cdlgen.evaluation.ai_eval import EVALUATOR_ROLE, ai_evaluate, ai_record
from cdlgen.evaluation.oracles import check_conformance, task_oracle
from cdlgen.exceptions import (
    ConfigError,
    ElaborationError,
    GatewayError,
    ModelicaParseError,
    NoModulesSelected,
    NotFound,
    SimulationError,
    ToolchainUnavailable,
    UnparseableVerdict,
)
from cdlgen.models import (
    Artifact,
    GenerationSession,
    Pathway,
    Provenance,
    SelectedModule,
    SessionStatus,
    Verdict,
)
from cdlgen.modelica import parse
from cdlgen.services.gateway import (
    Cassette,
    Gateway,
    ScriptedProvider,
    extract_code,
    metrics_summary,
    read_reply_script,
    transcript_entry,
)
from cdlgen.services.library_index import baseline_fuzzy_search, hard_rule_lookup
from cdlgen.services.prompts import PromptBundle, control_task_prompt, load_template, render
from cdlgen.services.toolchain import compile_external
from cdlgen.services.validator import validate
from cdlgen.simulation import format_trace_csv

if TYPE_CHECKING:
    from collections.abc import Sequence

    from cdlgen.evaluation.oracles import ConformanceOracle
    from cdlgen.modelica import ModelicaBlock
    from cdlgen.services.library_index import LibraryIndex
    from cdlgen.services.tasks import ReferenceTask

logger = logging.getLogger(__name__)

SELECTOR_ROLE = "selector"
GENERATOR_ROLE = "generator"
ROLES = (SELECTOR_ROLE, GENERATOR_ROLE, EVALUATOR_ROLE)

BULLET = re.compile(r"^\s*(?:[-*+•]|\d+[.)])\s+")
EVALUATOR_REJECTED = "A reviewer judged that this block does not fulfill the control task."


# ---------------------------------------------------------------------------
# Module selection
# ---------------------------------------------------------------------------


def parse_bullets(text: str) -> list[str]:
    """Module names from a bulleted reply, in order and without repeats.

    Lines holding more than one word are prose, not names, and are skipped.
    """
    names: list[str] = []
    for line in text.splitlines():
        name = BULLET.sub("", line).strip().strip("`*_").strip().rstrip(".,;:")
        if not name or " " in name:
            continue
        if name not in names:
            names.append(name)
    return names


def select_modules(
    task: ReferenceTask,
    index: LibraryIndex,
    gateway: Gateway,
    *,
    mode: SelectionMode = SelectionMode.HARD_RULE,
    notes: list[str] | None = None,
) -> list[SelectedModule]:
    """Ask the selector for modules and resolve each name against ``index``.

    Hard-rule mode keeps every exact match; fuzzy mode keeps the top hit.
    Names that resolve to nothing are dropped with a note.
    """
    bundle = render(
        load_template("control_expert"),
        {"task": control_task_prompt(task), "txt": "\n".join(index.class_names())},
    )
    response = gateway.ask(SELECTOR_ROLE, bundle.role_id, bundle.system_text, bundle.user_text)
    names = parse_bullets(response.text)

    selected: list[SelectedModule] = []
    seen: set[str] = set()
    for name in names:
        try:
            if mode is SelectionMode.FUZZY:
                fqns = baseline_fuzzy_search(index, name, k=1).fqns
                if not fqns:
                    raise NotFound(name)
            else:
                fqns = hard_rule_lookup(index, name).fqns
        except NotFound:
            note = f"selector named {name!r}, which is not in library {index.version}; dropped"
            logger.info(note)
            if notes is not None:
                notes.append(note)
            continue
        for fqn in fqns:
            if fqn not in seen:
                seen.add(fqn)
                selected.append(SelectedModule(fqn=fqn, provenance=Provenance(mode.value), query=name))
    if not selected:
        raise NoModulesSelected(names)
    logger.debug("Selected %d modules from %d names", len(selected), len(names))
    return selected


def session_id_for(task: ReferenceTask, config: AppConfig) -> str:
    """Stable id from the task definition and the config snapshot."""
    payload = orjson.dumps(
        {"task": task.model_dump(mode="json"), "config": config.snapshot()},
        option=orjson.OPT_SORT_KEYS,
    )
    return f"task{task.task_id}-{hashlib.sha1(payload).hexdigest()[:10]}"  # noqa: S324


# ---------------------------------------------------------------------------
# The generate / compile / simulate loop
# ---------------------------------------------------------------------------


@dataclass
class _SessionRun:
    task: ReferenceTask
    index: LibraryIndex
    config: AppConfig
    gateway: Gateway
    oracle: ConformanceOracle
    session: GenerationSession
    workdir: Path
    use_external: bool = False
    traces: dict[int, str] = field(default_factory=dict)
    conformance: dict[int, str] = field(default_factory=dict)
    blocks: dict[int, ModelicaBlock] = field(default_factory=dict)

    def note(self, text: str) -> None:
        logger.info("%s: %s", self.session.session_id, text)
        self.session.notes.append(text)

    def finish(self, status: SessionStatus, cause: str | None = None) -> None:
        self.session.status = status
        self.session.cause = cause

    def _code(self, bundle: PromptBundle) -> str:
        response = self.gateway.ask(GENERATOR_ROLE, bundle.role_id, bundle.system_text, bundle.user_text)
        return extract_code(response.text)

    def generate(self) -> str:
        modules = ", ".join(m.fqn for m in self.session.selected_modules)
        bundle = render(load_template("code_generator"), {"modules": modules, "task": control_task_prompt(self.task)})
        return self._code(bundle)

    def repair(self, error_log: str, source: str) -> str:
        bundle = render(load_template("iteration"), {"error_log": error_log.rstrip("\n"), "code_content": source})
        return self._code(bundle)

    def compile_gate(self, artifact: Artifact) -> str | None:
        """None when the artifact compiles, otherwise the log for the repair prompt."""
        try:
            block = parse(artifact.source)
        except ModelicaParseError as exc:
            artifact.parse_error = str(exc)
            return str(exc)
        self.blocks[artifact.iteration] = block
        artifact.report = validate(block, self.index, self.task, step_size=self.config.simulation.step_size)
        log = artifact.report.as_text()

        if self.use_external:
            try:
                result = compile_external(
                    artifact.source,
                    block.name,
                    self.config.toolchain,
                    self.workdir / f"iter_{artifact.iteration}",
                )
            except ToolchainUnavailable as exc:
                self.use_external = False
                self.note(f"{exc}; the builtin validator decides from here on")
            else:
                artifact.compile_log = result.log
                artifact.external_passed = result.passed
                log = result.log

        if artifact.passed_compile:
            return None
        return log or "the model does not compile"

    def simulate_gate(self, artifact: Artifact) -> str | None:
        """None when the block simulates; the oracle verdict is recorded either way."""
        simulation = self.config.simulation
        try:
            result = check_conformance(
                self.oracle,
                self.blocks[artifact.iteration],
                self.index,
                step_size=simulation.step_size,
                horizon=simulation.horizon,
            )
        except (ElaborationError, SimulationError) as exc:
            artifact.runtime_error = str(exc)
            return f"The model fails to simulate: {exc}"
        self.traces[artifact.iteration] = format_trace_csv(result.trace)
        self.conformance[artifact.iteration] = result.as_text()
        artifact.trace_file = f"traces/iter_{artifact.iteration}.csv"
        artifact.oracle_pass = result.passed
        artifact.oracle_failures = result.failures
        return None

    def evaluate(self, artifact: Artifact) -> Verdict | None:
        self.session.counters.evaluate += 1
        pathway = Pathway(self.config.pipeline.ai_eval_pathway)
        try:
            record = ai_evaluate(
                self.session,
                pathway,
                self.gateway,
                self.task,
                trace_csv=self.traces.get(artifact.iteration),
            )
        except UnparseableVerdict as exc:
            model_id = self.gateway.calls[-1][1].model_id
            record = ai_record(self.session.session_id, model_id, None, notes=f"{pathway}: unparseable verdict")
            self.note(str(exc))
        self.session.evaluations.append(record)
        return record.gate

    def run(self) -> None:
        pipeline = self.config.pipeline
        counters = self.session.counters
        self.session.selected_modules = select_modules(
            self.task,
            self.index,
            self.gateway,
            mode=pipeline.selection_mode,
            notes=self.session.notes,
        )
        source = self.generate()

        while True:
            artifact = Artifact(iteration=len(self.session.artifacts) + 1, source=source)
            self.session.artifacts.append(artifact)
            counters.compile += 1
            problem = self.compile_gate(artifact)
            if problem is not None:
                if counters.compile >= pipeline.max_compile_iters:
                    self.finish(SessionStatus.FAILED_MAX_ITERATIONS, f"compile gate failed {counters.compile} times")
                    return
                source = self.repair(problem, source)
                continue

            counters.simulate += 1
            problem = self.simulate_gate(artifact)
            if problem is not None:
                if counters.simulate >= pipeline.max_sim_iters or counters.compile >= pipeline.max_compile_iters:
                    self.finish(SessionStatus.FAILED_MAX_ITERATIONS, f"simulate gate failed: {artifact.runtime_error}")
                    return
                source = self.repair(problem, source)
                continue

            # optional repairs spend only what is left of the compile budget
            budget_left = counters.compile < pipeline.max_compile_iters
            if (
                pipeline.behavioral_repair
                and artifact.oracle_pass is False
                and budget_left
                and counters.simulate < pipeline.max_sim_iters
            ):
                failures = ", ".join(artifact.oracle_failures)
                self.note(f"iteration {artifact.iteration} violates {failures}; asking for a behavioral repair")
                source = self.repair(self.conformance[artifact.iteration], source)
                continue

            if pipeline.ai_eval:
                gate = self.evaluate(artifact)
                if gate is Verdict.NO and budget_left and counters.evaluate < pipeline.max_eval_iters:
                    source = self.repair(EVALUATOR_REJECTED, source)
                    continue

            self.finish(SessionStatus.CONVERGED)
            return


def run_session(
    task: ReferenceTask,
    index: LibraryIndex,
    config: AppConfig,
    *,
    gateway: Gateway | None = None,
    output_dir: Path | None = None,
    session_id: str | None = None,
) -> GenerationSession:
    """One full session; written to ``output_dir/<session_id>`` when a directory is given.

    ``session_id`` defaults to ``session_id_for(task, config)``.
    """
    try:
        oracle = task_oracle(task, {"seed": config.simulation.probe_seed})
    except KeyError as exc:
        raise ConfigError(f"task {task.task_id}: {exc.args[0]}") from None
    gateway = gateway or Gateway.from_config(config)
    first_call = len(gateway.calls)
    session = GenerationSession(
        session_id=session_id or session_id_for(task, config),
        task_id=task.task_id,
        config_snapshot=config.snapshot(),
    )
    directory = Path(output_dir) / session.session_id if output_dir is not None else None
    if directory is not None and directory.exists():
        shutil.rmtree(directory)

    started = datetime.now(UTC)
    logger.info("Session %s started for task %s", session.session_id, task.task_id)
    with tempfile.TemporaryDirectory(prefix="cdlgen-") as scratch:
        workdir = directory / "toolchain" if directory is not None else Path(scratch)
        run = _SessionRun(
            task=task,
            index=index,
            config=config,
            gateway=gateway,
            oracle=oracle,
            session=session,
            workdir=workdir,
            use_external=config.pipeline.compile_backend is CompileBackend.EXTERNAL,
        )
        try:
            run.run()
        except (GatewayError, NoModulesSelected) as exc:
            run.finish(SessionStatus.FAILED_UNRECOVERABLE, f"{type(exc).__name__}: {exc}")
    finished = datetime.now(UTC)

    calls = gateway.calls[first_call:]
    session.transcript = [transcript_entry(request, response) for request, response in calls]
    session.metrics = {
        model_id: metrics.as_dict() for model_id, metrics in metrics_summary(r for _, r in calls).items()
    }
    logger.info(
        "Session %s %s after %d compile iterations (%s)",
        session.session_id,
        session.status,
        session.counters.compile,
        session.cause or "ok",
    )
    if directory is not None:
        write_session(session, directory, run.traces, run.conformance, (started, finished))
    return session


# ---------------------------------------------------------------------------
# Session directories
# ---------------------------------------------------------------------------


def format_transcript(session: GenerationSession) -> str:
    parts = []
    for n, entry in enumerate(session.transcript, start=1):
        source = "replay" if entry.from_replay else entry.provider
        parts.append(
            f"=== call {n} role_id={entry.role_id} model={entry.model_id} "
            f"key={entry.request_key[:16]} source={source} ===\n"
            f"[system]\n{entry.system_text}\n[user]\n{entry.user_text}\n[reply]\n{entry.text}\n"
        )
    return "\n".join(parts)


def format_diagnostics(artifact: Artifact) -> str:
    lines = []
    if artifact.parse_error is not None:
        lines.append(f"parse\t{artifact.parse_error}")
    if artifact.report is not None:
        lines.extend(d.as_line() for d in artifact.report.diagnostics)
    if artifact.compile_log:
        lines.append("toolchain " + ("pass" if artifact.external_passed else "FAIL"))
        lines.append(artifact.compile_log.rstrip("\n"))
    if artifact.runtime_error is not None:
        lines.append(f"runtime\t{artifact.runtime_error}")
    lines.extend(f"oracle\t{name}" for name in artifact.oracle_failures)
    return "".join(line + "\n" for line in lines)


def format_summary(session: GenerationSession) -> str:
    final = session.final_artifact
    oracle = "-"
    if final is not None and final.oracle_pass is not None:
        oracle = "pass" if final.oracle_pass else "fail"
    tokens = list(session.metrics.values())
    values = {
        "session_id": session.session_id,
        "task_id": session.task_id,
        "status": session.status.value,
        "cause": session.cause or "",
        "compile_iterations": session.counters.compile,
        "simulate_iterations": session.counters.simulate,
        "evaluate_iterations": session.counters.evaluate,
        "llm_calls": len(session.transcript),
        "prompt_tokens": sum(int(m["prompt_tokens"]) for m in tokens),
        "completion_tokens": sum(int(m["completion_tokens"]) for m in tokens),
        "selected_modules": ",".join(m.fqn for m in session.selected_modules),
        "oracle": oracle,
        "ai_verdict": (session.evaluations[-1].gate or "-") if session.evaluations else "-",
    }
    return "".join(f"{key}={value}\n" for key, value in values.items())


def write_session(
    session: GenerationSession,
    directory: Path,
    traces: dict[int, str],
    conformance: dict[int, str],
    stamps: tuple[datetime, datetime],
) -> None:
    """Lay out one session directory; everything but ``timestamps.txt`` is deterministic."""
    for sub in ("artifacts", "diagnostics", "traces"):
        (directory / sub).mkdir(parents=True, exist_ok=True)
    (directory / "transcript.txt").write_text(format_transcript(session), encoding="utf-8")
    for artifact in session.artifacts:
        n = artifact.iteration
        (directory / "artifacts" / f"iter_{n}.mo").write_text(artifact.source + "\n", encoding="utf-8")
        (directory / "diagnostics" / f"iter_{n}.txt").write_text(format_diagnostics(artifact), encoding="utf-8")
        if n in traces:
            (directory / "traces" / f"iter_{n}.csv").write_text(traces[n], encoding="utf-8")
    final = session.final_artifact
    if final is not None and final.iteration in conformance:
        (directory / "conformance.txt").write_text(conformance[final.iteration], encoding="utf-8")
    (directory / "session.summary").write_text(format_summary(session), encoding="utf-8")
    (directory / "session.json").write_bytes(
        orjson.dumps(session.model_dump(mode="json"), option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS)
    )
    started, finished = stamps
    (directory / "timestamps.txt").write_text(
        f"started={started.isoformat()}\nfinished={finished.isoformat()}\n", encoding="utf-8"
    )
    logger.debug("Wrote session %s to %s", session.session_id, directory)


def read_session(directory: Path) -> GenerationSession:
    path = Path(directory) / "session.json"
    try:
        return GenerationSession.model_validate(orjson.loads(path.read_bytes()))
    except OSError as exc:
        raise ConfigError(f"cannot read session {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Batches and cassettes
# ---------------------------------------------------------------------------


def run_sessions(
    tasks: Sequence[ReferenceTask],
    index: LibraryIndex,
    config: AppConfig,
    *,
    jobs: int = 1,
    output_dir: Path | None = None,
) -> list[GenerationSession]:
    """Independent sessions in parallel; results come back in ``tasks`` order.

    Every session gets its own gateway. They share one cassette, whose
    appends are serialized. Sessions that would share an id, such as one
    task listed twice, get a ``-<n>`` suffix so each writes its own directory.
    """
    shared = None
    cassette_path = config.gateway.cassette
    if cassette_path is not None and config.gateway.mode is not GatewayMode.LIVE:
        if config.gateway.mode is GatewayMode.REPLAY and not cassette_path.exists():
            raise ConfigError(f"cassette {cassette_path} does not exist; record it first")
        shared = Cassette(cassette_path)

    session_ids = [session_id_for(task, config) for task in tasks]
    counts = Counter(session_ids)
    seen: Counter[str] = Counter()
    for position, session_id in enumerate(session_ids):
        if counts[session_id] > 1:
            seen[session_id] += 1
            session_ids[position] = f"{session_id}-{seen[session_id]}"

    results: dict[int, GenerationSession] = {}
    with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, jobs)) as executor:
        future_to_position = {
            executor.submit(
                run_session,
                task,
                index,
                config,
                gateway=Gateway.from_config(config, cassette=shared),
                output_dir=output_dir,
                session_id=session_ids[position],
            ): position
            for position, task in enumerate(tasks)
        }
        for future in concurrent.futures.as_completed(future_to_position):
            position = future_to_position[future]
            results[position] = future.result()
    return [results[position] for position in range(len(tasks))]


def recording_config(config: AppConfig, cassette_path: Path) -> AppConfig:
    gateway = config.gateway.model_copy(update={"mode": GatewayMode.RECORD, "cassette": Path(cassette_path)})
    return config.model_copy(update={"gateway": gateway})


def build_cassette(
    script: Path,
    task: ReferenceTask,
    index: LibraryIndex,
    config: AppConfig,
    cassette_path: Path,
    *,
    output_dir: Path | None = None,
) -> GenerationSession:
    """Record one session whose replies come from a reply script, in call order.

    The cassette keys use the configured model ids, so a replay with the
    same config finds every reply.
    """
    provider = ScriptedProvider(Path(script).stem, read_reply_script(script))
    cassette = Cassette(Path(cassette_path))
    gateway = Gateway(
        GatewayMode.RECORD,
        providers=dict.fromkeys(ROLES, provider),
        cassette=cassette,
        model_ids={role: config.model_id_for(role) for role in ROLES},
    )
    session = run_session(task, index, recording_config(config, cassette_path), gateway=gateway, output_dir=output_dir)
    if provider.remaining:
        logger.warning("%d scripted replies in %s were never requested", provider.remaining, script)
    logger.info("Cassette %s holds %d records", cassette_path, len(cassette))
    return session

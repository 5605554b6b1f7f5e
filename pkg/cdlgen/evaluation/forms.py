"""Plain-text review forms.

A reviewer first answers the gate question. A passing gate is scored on
the five quality criteria of ``[path_a]``; a failing gate on the four
fallback criteria of ``[path_b]``, with numbered fault notes and an effort
band. Criteria are 0 or 1.
"""

from __future__ import annotations

import configparser
import logging
import re

from pydantic import ValidationError

from cdlgen.exceptions import FormInvalid
from cdlgen.models import EffortBand, EvaluationRecord, EvaluatorKind, FaultClass, FaultNote, GenerationSession, Verdict

logger = logging.getLogger(__name__)

GATE_FIELD = "behaves_correctly"

PATH_A_FIELDS = (
    "library_appropriateness",
    "structure_modularity_readability",
    "interface_accuracy",
    "logic_simplicity_clarity",
    "robustness",
)

PATH_B_FIELDS = (
    "simulation_syntax_validity",
    "semantic_correctness",
    "logical_soundness",
    "interface_appropriateness",
)

SECTIONS = ("session", "gate", "path_a", "path_b", "faults", "effort")

FAULT_LINE = re.compile(r"^(?P<fault>\w+)\s*:\s*(?P<note>.*)$")


def human_eval_form(session: GenerationSession, evaluator: str = "") -> str:
    """Blank form pre-filled with the session's metadata."""
    artifact = session.final_artifact
    if artifact is None:
        raise FormInvalid("session", "session has no final artifact to review")
    oracle = "not run" if artifact.oracle_pass is None else ("pass" if artifact.oracle_pass else "fail")
    lines = [
        "# Modelica control block evaluation form",
        f"# session {session.session_id}, task {session.task_id}, status {session.status}",
        f"# reviewed artifact: artifacts/iter_{artifact.iteration}.mo, oracle {oracle}",
        "# [gate] yes: score [path_a] with 0/1, leave [path_b], [faults] and [effort] empty.",
        "# [gate] no: score [path_b] with 0/1, list faults as '<n> = <fault_class>: <note>',",
        "#   effort band is minor, moderate (1-8 h) or major.",
        f"# fault classes: {', '.join(FaultClass)}",
        "",
        "[session]",
        f"session_id = {session.session_id}",
        f"task_id = {session.task_id}",
        f"evaluator = {evaluator}",
        "",
        "[gate]",
        f"{GATE_FIELD} =",
        "",
        "[path_a]",
        *(f"{name} =" for name in PATH_A_FIELDS),
        "",
        "[path_b]",
        *(f"{name} =" for name in PATH_B_FIELDS),
        "",
        "[faults]",
        "",
        "[effort]",
        "band =",
        "notes =",
    ]
    return "\n".join(lines) + "\n"


def _read(text: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # type: ignore[assignment, method-assign]
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise FormInvalid("form", str(exc).splitlines()[0]) from exc
    for section in parser.sections():
        if section not in SECTIONS:
            raise FormInvalid(section, "unknown section")
    return parser


def _value(parser: configparser.ConfigParser, section: str, key: str) -> str:
    if not parser.has_section(section):
        return ""
    return parser.get(section, key, fallback="").strip()


def _bits(parser: configparser.ConfigParser, section: str, fields: tuple[str, ...]) -> dict[str, int] | None:
    """Criterion bits, or None when the whole section is blank."""
    if parser.has_section(section):
        for key in parser.options(section):
            if key not in fields:
                raise FormInvalid(f"{section}.{key}", "unknown criterion")
    raw = {name: _value(parser, section, name) for name in fields}
    if not any(raw.values()):
        return None
    bits = {}
    for name, value in raw.items():
        if value not in ("0", "1"):
            raise FormInvalid(f"{section}.{name}", f"expected 0 or 1, got {value!r}")
        bits[name] = int(value)
    return bits


def _faults(parser: configparser.ConfigParser) -> list[FaultNote]:
    if not parser.has_section("faults"):
        return []
    notes = []
    for key, value in parser.items("faults"):
        if not key.isdigit():
            raise FormInvalid(f"faults.{key}", "fault entries are numbered")
        match = FAULT_LINE.match(value.strip())
        if match is None:
            raise FormInvalid(f"faults.{key}", "expected '<fault_class>: <note>'")
        try:
            fault = FaultClass(match["fault"])
        except ValueError:
            raise FormInvalid(f"faults.{key}", f"unknown fault class {match['fault']}") from None
        notes.append(FaultNote(fault_class=fault, note=match["note"].strip()))
    return notes


def ingest_human_eval(text: str) -> EvaluationRecord:
    parser = _read(text)
    session_id = _value(parser, "session", "session_id")
    if not session_id:
        raise FormInvalid("session.session_id", "missing")
    evaluator = _value(parser, "session", "evaluator")
    if not evaluator:
        raise FormInvalid("session.evaluator", "missing")

    gate_text = _value(parser, "gate", GATE_FIELD).lower()
    if gate_text not in ("yes", "no"):
        raise FormInvalid(f"gate.{GATE_FIELD}", f"expected yes or no, got {gate_text!r}")
    gate = Verdict(gate_text)

    path_a = _bits(parser, "path_a", PATH_A_FIELDS)
    path_b = _bits(parser, "path_b", PATH_B_FIELDS)
    faults = _faults(parser)
    band_text = _value(parser, "effort", "band").lower()
    if gate is Verdict.YES:
        if path_a is None:
            raise FormInvalid("path_a", "a passing gate needs all five criteria")
        if path_b is not None:
            raise FormInvalid("path_b", "filled although the gate passed")
        if faults:
            raise FormInvalid("faults", "listed although the gate passed")
        if band_text:
            raise FormInvalid("effort.band", "set although the gate passed")
    else:
        if path_b is None:
            raise FormInvalid("path_b", "a failing gate needs all four criteria")
        if path_a is not None:
            raise FormInvalid("path_a", "filled although the gate failed")

    effort = None
    if band_text:
        try:
            effort = EffortBand(band_text)
        except ValueError:
            raise FormInvalid("effort.band", f"expected minor, moderate or major, got {band_text!r}") from None

    try:
        record = EvaluationRecord(
            session_id=session_id,
            evaluator=EvaluatorKind.HUMAN,
            evaluator_name=evaluator,
            gate=gate,
            path_a=path_a,
            path_b=path_b,
            fault_notes=faults,
            effort_band=effort,
            notes=_value(parser, "effort", "notes"),
        )
    except ValidationError as exc:
        raise FormInvalid("form", str(exc)) from exc
    logger.info("Ingested %s review of %s by %s", gate, session_id, evaluator)
    return record

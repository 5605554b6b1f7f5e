"""Ask the evaluator model for a yes/no verdict on a generated block."""

from __future__ import annotations

import logging
import re
from typing import TYPE_CHECKING

from cdlgen.exceptions import UnparseableVerdict
from cdlgen.models import EvaluationRecord, EvaluatorKind, GenerationSession, Pathway, Verdict
from cdlgen.services.prompts import control_task_prompt, load_template, render

if TYPE_CHECKING:
    from cdlgen.services.gateway import Gateway
    from cdlgen.services.tasks import ReferenceTask

logger = logging.getLogger(__name__)

EVALUATOR_ROLE = "evaluator"

TEMPLATES = {
    Pathway.TRACE_BASED: "evaluation_trace",
    Pathway.CODE_BASED: "evaluation_code",
}

FIRST_WORD = re.compile(r"^[\W_]*([A-Za-z]+)")


def parse_verdict(reply: str) -> Verdict:
    """``yes`` or ``no`` as the reply's first word, ignoring case, markup and punctuation."""
    match = FIRST_WORD.match(reply.strip())
    word = match[1].lower() if match else ""
    if word not in ("yes", "no"):
        raise UnparseableVerdict(reply)
    return Verdict(word)


def ai_record(session_id: str, model_id: str, gate: Verdict | None, notes: str = "") -> EvaluationRecord:
    return EvaluationRecord(
        session_id=session_id,
        evaluator=EvaluatorKind.AI,
        evaluator_name=model_id,
        gate=gate,
        notes=notes,
    )


def ai_evaluate(
    session: GenerationSession,
    pathway: Pathway | str,
    gateway: Gateway,
    task: ReferenceTask,
    *,
    trace_csv: str | None = None,
) -> EvaluationRecord:
    """One evaluator call on the session's final artifact.

    The trace pathway sends the simulated trace as CSV, the code pathway the
    source text. Raises UnparseableVerdict when the reply is neither yes nor no.
    """
    pathway = Pathway(pathway)
    artifact = session.final_artifact
    if artifact is None:
        msg = f"session {session.session_id} has no artifact to evaluate"
        raise ValueError(msg)
    values = {"task": control_task_prompt(task)}
    if pathway is Pathway.TRACE_BASED:
        if trace_csv is None:
            msg = "the trace pathway needs a simulated trace"
            raise ValueError(msg)
        values["trace"] = trace_csv.rstrip("\n")
    else:
        values["code_content"] = artifact.source
    bundle = render(load_template(TEMPLATES[pathway]), values)
    response = gateway.ask(EVALUATOR_ROLE, bundle.role_id, bundle.system_text, bundle.user_text)
    gate = parse_verdict(response.text)
    logger.info("Evaluator %s says %s for %s (%s)", response.model_id, gate, session.session_id, pathway)
    return ai_record(session.session_id, response.model_id, gate, notes=pathway.value)

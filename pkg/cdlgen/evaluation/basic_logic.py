"""Repeated generation of single logic blocks from the minimal and detailed prompts.

A trial compiles when the extracted code parses and the class, scope and
connection rules report no errors. Repeated trials only differ in live mode;
a cassette answers every repeat of the same prompt with the same reply.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING

from cdlgen.exceptions import EmptyCode, ModelicaParseError
from cdlgen.modelica import parse
from cdlgen.services.gateway import ModelMetrics, extract_code, metrics_summary
from cdlgen.services.prompts import LogicBlock, PromptVariant, basic_logic_prompt
from cdlgen.services.validator import validate

if TYPE_CHECKING:
    from cdlgen.services.gateway import Gateway
    from cdlgen.services.library_index import LibraryIndex

logger = logging.getLogger(__name__)

GENERATOR_ROLE = "generator"
COMPILE_RULES = ["R1", "R2", "R3"]


@dataclass(frozen=True)
class TrialOutcome:
    trial: int
    compiled: bool
    error: str | None = None


@dataclass(frozen=True)
class BasicLogicRun:
    block: LogicBlock
    variant: PromptVariant
    outcomes: tuple[TrialOutcome, ...]
    metrics: dict[str, ModelMetrics]

    @property
    def success_rate(self) -> float:
        if not self.outcomes:
            return 0.0
        return sum(o.compiled for o in self.outcomes) / len(self.outcomes)

    def as_text(self) -> str:
        lines = [f"{self.block} {self.variant}: {self.success_rate * 100:.0f}% of {len(self.outcomes)} trials compiled"]
        lines.extend(f"  trial {o.trial}: {o.error}" for o in self.outcomes if not o.compiled)
        for model_id, m in self.metrics.items():
            lines.append(
                f"  {model_id}: {m.calls} calls, {m.mean_completion_tokens:.1f} completion tokens/call, "
                f"latency {m.latency_mean:.2f}s [{m.latency_min:.2f}, {m.latency_max:.2f}]"
            )
        return "\n".join(lines) + "\n"


def compile_check(reply: str, index: LibraryIndex) -> str | None:
    """None when the reply's code compiles, otherwise the first problem."""
    try:
        block = parse(extract_code(reply))
    except (EmptyCode, ModelicaParseError) as exc:
        return str(exc)
    report = validate(block, index, rules=COMPILE_RULES)
    if not report.passed:
        return report.errors[0].message
    return None


def run_basic_logic(
    block: LogicBlock | str,
    variant: PromptVariant | str,
    trials: int,
    gateway: Gateway,
    index: LibraryIndex,
) -> BasicLogicRun:
    if trials < 1:
        msg = f"trials must be at least 1, got {trials}"
        raise ValueError(msg)
    block, variant = LogicBlock(block), PromptVariant(variant)
    bundle = basic_logic_prompt(block, variant)
    outcomes = []
    responses = []
    for trial in range(1, trials + 1):
        response = gateway.ask(GENERATOR_ROLE, bundle.role_id, bundle.system_text, bundle.user_text)
        responses.append(response)
        error = compile_check(response.text, index)
        outcomes.append(TrialOutcome(trial, compiled=error is None, error=error))
        logger.debug("%s %s trial %d: %s", block, variant, trial, error or "compiled")
    run = BasicLogicRun(block, variant, tuple(outcomes), metrics_summary(responses))
    logger.info("%s %s: %.0f%% compiled", block, variant, run.success_rate * 100)
    return run

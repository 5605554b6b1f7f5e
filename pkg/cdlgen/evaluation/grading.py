"""Four-level grade of a candidate block: does it parse, resolve, wire up and work."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import IntEnum
from typing import TYPE_CHECKING

from cdlgen.evaluation.oracles import check_conformance, task_oracle
from cdlgen.exceptions import ElaborationError, ModelicaParseError, SimulationError
from cdlgen.modelica import parse
from cdlgen.services.validator import validate

if TYPE_CHECKING:
    from cdlgen.models import Diagnostic
    from cdlgen.services.library_index import LibraryIndex
    from cdlgen.services.tasks import ReferenceTask

logger = logging.getLogger(__name__)

SEMANTIC_RULES = ("R1", "R2", "R3")
STRUCTURE_RULES = ("R4", "R5")


class GradeLevel(IntEnum):
    NONE = 0
    SYNTAX = 1
    SEMANTIC = 2
    STRUCTURE = 3
    WORK = 4


@dataclass(frozen=True)
class Grade:
    level: GradeLevel
    # instance count, a measure of granularity
    block_count: int | None = None
    diagnostics: tuple[Diagnostic, ...] = ()
    failures: tuple[str, ...] = ()

    def as_text(self) -> str:
        blocks = "-" if self.block_count is None else str(self.block_count)
        lines = [f"grade {self.level.name.lower()} ({int(self.level)}/4), blocks {blocks}"]
        lines.extend(d.as_line() for d in self.diagnostics)
        lines.extend(f"oracle\t{name}" for name in self.failures)
        return "\n".join(lines) + "\n"


def grade_candidate(
    source: str,
    index: LibraryIndex,
    task: ReferenceTask | None = None,
    *,
    step_size: float = 10.0,
    horizon: float = 3600.0,
) -> Grade:
    """Highest level the candidate clears; ``work`` needs a task whose oracle passes."""
    try:
        block = parse(source)
    except ModelicaParseError as exc:
        logger.debug("Candidate does not parse: %s", exc)
        return Grade(GradeLevel.NONE, failures=(str(exc),))
    count = len(block.instances)

    semantic = validate(block, index, rules=list(SEMANTIC_RULES), step_size=step_size)
    if not semantic.passed:
        return Grade(GradeLevel.SYNTAX, count, tuple(semantic.errors))
    structure = validate(block, index, rules=list(STRUCTURE_RULES), step_size=step_size)
    if not structure.passed or task is None:
        level = GradeLevel.SEMANTIC if not structure.passed else GradeLevel.STRUCTURE
        return Grade(level, count, tuple(structure.errors))

    try:
        result = check_conformance(task_oracle(task), block, index, step_size=step_size, horizon=horizon)
    except (ElaborationError, SimulationError) as exc:
        return Grade(GradeLevel.STRUCTURE, count, failures=(str(exc),))
    if not result.passed:
        return Grade(GradeLevel.STRUCTURE, count, failures=tuple(result.failures))
    return Grade(GradeLevel.WORK, count)

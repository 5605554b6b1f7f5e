"""Aggregate review records into success rates and agreement figures."""

from __future__ import annotations

import csv
import io
import logging
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from statistics import fmean, pstdev

from cdlgen.evaluation.forms import PATH_A_FIELDS, PATH_B_FIELDS
from cdlgen.models import EvaluationRecord, EvaluatorKind, GenerationSession, Verdict

logger = logging.getLogger(__name__)

NO_DATA = "-"

CSV_COLUMNS = ("session_id", "task_id", "status", "human_gate", "ai_gate", "score", "success")


@dataclass(frozen=True)
class SessionRow:
    session_id: str
    task_id: str
    status: str
    human_gate: str
    ai_gate: str
    score: float | None
    success: bool


@dataclass(frozen=True)
class AggregateReport:
    rows: tuple[SessionRow, ...]
    criterion_rates: dict[str, float]
    score_mean: float | None
    score_pstdev: float | None
    fault_distribution: dict[str, int]
    effort_distribution: dict[str, int]
    # (human, ai) verdict pairs over sessions where both are known
    agreement: dict[tuple[str, str], int] = field(default_factory=dict)
    disagreements: tuple[str, ...] = ()
    no_data: int = 0

    @property
    def sessions(self) -> int:
        return len(self.rows)

    @property
    def successes(self) -> int:
        return sum(row.success for row in self.rows)

    @property
    def success_rate(self) -> float:
        return self.successes / self.sessions if self.rows else 0.0

    def as_text(self) -> str:
        lines = [
            f"sessions        {self.sessions}",
            f"successes       {self.successes}",
            f"success rate    {self.success_rate * 100:.1f}%",
        ]
        if self.score_mean is not None:
            lines.append(f"score           {self.score_mean:.3f} (pstdev {self.score_pstdev:.3f})")
        if self.criterion_rates:
            lines.append("")
            lines.append("criterion pass rates")
            lines.extend(f"  {name:<34}{rate * 100:6.1f}%" for name, rate in self.criterion_rates.items())
        for title, counts in (("fault classes", self.fault_distribution), ("effort bands", self.effort_distribution)):
            if counts:
                lines.append("")
                lines.append(title)
                lines.extend(f"  {name:<34}{count:6d}" for name, count in counts.items())
        lines.append("")
        lines.append("human/ai agreement      ai yes   ai no")
        for human in (Verdict.YES, Verdict.NO):
            yes = self.agreement.get((human, Verdict.YES), 0)
            no = self.agreement.get((human, Verdict.NO), 0)
            lines.append(f"  human {human:<16}{yes:7d}{no:8d}")
        lines.append(f"  no data {self.no_data}")
        lines.extend(f"  disagreement: {session_id}" for session_id in self.disagreements)
        lines.append("")
        lines.append("session".ljust(28) + "task  status                 human  ai     score  success")
        for row in self.rows:
            score = NO_DATA if row.score is None else f"{row.score:.2f}"
            lines.append(
                f"{row.session_id:<28}{row.task_id:<6}{row.status:<23}{row.human_gate:<7}{row.ai_gate:<7}"
                f"{score:<7}{'yes' if row.success else 'no'}"
            )
        return "\n".join(lines) + "\n"

    def as_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in self.rows:
            score = "" if row.score is None else f"{row.score:.4f}"
            writer.writerow(
                [row.session_id, row.task_id, row.status, row.human_gate, row.ai_gate, score, int(row.success)]
            )
        return buffer.getvalue()


def human_verdict(records: Sequence[EvaluationRecord]) -> Verdict | None:
    """Shared gate of all human records, or None when there are none or they split."""
    gates = {r.gate for r in records if r.evaluator is EvaluatorKind.HUMAN}
    if len(gates) != 1:
        return None
    return gates.pop()


def ai_verdict(records: Sequence[EvaluationRecord]) -> Verdict | None:
    """Gate of the latest AI record; an unparseable verdict counts as no data."""
    ai = [r for r in records if r.evaluator is EvaluatorKind.AI]
    return ai[-1].gate if ai else None


def session_success(session: GenerationSession, records: Sequence[EvaluationRecord]) -> bool:
    humans = [r for r in records if r.evaluator is EvaluatorKind.HUMAN]
    return session.converged and bool(humans) and all(r.gate is Verdict.YES for r in humans)


def aggregate_report(records: Iterable[EvaluationRecord], sessions: Iterable[GenerationSession]) -> AggregateReport:
    by_session: dict[str, list[EvaluationRecord]] = {}
    for record in records:
        by_session.setdefault(record.session_id, []).append(record)

    rows = []
    agreement: Counter[tuple[str, str]] = Counter()
    disagreements = []
    no_data = 0
    for session in sorted(sessions, key=lambda s: s.session_id):
        own = by_session.get(session.session_id, [])
        human, ai = human_verdict(own), ai_verdict(own)
        if human is None or ai is None:
            no_data += 1
        else:
            agreement[(human, ai)] += 1
            if human is not ai:
                disagreements.append(session.session_id)
        scores = [r.score for r in own if r.evaluator is EvaluatorKind.HUMAN and r.score is not None]
        rows.append(
            SessionRow(
                session_id=session.session_id,
                task_id=session.task_id,
                status=session.status.value,
                human_gate=human.value if human else NO_DATA,
                ai_gate=ai.value if ai else NO_DATA,
                score=fmean(scores) if scores else None,
                success=session_success(session, own),
            )
        )

    humans = [r for rs in by_session.values() for r in rs if r.evaluator is EvaluatorKind.HUMAN]
    criterion_rates = {}
    for name in (*PATH_A_FIELDS, *PATH_B_FIELDS):
        bits = [bits[name] for r in humans for bits in (r.path_a, r.path_b) if bits and name in bits]
        if bits:
            criterion_rates[name] = fmean(bits)
    scores = [r.score for r in humans if r.score is not None]
    faults = Counter(note.fault_class.value for r in humans for note in r.fault_notes)
    efforts = Counter(r.effort_band.value for r in humans if r.effort_band is not None)

    report = AggregateReport(
        rows=tuple(rows),
        criterion_rates=criterion_rates,
        score_mean=fmean(scores) if scores else None,
        score_pstdev=pstdev(scores) if scores else None,
        fault_distribution=dict(sorted(faults.items())),
        effort_distribution=dict(sorted(efforts.items())),
        agreement=dict(agreement),
        disagreements=tuple(disagreements),
        no_data=no_data,
    )
    logger.info("Aggregated %d sessions: %d successes", report.sessions, report.successes)
    return report

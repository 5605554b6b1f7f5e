from __future__ import annotations

from enum import StrEnum
from statistics import fmean
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, model_validator


class Severity(StrEnum):
    ERROR = "error"
    WARNING = "warning"


class FaultClass(StrEnum):
    """Fault taxonomy shared by the validator, fault seeding and review forms."""

    DUPLICATE_PATH = "duplicate_path"
    INVERTED_DIRECTION = "inverted_direction"
    UNKNOWN_CLASS = "unknown_class"
    BROKEN_CONNECTION = "broken_connection"
    VERSION_DRIFT = "version_drift"
    SCOPE_VIOLATION = "scope_violation"
    TYPE_MISMATCH = "type_mismatch"
    INTERFACE_MISMATCH = "interface_mismatch"


class SessionStatus(StrEnum):
    CONVERGED = "converged"
    FAILED_MAX_ITERATIONS = "failed_max_iterations"
    FAILED_UNRECOVERABLE = "failed_unrecoverable"


class Provenance(StrEnum):
    HARD_RULE = "hard_rule"
    FUZZY = "fuzzy"


class Verdict(StrEnum):
    YES = "yes"
    NO = "no"


class EvaluatorKind(StrEnum):
    HUMAN = "human"
    AI = "ai"


class EffortBand(StrEnum):
    MINOR = "minor"
    MODERATE = "moderate"
    MAJOR = "major"


class Pathway(StrEnum):
    TRACE_BASED = "trace_based"
    CODE_BASED = "code_based"


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


class Diagnostic(BaseModel):
    model_config = ConfigDict(frozen=True)

    rule_id: str
    severity: Severity
    location: str
    message: str
    fault_class: FaultClass | None = None
    line: int | None = None
    suggestion: str | None = None

    def as_line(self) -> str:
        fault = self.fault_class.value if self.fault_class else "-"
        where = self.location if self.line is None else f"{self.location}@{self.line}"
        return f"{self.severity}\t{self.rule_id}\t{fault}\t{where}\t{self.message}"


class ValidationReport(BaseModel):
    diagnostics: list[Diagnostic] = Field(default_factory=list)
    checked_rules: list[str] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.errors

    @property
    def errors(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity is Severity.ERROR]

    @property
    def warnings(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity is Severity.WARNING]

    def fault_classes(self, severity: Severity | None = Severity.ERROR) -> set[FaultClass]:
        return {
            d.fault_class
            for d in self.diagnostics
            if d.fault_class is not None and (severity is None or d.severity is severity)
        }

    def as_text(self) -> str:
        return "".join(d.as_line() + "\n" for d in self.diagnostics)


# ---------------------------------------------------------------------------
# Sessions
# ---------------------------------------------------------------------------


class SelectedModule(BaseModel):
    fqn: str
    provenance: Provenance
    query: str


class TranscriptEntry(BaseModel):
    role_id: str
    model_id: str
    request_key: str
    system_text: str
    user_text: str
    max_tokens: int
    temperature: float
    text: str
    prompt_tokens: int
    completion_tokens: int
    latency: float
    provider: str
    from_replay: bool
    tokens_estimated: bool = False


class Artifact(BaseModel):
    iteration: int
    source: str
    parse_error: str | None = None
    report: ValidationReport | None = None
    runtime_error: str | None = None
    oracle_pass: bool | None = None
    oracle_failures: list[str] = Field(default_factory=list)
    trace_file: str | None = None
    compile_log: str | None = None
    # verdict of an external toolchain; the builtin report stays for diagnostics
    external_passed: bool | None = None

    @property
    def passed_compile(self) -> bool:
        if self.parse_error is not None:
            return False
        if self.external_passed is not None:
            return self.external_passed
        return self.report is not None and self.report.passed

    @property
    def passed_simulate(self) -> bool:
        return self.passed_compile and self.runtime_error is None and self.trace_file is not None


class LoopCounters(BaseModel):
    compile: int = 0
    simulate: int = 0
    evaluate: int = 0


class FaultNote(BaseModel):
    fault_class: FaultClass
    note: str = ""


class EvaluationRecord(BaseModel):
    """One filled review form, human or AI.

    Human records follow the two-path rubric: a passing gate carries the five
    quality bits, a failing gate the four fallback bits. AI records carry the
    gate only.
    """

    session_id: str
    evaluator: EvaluatorKind
    evaluator_name: str
    gate: Verdict | None = None
    path_a: dict[str, int] | None = None
    path_b: dict[str, int] | None = None
    fault_notes: list[FaultNote] = Field(default_factory=list)
    effort_band: EffortBand | None = None
    notes: str = ""

    @model_validator(mode="after")
    def _check_paths(self) -> EvaluationRecord:
        for bits in (self.path_a, self.path_b):
            if bits and any(v not in (0, 1) for v in bits.values()):
                raise ValueError("criterion bits must be 0 or 1")
        if self.evaluator is EvaluatorKind.AI:
            if self.path_a is not None or self.path_b is not None:
                raise ValueError("AI records carry no criterion bits")
            return self
        if self.gate is Verdict.YES and (self.path_a is None or self.path_b is not None):
            raise ValueError("gate=yes requires path_a bits and no path_b bits")
        if self.gate is Verdict.NO and (self.path_b is None or self.path_a is not None):
            raise ValueError("gate=no requires path_b bits and no path_a bits")
        if self.effort_band is not None and self.gate is not Verdict.NO:
            raise ValueError("effort band is only recorded for a failing gate")
        return self

    @property
    def score(self) -> float | None:
        bits = self.path_a if self.path_a is not None else self.path_b
        if not bits:
            return None
        return fmean(bits.values())


class GenerationSession(BaseModel):
    session_id: str
    task_id: str
    config_snapshot: dict[str, Any]
    selected_modules: list[SelectedModule] = Field(default_factory=list)
    transcript: list[TranscriptEntry] = Field(default_factory=list)
    artifacts: list[Artifact] = Field(default_factory=list)
    status: SessionStatus = SessionStatus.FAILED_UNRECOVERABLE
    cause: str | None = None
    counters: LoopCounters = Field(default_factory=LoopCounters)
    metrics: dict[str, Any] = Field(default_factory=dict)
    notes: list[str] = Field(default_factory=list)
    evaluations: list[EvaluationRecord] = Field(default_factory=list)

    @property
    def final_artifact(self) -> Artifact | None:
        return self.artifacts[-1] if self.artifacts else None

    @property
    def converged(self) -> bool:
        return self.status is SessionStatus.CONVERGED


class CostBenefitReport(BaseModel):
    baseline_hours: float
    assisted_hours: float
    rate: float
    n_modules: int
    savings_per_module: float
    savings_percent: float
    portfolio_savings: float

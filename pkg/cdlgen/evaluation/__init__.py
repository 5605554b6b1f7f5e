"""Conformance oracles, review forms, AI verdicts and aggregate reporting."""

from cdlgen.evaluation.ai_eval import ai_evaluate, parse_verdict
from cdlgen.evaluation.cost import cost_benefit, cost_benefit_range
from cdlgen.evaluation.forms import human_eval_form, ingest_human_eval
from cdlgen.evaluation.oracles import ConformanceOracle, ConformanceResult, check_conformance, task_oracle
from cdlgen.evaluation.registry import available_oracles, create_oracle, register_oracle
from cdlgen.evaluation.report import AggregateReport, aggregate_report

__all__ = [
    "AggregateReport",
    "ConformanceOracle",
    "ConformanceResult",
    "ai_evaluate",
    "aggregate_report",
    "available_oracles",
    "check_conformance",
    "cost_benefit",
    "cost_benefit_range",
    "create_oracle",
    "human_eval_form",
    "ingest_human_eval",
    "parse_verdict",
    "register_oracle",
    "task_oracle",
]

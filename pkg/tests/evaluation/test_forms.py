from __future__ import annotations

import pytest

from cdlgen.evaluation import human_eval_form, ingest_human_eval
from cdlgen.evaluation.forms import PATH_A_FIELDS, PATH_B_FIELDS
from cdlgen.exceptions import FormInvalid
from cdlgen.models import Artifact, EffortBand, EvaluatorKind, FaultClass, GenerationSession, SessionStatus, Verdict


def _session() -> GenerationSession:
    return GenerationSession(
        session_id="task4-0123456789",
        task_id="4",
        config_snapshot={},
        artifacts=[Artifact(iteration=2, source="block Task4\nend Task4;\n", oracle_pass=True)],
        status=SessionStatus.CONVERGED,
    )


def _fill(form: str, answers: dict[str, str]) -> str:
    for key, value in answers.items():
        assert f"\n{key} =\n" in form, key
        form = form.replace(f"\n{key} =\n", f"\n{key} = {value}\n", 1)
    return form


def _passing(last_bit: str = "1") -> str:
    answers = {"behaves_correctly": "yes", **dict.fromkeys(PATH_A_FIELDS, "1")}
    answers[PATH_A_FIELDS[-1]] = last_bit
    return _fill(human_eval_form(_session(), "reviewer-1"), answers)


def _failing() -> str:
    answers = {"behaves_correctly": "no", **dict.fromkeys(PATH_B_FIELDS, "0"), "band": "moderate"}
    answers["simulation_syntax_validity"] = "1"
    form = _fill(human_eval_form(_session(), "reviewer-2"), answers)
    return form.replace("[faults]\n", "[faults]\n1 = inverted_direction: valve closes on low flow\n")


def test_form_names_session_and_artifact() -> None:
    form = human_eval_form(_session(), "reviewer-1")

    assert "session_id = task4-0123456789" in form
    assert "artifacts/iter_2.mo, oracle pass" in form
    assert "evaluator = reviewer-1" in form


def test_form_needs_an_artifact() -> None:
    session = _session().model_copy(update={"artifacts": []})

    with pytest.raises(FormInvalid):
        human_eval_form(session)


def test_passing_gate_scores_quality_criteria() -> None:
    record = ingest_human_eval(_passing())

    assert record.evaluator is EvaluatorKind.HUMAN
    assert record.evaluator_name == "reviewer-1"
    assert record.gate is Verdict.YES
    assert record.path_b is None
    assert record.score == 1.0


def test_one_missed_criterion_scores_four_fifths() -> None:
    assert ingest_human_eval(_passing(last_bit="0")).score == pytest.approx(0.8)


def test_failing_gate_records_faults_and_effort() -> None:
    record = ingest_human_eval(_failing())

    assert record.gate is Verdict.NO
    assert record.path_b == {
        "simulation_syntax_validity": 1,
        "semantic_correctness": 0,
        "logical_soundness": 0,
        "interface_appropriateness": 0,
    }
    assert record.score == 0.25
    assert [(n.fault_class, n.note) for n in record.fault_notes] == [
        (FaultClass.INVERTED_DIRECTION, "valve closes on low flow")
    ]
    assert record.effort_band is EffortBand.MODERATE


def test_unanswered_gate() -> None:
    with pytest.raises(FormInvalid, match="gate.behaves_correctly"):
        ingest_human_eval(human_eval_form(_session(), "reviewer-1"))


def test_missing_evaluator() -> None:
    with pytest.raises(FormInvalid, match="session.evaluator"):
        ingest_human_eval(_passing().replace("evaluator = reviewer-1", "evaluator ="))


def test_passing_gate_with_fallback_criteria() -> None:
    form = _passing().replace("\nsemantic_correctness =\n", "\nsemantic_correctness = 1\n")

    with pytest.raises(FormInvalid, match="path_b"):
        ingest_human_eval(form)


def test_partial_criteria() -> None:
    form = _passing().replace(f"{PATH_A_FIELDS[0]} = 1", f"{PATH_A_FIELDS[0]} =")

    with pytest.raises(FormInvalid, match=PATH_A_FIELDS[0]):
        ingest_human_eval(form)


def test_unknown_fault_class() -> None:
    form = _failing().replace("inverted_direction:", "wrong_units:")

    with pytest.raises(FormInvalid, match="unknown fault class wrong_units"):
        ingest_human_eval(form)


def test_unknown_section() -> None:
    with pytest.raises(FormInvalid, match="unknown section"):
        ingest_human_eval(_passing() + "\n[extra]\nkey = 1\n")

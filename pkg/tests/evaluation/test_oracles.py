from __future__ import annotations

from typing import TYPE_CHECKING

import pytest

from cdlgen.config import data_path
from cdlgen.evaluation import available_oracles, check_conformance, create_oracle, task_oracle
from cdlgen.exceptions import ConfigError
from cdlgen.modelica import parse, parse_file
from cdlgen.services.tasks import load_reference_task

if TYPE_CHECKING:
    from cdlgen.services.library_index import LibraryIndex
    from cdlgen.services.tasks import ReferenceTask


def test_shipped_oracles() -> None:
    assert available_oracles() == ["O1", "O2", "O3", "O4", "O5"]


def test_unknown_oracle_lists_available(task4: ReferenceTask) -> None:
    with pytest.raises(KeyError, match="Available: O1, O2, O3, O4, O5"):
        create_oracle("O9", task4)


def test_unknown_option_is_a_config_error(task4: ReferenceTask) -> None:
    with pytest.raises(ConfigError):
        task_oracle(task4, {"seeed": 1})


@pytest.mark.parametrize("task_id", ["1", "2", "3", "4", "5"])
def test_reference_module_conforms(library: LibraryIndex, task_id: str) -> None:
    task = load_reference_task(task_id)
    block = parse_file(data_path("modules", task.reference_module))

    result = check_conformance(task_oracle(task), block, library)

    assert result.passed, result.as_text()
    assert result.trace.n_steps == 361


def test_generated_task4_matches_reference_verdicts(library: LibraryIndex, task4: ReferenceTask) -> None:
    oracle = task_oracle(task4)
    generated = check_conformance(oracle, parse_file(data_path("modules", "task4_ai.mo")), library)
    reference = check_conformance(oracle, parse_file(data_path("modules", task4.reference_module)), library)

    assert generated.passed, generated.as_text()
    assert [v.holds for v in generated.verdicts] == [v.holds for v in reference.verdicts]
    assert set(generated.trace.probe("yChiWatResReq")) == {0, 1, 2, 3}
    assert set(generated.trace.probe("yChiPlaReq")) == {0, 1}


def test_swapped_subtraction_fails_request_tiers(library: LibraryIndex, task4: ReferenceTask) -> None:
    source = data_path("modules", "task4_ai.mo").read_text(encoding="utf-8")
    source = source.replace("connect(TAirSup, sub1.u1);", "connect(TAirSup, sub1.u2);")
    source = source.replace("connect(TAirSupSet, sub1.u2);", "connect(TAirSupSet, sub1.u1);")

    result = check_conformance(task_oracle(task4), parse(source), library)

    assert not result.passed
    assert "three_requests_after_sustained_high_excess" in result.failures
    assert "requests_in_range" not in result.failures


def test_probe_trace_is_seeded(task4: ReferenceTask) -> None:
    first = task_oracle(task4, {"seed": 3}).probe_trace(10, 3600)
    again = task_oracle(task4, {"seed": 3}).probe_trace(10, 3600)
    other = task_oracle(task4, {"seed": 4}).probe_trace(10, 3600)

    assert first == again
    assert first.series != other.series


def test_probe_levels_stay_clear_of_thresholds(task4: ReferenceTask) -> None:
    trace = task_oracle(task4).probe_trace(10, 3600)

    pairs = zip(trace.probe("TAirSup"), trace.probe("TAirSupSet"), strict=True)
    excess = {round(float(t) - float(s), 6) for t, s in pairs}
    assert not excess & {3.0, 2.9, 2.0, 1.9}
    assert not {float(v) for v in trace.probe("uCooCoi")} & {0.95, 0.85, 0.10}


def test_missing_output_fails_every_predicate(library: LibraryIndex, task4: ReferenceTask) -> None:
    oracle = task_oracle(task4)
    trace = check_conformance(oracle, parse_file(data_path("modules", "task4_ai.mo")), library).trace

    verdicts = oracle.evaluate(trace.select(["TAirSup", "TAirSupSet", "uCooCoi", "yChiWatResReq"]))

    assert len(verdicts) == len(oracle.predicates)
    assert not any(v.holds for v in verdicts)
    assert verdicts[0].detail == "trace has no yChiPlaReq"

from __future__ import annotations

from typing import TYPE_CHECKING

import pytest

from cdlgen.config import data_path
from cdlgen.models import FaultClass, Severity
from cdlgen.modelica import ModelicaBlock, parse, parse_file
from cdlgen.services.tasks import load_reference_task
from cdlgen.services.validator import validate

if TYPE_CHECKING:
    from cdlgen.services.library_index import LibraryIndex
    from cdlgen.services.tasks import ReferenceTask


@pytest.fixture(scope="module")
def task4_source() -> str:
    return data_path("modules", "task4_ai.mo").read_text(encoding="utf-8")


def _edited(source: str, old: str, new: str) -> ModelicaBlock:
    assert old in source
    return parse(source.replace(old, new))


def test_generated_task4_block_passes(library: LibraryIndex, task4: ReferenceTask, task4_source: str) -> None:
    report = validate(parse(task4_source), library, task4)

    assert report.passed, report.as_text()
    assert report.checked_rules == ["R1", "R2", "R3", "R4", "R5", "R6", "R7"]


def test_reference_modules_pass(library: LibraryIndex) -> None:
    for task_id in ("1", "2", "3", "4", "5"):
        task = load_reference_task(task_id)
        block = parse_file(data_path("modules", task.reference_module))

        report = validate(block, library, task)

        assert report.passed, f"task {task_id}: {report.as_text()}"


def test_misspelled_class_is_unknown(library: LibraryIndex, task4_source: str) -> None:
    block = _edited(task4_source, "Reals.Subtract sub1", "Reals.Substract sub1")

    report = validate(block, library)

    first = report.errors[0]
    assert (first.rule_id, first.location, first.fault_class) == ("R1", "sub1", FaultClass.UNKNOWN_CLASS)
    assert "Buildings.Controls.OBC.CDL.Reals.Substract" in first.message


def test_old_package_name_is_a_warning(library: LibraryIndex, task4_source: str) -> None:
    block = _edited(task4_source, "Reals.Subtract sub1", "Continuous.Subtract sub1")

    report = validate(block, library)

    assert report.passed
    (warning,) = [d for d in report.warnings if d.rule_id == "R1"]
    assert warning.fault_class is FaultClass.VERSION_DRIFT
    assert warning.suggestion == "Buildings.Controls.OBC.CDL.Reals.Subtract"


def test_class_outside_cdl_is_out_of_scope(library: LibraryIndex, task4_source: str) -> None:
    block = _edited(task4_source, "Buildings.Controls.OBC.CDL.Logical.Not not3K", "Modelica.Blocks.Math.Not not3K")

    report = validate(block, library)

    scope = [d for d in report.errors if d.rule_id == "R2"]
    assert [d.location for d in scope] == ["not3K"]
    assert scope[0].fault_class is FaultClass.SCOPE_VIOLATION


def test_allowlisted_standard_class_is_in_scope(library: LibraryIndex, task4_source: str) -> None:
    block = _edited(task4_source, "Buildings.Controls.OBC.CDL.Logical.Not not3K", "Modelica.Blocks.Logical.Not not3K")

    report = validate(block, library, rules=["R1", "R2"])

    assert report.passed


def test_real_into_boolean_input(library: LibraryIndex, task4_source: str) -> None:
    block = _edited(task4_source, "connect(hysValPosPla.y, swiChiPla.u2);", "connect(uCooCoi, swiChiPla.u2);")

    report = validate(block, library)

    (mismatch,) = [d for d in report.errors if d.rule_id == "R3"]
    assert mismatch.fault_class is FaultClass.TYPE_MISMATCH
    assert "joins Real with Boolean" in mismatch.message
    assert any(d.rule_id == "R4" and d.location == "hysValPosPla" for d in report.warnings)


def test_output_to_output(library: LibraryIndex, task4_source: str) -> None:
    block = _edited(task4_source, "connect(sub1.y, greThe2K.u);", "connect(sub1.y, greThe3K.y);")

    report = validate(block, library)

    assert any(d.rule_id == "R3" and "joins two outputs" in d.message for d in report.errors)


def test_unconnected_input(library: LibraryIndex, task4_source: str) -> None:
    block = _edited(task4_source, "connect(TAirSupSet, sub1.u2);", "")

    report = validate(block, library, rules=["R4"])

    (error,) = report.errors
    assert (error.location, error.message) == ("sub1.u2", "input is not connected")
    assert error.fault_class is FaultClass.BROKEN_CONNECTION


def test_second_driver_for_one_input(library: LibraryIndex, task4_source: str) -> None:
    block = _edited(
        task4_source,
        "connect(intCon1.y, swiChiPla.u1);",
        "connect(intCon1.y, swiChiPla.u1);\nconnect(intCon2.y, swiChiPla.u1);",
    )

    report = validate(block, library, rules=["R5"])

    (error,) = report.errors
    assert error.location == "swiChiPla.u1"
    assert error.message == "driven by 2 sources: intCon1.y, intCon2.y"


def test_interface_must_match_task(library: LibraryIndex, task4_source: str) -> None:
    task1 = load_reference_task("1")

    report = validate(parse(task4_source), library, task1, rules=["R6"])

    locations = {d.location for d in report.errors}
    assert {"yChiWatResReq", "yChiPlaReq"} <= locations
    assert all(d.fault_class is FaultClass.INTERFACE_MISMATCH for d in report.errors)


def test_swapped_operands_invert_direction(library: LibraryIndex, task4: ReferenceTask, task4_source: str) -> None:
    source = task4_source.replace("connect(TAirSup, sub1.u1);", "connect(TAirSup, sub1.u2);")
    block = _edited(source, "connect(TAirSupSet, sub1.u2);", "connect(TAirSupSet, sub1.u1);")

    report = validate(block, library, task4)

    (error,) = report.errors
    assert (error.rule_id, error.location) == ("R7", "yChiWatResReq")
    assert error.fault_class is FaultClass.INVERTED_DIRECTION
    assert "should rise" in error.message


def test_diagnostics_sorted_by_rule_then_location(library: LibraryIndex, task4_source: str) -> None:
    source = task4_source.replace("connect(TAirSupSet, sub1.u2);", "")
    block = _edited(source, "Reals.Subtract sub1", "Reals.Substract sub1")

    report = validate(block, library)

    keys = [d.rule_id for d in report.diagnostics]
    assert keys == sorted(keys)
    assert report.diagnostics[0].severity is Severity.ERROR

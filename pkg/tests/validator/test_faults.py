from __future__ import annotations

from typing import TYPE_CHECKING

import pytest

from cdlgen.config import data_path
from cdlgen.exceptions import NotInjectable
from cdlgen.models import FaultClass
from cdlgen.modelica import ModelicaBlock, parse_file
from cdlgen.services.faults import seed_fault
from cdlgen.services.validator import validate

if TYPE_CHECKING:
    from cdlgen.services.library_index import LibraryIndex
    from cdlgen.services.tasks import ReferenceTask


@pytest.fixture(scope="module")
def task4_block() -> ModelicaBlock:
    return parse_file(data_path("modules", "task4_ai.mo"))


@pytest.fixture(scope="module")
def bypass_block() -> ModelicaBlock:
    return parse_file(data_path("modules", "t2_bypass_valve.mo"))


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_removed_connect_is_detected(library: LibraryIndex, task4_block: ModelicaBlock, seed: int) -> None:
    mutated, injection = seed_fault(task4_block, FaultClass.BROKEN_CONNECTION, seed)

    assert len(mutated.connects) == len(task4_block.connects) - 1
    report = validate(mutated, library)
    assert any(
        d.rule_id == "R4" and d.fault_class is FaultClass.BROKEN_CONNECTION and d.location == injection.location
        for d in report.errors
    )


def test_unknown_class_is_detected(library: LibraryIndex, task4_block: ModelicaBlock) -> None:
    mutated, injection = seed_fault(task4_block, "unknown_class", 7)

    report = validate(mutated, library)

    (error,) = [d for d in report.errors if d.rule_id == "R1"]
    assert error.location == injection.location
    assert error.fault_class is FaultClass.UNKNOWN_CLASS


def test_version_drift_is_a_warning(library: LibraryIndex, task4_block: ModelicaBlock) -> None:
    mutated, injection = seed_fault(task4_block, FaultClass.VERSION_DRIFT, 0)

    assert "Continuous" in injection.description
    report = validate(mutated, library)
    assert report.passed
    assert [d.location for d in report.warnings if d.fault_class is FaultClass.VERSION_DRIFT] == [injection.location]


def test_swapped_subtraction_is_detected(
    library: LibraryIndex, task4: ReferenceTask, task4_block: ModelicaBlock
) -> None:
    mutated, injection = seed_fault(task4_block, FaultClass.INVERTED_DIRECTION, 0)

    assert injection.location == "sub1"
    report = validate(mutated, library, task4)
    assert [d.fault_class for d in report.errors] == [FaultClass.INVERTED_DIRECTION]


def test_twin_controller_is_detected(library: LibraryIndex, bypass_block: ModelicaBlock) -> None:
    mutated, injection = seed_fault(bypass_block, FaultClass.DUPLICATE_PATH, 0)

    assert mutated.instance("conPIDup") is not None
    assert injection.location == "yValPos"
    report = validate(mutated, library)
    duplicates = [d for d in report.errors if d.fault_class is FaultClass.DUPLICATE_PATH]
    assert {d.location for d in duplicates} == {"yValPos"}


def test_flipped_controller_action(bypass_block: ModelicaBlock) -> None:
    mutated, injection = seed_fault(bypass_block, FaultClass.INVERTED_DIRECTION, 0)

    assert injection.description == "conPI.reverseActing true -> false"
    assert mutated.instance("conPI").modifier("reverseActing") == "false"


def test_duplicate_path_needs_a_controller(task4_block: ModelicaBlock) -> None:
    with pytest.raises(NotInjectable, match="no controller"):
        seed_fault(task4_block, FaultClass.DUPLICATE_PATH, 0)


def test_classes_without_a_strategy(task4_block: ModelicaBlock) -> None:
    with pytest.raises(NotInjectable):
        seed_fault(task4_block, FaultClass.SCOPE_VIOLATION, 0)


def test_same_seed_same_mutant(task4_block: ModelicaBlock) -> None:
    first = seed_fault(task4_block, FaultClass.BROKEN_CONNECTION, 42)
    second = seed_fault(task4_block, FaultClass.BROKEN_CONNECTION, 42)

    assert first == second


# ── Reference corpus ───────────────────────────────────────────────────────

REFERENCE_MODULES = [
    "t1_chiller_enable.mo",
    "t2_bypass_valve.mo",
    "t3_tower_fan.mo",
    "t4_plant_requests.mo",
    "t5_relief_damper.mo",
]


@pytest.mark.parametrize("fault", [FaultClass.BROKEN_CONNECTION, FaultClass.UNKNOWN_CLASS])
@pytest.mark.parametrize("module", REFERENCE_MODULES)
def test_every_seeded_mutant_is_flagged(library: LibraryIndex, module: str, fault: FaultClass) -> None:
    block = parse_file(data_path("modules", module))

    for seed in range(10):
        mutated, injection = seed_fault(block, fault, seed)
        report = validate(mutated, library)
        assert any(d.fault_class is fault for d in report.errors), (seed, injection.description)

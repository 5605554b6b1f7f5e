from __future__ import annotations

from pathlib import Path

import pytest

from cdlgen.exceptions import TaskDefinitionError
from cdlgen.modelica import Direction, SignalKind
from cdlgen.services.tasks import load_reference_task, load_task, reference_module_path

TASK = """[task]
task_id = custom
title = Pass through
goal_phrase = pass a signal through
oracle_id = O1

[inputs]
u = Real|K|input temperature

[outputs]
y = Boolean||flag

[rules]
1 = Set `y` when `u` is high.
"""


@pytest.mark.parametrize("task_id", ["1", "2", "3", "4", "5"])
def test_shipped_tasks_load_with_reference_modules(task_id: str) -> None:
    task = load_reference_task(task_id)

    assert task.task_id == task_id
    assert task.oracle_id == f"O{task_id}"
    path = reference_module_path(task)
    assert path is not None
    assert path.exists()


def test_task4_interface_and_params() -> None:
    task = load_reference_task("4")

    assert [(p.name, p.direction, p.kind) for p in task.interface().ports] == [
        ("TAirSup", Direction.INPUT, SignalKind.REAL),
        ("TAirSupSet", Direction.INPUT, SignalKind.REAL),
        ("uCooCoi", Direction.INPUT, SignalKind.REAL),
        ("yChiWatResReq", Direction.OUTPUT, SignalKind.INTEGER),
        ("yChiPlaReq", Direction.OUTPUT, SignalKind.INTEGER),
    ]
    assert task.param("delTim").number == 120.0
    assert task.param("THys").unit == "K"


def test_direction_probe_builds_two_segment_trace() -> None:
    task = load_reference_task("4")
    (probe,) = task.probes

    trace = task.probe_trace(probe, 10.0)

    assert trace.probe("TAirSup")[0] == 285.15
    assert trace.probe("TAirSup")[-1] == 289.15
    assert trace.n_steps == 14


def test_custom_task_file(tmp_path: Path) -> None:
    path = tmp_path / "custom.task"
    path.write_text(TASK, encoding="utf-8")

    task = load_reference_task(str(path))

    assert task.task_id == "custom"
    assert task.reference_module is None
    assert reference_module_path(task) is None


def test_rule_with_unknown_symbol_is_rejected(tmp_path: Path) -> None:
    path = tmp_path / "bad.task"
    path.write_text(TASK.replace("`u` is high", "`v` is high"), encoding="utf-8")

    with pytest.raises(TaskDefinitionError, match="unknown symbol 'v'"):
        load_task(path)


def test_unknown_shipped_id_is_rejected() -> None:
    with pytest.raises(TaskDefinitionError):
        load_reference_task("9")

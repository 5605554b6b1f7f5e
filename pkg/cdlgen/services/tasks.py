"""Reference control tasks.

A task file has ``[task]``, ``[inputs]``, ``[outputs]``, ``[params]``,
``[rules]`` and any number of ``[direction_probe.<name>]`` sections. Port
values are ``Kind|unit|description``; parameter values ``value|unit|description``.
"""

from __future__ import annotations

import logging
import re
from pathlib import Path

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from cdlgen.config import data_path, read_sections
from cdlgen.exceptions import TaskDefinitionError
from cdlgen.modelica import Direction, InterfaceSignature, PortSpec, SignalKind
from cdlgen.simulation.traces import SimulationTrace, Value, segment_trace

logger = logging.getLogger(__name__)

SYMBOL = re.compile(r"`([^`]+)`")


class TaskPort(BaseModel):
    name: str
    kind: SignalKind
    unit: str = ""
    description: str = ""

    def describe(self) -> str:
        detail = f"{self.kind}, unit {self.unit}" if self.unit else str(self.kind)
        return f"{self.name} ({detail}): {self.description}" if self.description else f"{self.name} ({detail})"


class TaskParam(BaseModel):
    name: str
    value: str
    unit: str = ""
    description: str = ""

    @property
    def number(self) -> float:
        return float(self.value)

    def describe(self) -> str:
        unit = f" (unit {self.unit})" if self.unit else ""
        text = f"{self.name} = {self.value}{unit}"
        return f"{text}: {self.description}" if self.description else text


class DirectionProbe(BaseModel):
    """Two-segment trace whose output change must carry ``sign``."""

    name: str
    output: str
    sign: int
    steps: tuple[int, int]
    levels: dict[str, tuple[str, str]]

    @field_validator("sign")
    @classmethod
    def _unit_sign(cls, value: int) -> int:
        if value not in (1, -1):
            raise ValueError("sign must be 1 or -1")
        return value

    @field_validator("steps")
    @classmethod
    def _positive_steps(cls, value: tuple[int, int]) -> tuple[int, int]:
        if min(value) < 1:
            raise ValueError("each probe segment needs at least one step")
        return value


class ReferenceTask(BaseModel):
    task_id: str
    title: str
    goal_phrase: str
    oracle_id: str
    inputs: list[TaskPort]
    outputs: list[TaskPort]
    params: list[TaskParam] = Field(default_factory=list)
    rules: list[str]
    probes: list[DirectionProbe] = Field(default_factory=list)
    reference_module: str | None = None

    @model_validator(mode="after")
    def _check_symbols(self) -> ReferenceTask:
        names = self.symbol_names
        for rule in self.rules:
            for symbol in SYMBOL.findall(rule):
                if symbol not in names:
                    raise ValueError(f"rule names unknown symbol '{symbol}'")
        inputs = {p.name for p in self.inputs}
        outputs = {p.name for p in self.outputs}
        for probe in self.probes:
            if probe.output not in outputs:
                raise ValueError(f"probe {probe.name} reads unknown output '{probe.output}'")
            if set(probe.levels) != inputs:
                raise ValueError(f"probe {probe.name} must give levels for exactly the task inputs")
        return self

    @property
    def symbol_names(self) -> set[str]:
        return {p.name for p in (*self.inputs, *self.outputs)} | {p.name for p in self.params}

    def param(self, name: str) -> TaskParam:
        for param in self.params:
            if param.name == name:
                return param
        raise KeyError(name)

    def port(self, name: str) -> TaskPort:
        for port in (*self.inputs, *self.outputs):
            if port.name == name:
                return port
        raise KeyError(name)

    def interface(self) -> InterfaceSignature:
        return InterfaceSignature(
            tuple(PortSpec(p.name, Direction.INPUT, p.kind, unit=p.unit or None) for p in self.inputs)
            + tuple(PortSpec(p.name, Direction.OUTPUT, p.kind, unit=p.unit or None) for p in self.outputs)
        )

    def input_kinds(self) -> dict[str, SignalKind]:
        return {p.name: p.kind for p in self.inputs}

    def probe_trace(self, probe: DirectionProbe, step_size: float) -> SimulationTrace:
        kinds = self.input_kinds()
        segments = [
            (probe.steps[i], {name: parse_level(pair[i], kinds[name]) for name, pair in probe.levels.items()})
            for i in range(2)
        ]
        return segment_trace(segments, step_size, kinds)


def parse_level(text: str, kind: SignalKind) -> Value:
    text = text.strip()
    if kind is SignalKind.BOOLEAN:
        if text.lower() in ("true", "1"):
            return True
        if text.lower() in ("false", "0"):
            return False
        raise ValueError(f"{text!r} is not a Boolean level")
    if kind is SignalKind.INTEGER:
        return int(text)
    return float(text)


def _split(value: str, n: int) -> list[str]:
    parts = [part.strip() for part in value.split("|", n - 1)]
    return parts + [""] * (n - len(parts))


def load_task(path: Path) -> ReferenceTask:
    path = Path(path)
    parser = read_sections(path)
    if not parser.has_section("task"):
        raise TaskDefinitionError(f"{path}: missing [task] section")

    def ports(section: str) -> list[dict[str, str]]:
        if not parser.has_section(section):
            return []
        out = []
        for name, value in parser.items(section):
            kind, unit, description = _split(value, 3)
            out.append({"name": name, "kind": kind, "unit": unit, "description": description})
        return out

    params = []
    if parser.has_section("params"):
        for name, value in parser.items("params"):
            number, unit, description = _split(value, 3)
            params.append({"name": name, "value": number, "unit": unit, "description": description})

    probes = []
    for section in parser.sections():
        if not section.startswith("direction_probe."):
            continue
        items = dict(parser.items(section))
        try:
            steps = tuple(int(s) for s in items.pop("steps", "1,1").split(","))
            probes.append(
                {
                    "name": section.removeprefix("direction_probe."),
                    "output": items.pop("output"),
                    "sign": int(items.pop("sign")),
                    "steps": steps,
                    "levels": {k: tuple(v.split(",")) for k, v in items.items()},
                }
            )
        except (KeyError, ValueError) as exc:
            raise TaskDefinitionError(f"{path}: [{section}] is incomplete: {exc}") from exc

    head = dict(parser.items("task"))
    raw = {
        **head,
        "inputs": ports("inputs"),
        "outputs": ports("outputs"),
        "params": params,
        "rules": [value for _, value in parser.items("rules")] if parser.has_section("rules") else [],
        "probes": probes,
    }
    try:
        task = ReferenceTask.model_validate(raw)
    except ValidationError as exc:
        raise TaskDefinitionError(f"invalid task file {path}: {exc}") from exc
    logger.debug("Loaded task %s from %s", task.task_id, path)
    return task


def task_path(task_ref: str) -> Path:
    """Shipped task for an id 1-5, otherwise ``task_ref`` is a file path."""
    if task_ref.isdigit():
        path = data_path("tasks", f"task{task_ref}.task")
        if not path.exists():
            raise TaskDefinitionError(f"no shipped task with id {task_ref}")
        return path
    return Path(task_ref)


def load_reference_task(task_ref: str) -> ReferenceTask:
    return load_task(task_path(task_ref))


def reference_module_path(task: ReferenceTask) -> Path | None:
    if task.reference_module is None:
        return None
    return data_path("modules", task.reference_module)

"""Value types for one parsed CDL-subset block.

All types are frozen. Source line numbers ride along for diagnostics but are
excluded from equality, so a printed-then-reparsed block compares equal to the
original.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import StrEnum

IDENTIFIER = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class SignalKind(StrEnum):
    REAL = "Real"
    BOOLEAN = "Boolean"
    INTEGER = "Integer"


class Direction(StrEnum):
    INPUT = "input"
    OUTPUT = "output"


class ClassKind(StrEnum):
    BLOCK = "block"
    MODEL = "model"


# Terminal segment of a connector class path -> (direction, kind)
CONNECTOR_CLASSES: dict[str, tuple[Direction, SignalKind]] = {
    "RealInput": (Direction.INPUT, SignalKind.REAL),
    "RealOutput": (Direction.OUTPUT, SignalKind.REAL),
    "BooleanInput": (Direction.INPUT, SignalKind.BOOLEAN),
    "BooleanOutput": (Direction.OUTPUT, SignalKind.BOOLEAN),
    "IntegerInput": (Direction.INPUT, SignalKind.INTEGER),
    "IntegerOutput": (Direction.OUTPUT, SignalKind.INTEGER),
}

CONNECTOR_ATTRIBUTES = ("unit", "displayUnit", "quantity", "min", "max")


def _as_float(text: str | None) -> float | None:
    if text is None:
        return None
    try:
        return float(text)
    except ValueError:
        return None


@dataclass(frozen=True)
class QualifiedName:
    segments: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.segments:
            raise ValueError("qualified name must have at least one segment")
        for segment in self.segments:
            if not IDENTIFIER.match(segment):
                raise ValueError(f"invalid identifier segment {segment!r}")

    @classmethod
    def parse(cls, text: str) -> QualifiedName:
        return cls(tuple(text.strip().split(".")))

    @property
    def terminal(self) -> str:
        return self.segments[-1]

    @property
    def is_qualified(self) -> bool:
        return len(self.segments) > 1

    def startswith(self, prefix: QualifiedName) -> bool:
        n = len(prefix.segments)
        return self.segments[:n] == prefix.segments

    def __str__(self) -> str:
        return ".".join(self.segments)


@dataclass(frozen=True)
class Modifier:
    name: str
    value: str
    final: bool = False
    each: bool = False


@dataclass(frozen=True)
class Connector:
    name: str
    class_ref: QualifiedName
    direction: Direction
    kind: SignalKind
    attributes: tuple[Modifier, ...] = ()
    condition: str | None = None
    doc: str | None = None
    annotation_text: str | None = None
    line: int | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.attributes and self.kind is not SignalKind.REAL:
            raise ValueError(f"connector {self.name}: attributes are only legal on Real connectors")
        seen: set[str] = set()
        for attr in self.attributes:
            if attr.name not in CONNECTOR_ATTRIBUTES:
                raise ValueError(f"connector {self.name}: unknown attribute {attr.name}")
            if attr.name in seen:
                raise ValueError(f"connector {self.name}: duplicate attribute {attr.name}")
            seen.add(attr.name)
        low, high = _as_float(self.attribute("min")), _as_float(self.attribute("max"))
        if low is not None and high is not None and low > high:
            raise ValueError(f"connector {self.name}: min {low} exceeds max {high}")

    def attribute(self, name: str) -> str | None:
        for attr in self.attributes:
            if attr.name == name:
                return attr.value
        return None

    @property
    def unit(self) -> str | None:
        value = self.attribute("unit")
        return value.strip('"') if value is not None else None

    @property
    def conditional(self) -> bool:
        return bool(self.condition)


@dataclass(frozen=True)
class Parameter:
    name: str
    type_name: str
    default: str | None = None
    doc: str | None = None
    modifiers: tuple[Modifier, ...] = ()
    final: bool = False
    protected: bool = False
    annotation_text: str | None = None
    line: int | None = field(default=None, compare=False)


@dataclass(frozen=True)
class ComponentInstance:
    class_ref: QualifiedName
    name: str
    modifiers: tuple[Modifier, ...] = ()
    protected: bool = False
    condition: str | None = None
    doc: str | None = None
    annotation_text: str | None = None
    line: int | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        names = [m.name for m in self.modifiers]
        if len(names) != len(set(names)):
            raise ValueError(f"instance {self.name}: duplicate modifier")

    def modifier(self, name: str) -> str | None:
        for mod in self.modifiers:
            if mod.name == name:
                return mod.value
        return None


@dataclass(frozen=True)
class ConnectEquation:
    source: str
    target: str
    annotation_text: str | None = None
    line: int | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        for path in (self.source, self.target):
            if not 1 <= len(path.split(".")) <= 2:
                raise ValueError(f"connect endpoint {path} must have one or two segments")


@dataclass(frozen=True)
class PortSpec:
    name: str
    direction: Direction
    kind: SignalKind
    unit: str | None = None
    conditional: bool = False

    def __str__(self) -> str:
        return f"{self.name}:{self.kind}"


@dataclass(frozen=True)
class InterfaceSignature:
    ports: tuple[PortSpec, ...] = ()

    @property
    def inputs(self) -> tuple[PortSpec, ...]:
        return tuple(p for p in self.ports if p.direction is Direction.INPUT)

    @property
    def outputs(self) -> tuple[PortSpec, ...]:
        return tuple(p for p in self.ports if p.direction is Direction.OUTPUT)

    def port(self, name: str) -> PortSpec | None:
        for p in self.ports:
            if p.name == name:
                return p
        return None

    def summary(self) -> str:
        ins = ", ".join(str(p) for p in self.inputs)
        outs = ", ".join(str(p) for p in self.outputs)
        return f"inputs [{ins}], outputs [{outs}]"


@dataclass(frozen=True)
class ModelicaBlock:
    name: str
    kind: ClassKind = ClassKind.BLOCK
    within: QualifiedName | None = None
    doc: str | None = None
    connectors: tuple[Connector, ...] = ()
    parameters: tuple[Parameter, ...] = ()
    instances: tuple[ComponentInstance, ...] = ()
    connects: tuple[ConnectEquation, ...] = ()
    annotation_text: str | None = None

    def __post_init__(self) -> None:
        if not self.connectors:
            raise ValueError(f"block {self.name} declares no connectors")
        seen: set[str] = set()
        for name in (
            *(c.name for c in self.connectors),
            *(p.name for p in self.parameters),
            *(i.name for i in self.instances),
        ):
            if name in seen:
                raise ValueError(f"block {self.name}: name {name} declared more than once")
            seen.add(name)

    @property
    def fqn(self) -> QualifiedName:
        if self.within is None:
            return QualifiedName((self.name,))
        return QualifiedName((*self.within.segments, self.name))

    def connector(self, name: str) -> Connector | None:
        return next((c for c in self.connectors if c.name == name), None)

    def instance(self, name: str) -> ComponentInstance | None:
        return next((i for i in self.instances if i.name == name), None)

    def parameter(self, name: str) -> Parameter | None:
        return next((p for p in self.parameters if p.name == name), None)

    def interface(self) -> InterfaceSignature:
        return interface_of(self)


def interface_of(block: ModelicaBlock) -> InterfaceSignature:
    """Connectors in declaration order; use ``.inputs``/``.outputs`` for the summary view."""
    return InterfaceSignature(
        tuple(
            PortSpec(c.name, c.direction, c.kind, unit=c.unit, conditional=c.conditional) for c in block.connectors
        )
    )

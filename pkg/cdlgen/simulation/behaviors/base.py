from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass
from typing import Any, ClassVar

from cdlgen.modelica import SignalKind

Value = bool | int | float

REAL = SignalKind.REAL
BOOLEAN = SignalKind.BOOLEAN
INTEGER = SignalKind.INTEGER


@dataclass(frozen=True)
class Param:
    """Parameter schema entry; ``kind=None`` marks an enumeration literal."""

    kind: SignalKind | None
    default: Value | str | None = None

    @property
    def required(self) -> bool:
        return self.default is None


class Behavior:
    """Step semantics of one elementary block.

    Instances own their state, so a fresh instance is created per simulation
    run. ``step`` receives the current input values and returns every output.
    """

    fqn: ClassVar[str] = ""
    inputs: ClassVar[dict[str, SignalKind]] = {}
    outputs: ClassVar[dict[str, SignalKind]] = {}
    params: ClassVar[dict[str, Param]] = {}
    # Outputs depend on held state, so a feedback edge out of this block may read the previous step.
    state_breaking: ClassVar[bool] = False

    def __init__(self, values: Mapping[str, Any] | None = None) -> None:
        values = values or {}
        self.p: dict[str, Any] = {name: values.get(name, spec.default) for name, spec in self.params.items()}

    def check(self, step_size: float) -> str | None:
        """Return a reason when this block cannot run at ``step_size``."""
        del step_size
        return None

    def initial_outputs(self) -> dict[str, Value]:
        return {name: _zero(kind) for name, kind in self.outputs.items()}

    def step(self, u: Mapping[str, Value], dt: float) -> dict[str, Value]:
        raise NotImplementedError(f"{self.fqn} does not implement step()")


def _zero(kind: SignalKind) -> Value:
    if kind is SignalKind.BOOLEAN:
        return False
    if kind is SignalKind.INTEGER:
        return 0
    return 0.0


def clamp(value: float, low: float, high: float) -> float:
    return max(low, min(high, value))

from __future__ import annotations

import math
from collections.abc import Mapping

from cdlgen.simulation.behaviors.base import BOOLEAN, REAL, Behavior, Param, Value
from cdlgen.simulation.registry import register_behavior

PACKAGE = "Buildings.Controls.OBC.CDL.Logical"


@register_behavior(f"{PACKAGE}.And")
class And(Behavior):
    inputs = {"u1": BOOLEAN, "u2": BOOLEAN}
    outputs = {"y": BOOLEAN}

    def step(self, u: Mapping[str, Value], dt: float) -> dict[str, Value]:
        return {"y": bool(u["u1"]) and bool(u["u2"])}


@register_behavior(f"{PACKAGE}.Or")
class Or(Behavior):
    inputs = {"u1": BOOLEAN, "u2": BOOLEAN}
    outputs = {"y": BOOLEAN}

    def step(self, u: Mapping[str, Value], dt: float) -> dict[str, Value]:
        return {"y": bool(u["u1"]) or bool(u["u2"])}


@register_behavior(f"{PACKAGE}.Not")
class Not(Behavior):
    inputs = {"u": BOOLEAN}
    outputs = {"y": BOOLEAN}

    def step(self, u: Mapping[str, Value], dt: float) -> dict[str, Value]:
        return {"y": not u["u"]}


@register_behavior(f"{PACKAGE}.Switch")
class Switch(Behavior):
    inputs = {"u1": BOOLEAN, "u2": BOOLEAN, "u3": BOOLEAN}
    outputs = {"y": BOOLEAN}

    def step(self, u: Mapping[str, Value], dt: float) -> dict[str, Value]:
        return {"y": u["u1"] if u["u2"] else u["u3"]}


@register_behavior(f"{PACKAGE}.Sources.Constant")
class Constant(Behavior):
    outputs = {"y": BOOLEAN}
    params = {"k": Param(BOOLEAN)}

    def step(self, u: Mapping[str, Value], dt: float) -> dict[str, Value]:
        return {"y": self.p["k"]}


@register_behavior(f"{PACKAGE}.Latch")
class Latch(Behavior):
    """A rising edge of ``u`` sets the output; ``clr`` resets it and wins on conflict."""

    inputs = {"u": BOOLEAN, "clr": BOOLEAN}
    outputs = {"y": BOOLEAN}
    state_breaking = True

    def __init__(self, values: Mapping[str, Value] | None = None) -> None:
        super().__init__(values)
        self.y = False
        self.pre_u = False

    def step(self, u: Mapping[str, Value], dt: float) -> dict[str, Value]:
        rising = bool(u["u"]) and not self.pre_u
        if u["clr"]:
            self.y = False
        elif rising:
            self.y = True
        self.pre_u = bool(u["u"])
        return {"y": self.y}


@register_behavior(f"{PACKAGE}.TrueDelay")
class TrueDelay(Behavior):
    """True once the input has been continuously true for ``delayTime`` seconds."""

    inputs = {"u": BOOLEAN}
    outputs = {"y": BOOLEAN}
    params = {"delayTime": Param(REAL)}
    state_breaking = True

    def __init__(self, values: Mapping[str, Value] | None = None) -> None:
        super().__init__(values)
        self.count = 0

    def check(self, step_size: float) -> str | None:
        delay = float(self.p["delayTime"])
        if delay < 0:
            return f"delayTime {delay} is negative"
        ratio = delay / step_size
        if not math.isclose(ratio, round(ratio), abs_tol=1e-9):
            return f"step size {step_size} does not divide delayTime {delay}"
        return None

    def step(self, u: Mapping[str, Value], dt: float) -> dict[str, Value]:
        self.count = self.count + 1 if u["u"] else 0
        held = (self.count - 1) * dt
        return {"y": self.count > 0 and held >= float(self.p["delayTime"]) - 1e-9}

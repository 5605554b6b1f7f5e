from __future__ import annotations

from collections.abc import Mapping

from cdlgen.simulation.behaviors.base import BOOLEAN, INTEGER, Behavior, Param, Value
from cdlgen.simulation.registry import register_behavior

PACKAGE = "Buildings.Controls.OBC.CDL.Integers"


@register_behavior(f"{PACKAGE}.Switch")
class Switch(Behavior):
    inputs = {"u1": INTEGER, "u2": BOOLEAN, "u3": INTEGER}
    outputs = {"y": INTEGER}

    def step(self, u: Mapping[str, Value], dt: float) -> dict[str, Value]:
        return {"y": u["u1"] if u["u2"] else u["u3"]}


@register_behavior(f"{PACKAGE}.Sources.Constant")
class Constant(Behavior):
    outputs = {"y": INTEGER}
    params = {"k": Param(INTEGER)}

    def step(self, u: Mapping[str, Value], dt: float) -> dict[str, Value]:
        return {"y": self.p["k"]}


@register_behavior(f"{PACKAGE}.Add")
class Add(Behavior):
    inputs = {"u1": INTEGER, "u2": INTEGER}
    outputs = {"y": INTEGER}

    def step(self, u: Mapping[str, Value], dt: float) -> dict[str, Value]:
        return {"y": int(u["u1"]) + int(u["u2"])}


@register_behavior(f"{PACKAGE}.Max")
class Max(Behavior):
    inputs = {"u1": INTEGER, "u2": INTEGER}
    outputs = {"y": INTEGER}

    def step(self, u: Mapping[str, Value], dt: float) -> dict[str, Value]:
        return {"y": max(int(u["u1"]), int(u["u2"]))}


@register_behavior(f"{PACKAGE}.Equal")
class Equal(Behavior):
    inputs = {"u1": INTEGER, "u2": INTEGER}
    outputs = {"y": BOOLEAN}

    def step(self, u: Mapping[str, Value], dt: float) -> dict[str, Value]:
        return {"y": u["u1"] == u["u2"]}

from __future__ import annotations

from collections.abc import Mapping

from cdlgen.simulation.behaviors.base import BOOLEAN, INTEGER, REAL, Behavior, Param, Value
from cdlgen.simulation.registry import register_behavior

PACKAGE = "Buildings.Controls.OBC.CDL.Conversions"


@register_behavior(f"{PACKAGE}.BooleanToReal")
class BooleanToReal(Behavior):
    inputs = {"u": BOOLEAN}
    outputs = {"y": REAL}
    params = {"realTrue": Param(REAL, 1.0), "realFalse": Param(REAL, 0.0)}

    def step(self, u: Mapping[str, Value], dt: float) -> dict[str, Value]:
        return {"y": float(self.p["realTrue"] if u["u"] else self.p["realFalse"])}


@register_behavior(f"{PACKAGE}.BooleanToInteger")
class BooleanToInteger(Behavior):
    inputs = {"u": BOOLEAN}
    outputs = {"y": INTEGER}
    params = {"integerTrue": Param(INTEGER, 1), "integerFalse": Param(INTEGER, 0)}

    def step(self, u: Mapping[str, Value], dt: float) -> dict[str, Value]:
        return {"y": int(self.p["integerTrue"] if u["u"] else self.p["integerFalse"])}

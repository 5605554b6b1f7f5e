"""P and PI control loops with forward-Euler integration.

The control error is scaled by ``r`` and signed by ``reverseActing``; the
integrator is frozen while the output sits on a limit. Derivative action is
not modeled, so ``controllerType`` must name a P or PI variant.
"""

from __future__ import annotations

from collections.abc import Mapping

from cdlgen.simulation.behaviors.base import BOOLEAN, REAL, Behavior, Param, Value, clamp
from cdlgen.simulation.registry import register_behavior

PACKAGE = "Buildings.Controls.OBC.CDL.Reals"

SUPPORTED_TYPES = ("P", "PI")

_PID_PARAMS = {
    "controllerType": Param(None, "PI"),
    "k": Param(REAL, 1.0),
    "Ti": Param(REAL, 0.5),
    "Td": Param(REAL, 0.1),
    "r": Param(REAL, 1.0),
    "yMax": Param(REAL, 1.0),
    "yMin": Param(REAL, 0.0),
    "reverseActing": Param(BOOLEAN, True),  # noqa: FBT003
}


@register_behavior(f"{PACKAGE}.PID")
class PID(Behavior):
    inputs = {"u_s": REAL, "u_m": REAL}
    outputs = {"y": REAL}
    params = _PID_PARAMS
    state_breaking = True

    def __init__(self, values: Mapping[str, Value] | None = None) -> None:
        super().__init__(values)
        self.integral = 0.0

    @property
    def controller_type(self) -> str:
        return str(self.p["controllerType"]).rsplit(".", 1)[-1]

    def check(self, step_size: float) -> str | None:
        if self.controller_type not in SUPPORTED_TYPES:
            return f"controllerType {self.controller_type} is not supported (use P or PI)"
        if float(self.p["yMin"]) > float(self.p["yMax"]):
            return "yMin exceeds yMax"
        if float(self.p["r"]) <= 0 or float(self.p["Ti"]) <= 0:
            return "r and Ti must be positive"
        return None

    def initial_outputs(self) -> dict[str, Value]:
        return {"y": clamp(0.0, float(self.p["yMin"]), float(self.p["yMax"]))}

    def error(self, u: Mapping[str, Value]) -> float:
        sign = 1.0 if self.p["reverseActing"] else -1.0
        return sign * (float(u["u_s"]) - float(u["u_m"])) / float(self.p["r"])

    def control(self, u: Mapping[str, Value], dt: float) -> float:
        k = float(self.p["k"])
        e = self.error(u)
        low, high = float(self.p["yMin"]), float(self.p["yMax"])
        raw = k * e + self.integral
        y = clamp(raw, low, high)
        if self.controller_type == "PI" and low < raw < high:
            self.integral += k * e * dt / float(self.p["Ti"])
        return y

    def step(self, u: Mapping[str, Value], dt: float) -> dict[str, Value]:
        return {"y": self.control(u, dt)}


@register_behavior(f"{PACKAGE}.PIDWithReset")
class PIDWithReset(PID):
    """``trigger`` enables the loop; its rising edge preloads the integrator with ``y_reset``."""

    inputs = {"u_s": REAL, "u_m": REAL, "trigger": BOOLEAN}
    params = {**_PID_PARAMS, "y_reset": Param(REAL, 0.0), "y_disabled": Param(REAL, 0.0)}

    def __init__(self, values: Mapping[str, Value] | None = None) -> None:
        super().__init__(values)
        self.pre_trigger = False

    def initial_outputs(self) -> dict[str, Value]:
        return {"y": float(self.p["y_disabled"])}

    def step(self, u: Mapping[str, Value], dt: float) -> dict[str, Value]:
        enabled = bool(u["trigger"])
        if enabled and not self.pre_trigger:
            self.integral = float(self.p["y_reset"])
        self.pre_trigger = enabled
        if not enabled:
            return {"y": float(self.p["y_disabled"])}
        return {"y": self.control(u, dt)}

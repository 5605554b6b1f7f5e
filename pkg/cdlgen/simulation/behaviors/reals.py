from __future__ import annotations

from collections.abc import Mapping

from cdlgen.simulation.behaviors.base import BOOLEAN, REAL, Behavior, Param, Value
from cdlgen.simulation.registry import register_behavior

PACKAGE = "Buildings.Controls.OBC.CDL.Reals"


class _Binary(Behavior):
    inputs = {"u1": REAL, "u2": REAL}
    outputs = {"y": REAL}

    def apply(self, u1: float, u2: float) -> float:
        raise NotImplementedError

    def step(self, u: Mapping[str, Value], dt: float) -> dict[str, Value]:
        return {"y": self.apply(float(u["u1"]), float(u["u2"]))}


@register_behavior(f"{PACKAGE}.Add")
class Add(_Binary):
    def apply(self, u1: float, u2: float) -> float:
        return u1 + u2


@register_behavior(f"{PACKAGE}.Subtract")
class Subtract(_Binary):
    def apply(self, u1: float, u2: float) -> float:
        return u1 - u2


@register_behavior(f"{PACKAGE}.Multiply")
class Multiply(_Binary):
    def apply(self, u1: float, u2: float) -> float:
        return u1 * u2


@register_behavior(f"{PACKAGE}.Max")
class Max(_Binary):
    def apply(self, u1: float, u2: float) -> float:
        return max(u1, u2)


@register_behavior(f"{PACKAGE}.Min")
class Min(_Binary):
    def apply(self, u1: float, u2: float) -> float:
        return min(u1, u2)


@register_behavior(f"{PACKAGE}.Switch")
class Switch(Behavior):
    inputs = {"u1": REAL, "u2": BOOLEAN, "u3": REAL}
    outputs = {"y": REAL}

    def step(self, u: Mapping[str, Value], dt: float) -> dict[str, Value]:
        return {"y": float(u["u1"] if u["u2"] else u["u3"])}


@register_behavior(f"{PACKAGE}.Sources.Constant")
class Constant(Behavior):
    outputs = {"y": REAL}
    params = {"k": Param(REAL)}

    def step(self, u: Mapping[str, Value], dt: float) -> dict[str, Value]:
        return {"y": float(self.p["k"])}


@register_behavior(f"{PACKAGE}.MultiplyByParameter")
class MultiplyByParameter(Behavior):
    inputs = {"u": REAL}
    outputs = {"y": REAL}
    params = {"k": Param(REAL)}

    def step(self, u: Mapping[str, Value], dt: float) -> dict[str, Value]:
        return {"y": float(self.p["k"]) * float(u["u"])}


@register_behavior(f"{PACKAGE}.AddParameter")
class AddParameter(Behavior):
    inputs = {"u": REAL}
    outputs = {"y": REAL}
    params = {"p": Param(REAL)}

    def step(self, u: Mapping[str, Value], dt: float) -> dict[str, Value]:
        return {"y": float(u["u"]) + float(self.p["p"])}


@register_behavior(f"{PACKAGE}.Limiter")
class Limiter(Behavior):
    inputs = {"u": REAL}
    outputs = {"y": REAL}
    params = {"uMax": Param(REAL), "uMin": Param(REAL)}

    def step(self, u: Mapping[str, Value], dt: float) -> dict[str, Value]:
        return {"y": max(float(self.p["uMin"]), min(float(self.p["uMax"]), float(u["u"])))}


class _Comparison(Behavior):
    """Boolean comparison whose switching point moves by ``h`` once the output is true."""

    outputs = {"y": BOOLEAN}

    def __init__(self, values: Mapping[str, Value] | None = None) -> None:
        super().__init__(values)
        self.pre_y = False

    def compare(self, u: Mapping[str, Value], held: bool) -> bool:  # noqa: FBT001
        raise NotImplementedError

    def step(self, u: Mapping[str, Value], dt: float) -> dict[str, Value]:
        self.pre_y = self.compare(u, self.pre_y)
        return {"y": self.pre_y}


@register_behavior(f"{PACKAGE}.GreaterThreshold")
class GreaterThreshold(_Comparison):
    """CDL ``Reals.GreaterThreshold``: y = (not pre(y) and u > t) or (pre(y) and u > t - h).

    The band is one-sided as in the library: the output turns on above ``t``
    and off only at or below ``t - h``.
    """

    inputs = {"u": REAL}
    params = {"t": Param(REAL, 0.0), "h": Param(REAL, 0.0)}

    def compare(self, u: Mapping[str, Value], held: bool) -> bool:  # noqa: FBT001
        t, h = float(self.p["t"]), float(self.p["h"])
        return float(u["u"]) > (t - h if held else t)


@register_behavior(f"{PACKAGE}.LessThreshold")
class LessThreshold(_Comparison):
    """CDL ``Reals.LessThreshold``: y = (not pre(y) and u < t) or (pre(y) and u < t + h).

    Mirror of :class:`GreaterThreshold`: on below ``t``, off at or above ``t + h``.
    """

    inputs = {"u": REAL}
    params = {"t": Param(REAL, 0.0), "h": Param(REAL, 0.0)}

    def compare(self, u: Mapping[str, Value], held: bool) -> bool:  # noqa: FBT001
        t, h = float(self.p["t"]), float(self.p["h"])
        return float(u["u"]) < (t + h if held else t)


@register_behavior(f"{PACKAGE}.Greater")
class Greater(_Comparison):
    inputs = {"u1": REAL, "u2": REAL}
    params = {"h": Param(REAL, 0.0)}

    def compare(self, u: Mapping[str, Value], held: bool) -> bool:  # noqa: FBT001
        h = float(self.p["h"])
        return float(u["u1"]) > float(u["u2"]) - (h if held else 0.0)


@register_behavior(f"{PACKAGE}.Less")
class Less(_Comparison):
    inputs = {"u1": REAL, "u2": REAL}
    params = {"h": Param(REAL, 0.0)}

    def compare(self, u: Mapping[str, Value], held: bool) -> bool:  # noqa: FBT001
        h = float(self.p["h"])
        return float(u["u1"]) < float(u["u2"]) + (h if held else 0.0)


@register_behavior(f"{PACKAGE}.Hysteresis")
class Hysteresis(_Comparison):
    """True above ``uHigh``, false below ``uLow``, held in between."""

    inputs = {"u": REAL}
    params = {"uLow": Param(REAL), "uHigh": Param(REAL), "pre_y_start": Param(BOOLEAN, False)}  # noqa: FBT003
    state_breaking = True

    def __init__(self, values: Mapping[str, Value] | None = None) -> None:
        super().__init__(values)
        self.pre_y = bool(self.p["pre_y_start"])

    def check(self, step_size: float) -> str | None:
        if float(self.p["uLow"]) >= float(self.p["uHigh"]):
            return f"uLow {self.p['uLow']} must be below uHigh {self.p['uHigh']}"
        return None

    def initial_outputs(self) -> dict[str, Value]:
        return {"y": bool(self.p["pre_y_start"])}

    def compare(self, u: Mapping[str, Value], held: bool) -> bool:  # noqa: FBT001
        value = float(u["u"])
        if held:
            return value >= float(self.p["uLow"])
        return value > float(self.p["uHigh"])

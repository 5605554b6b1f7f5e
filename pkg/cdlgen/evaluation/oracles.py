"""Behavioral conformance oracles for the reference tasks.

An oracle drives a block with a seeded piecewise-constant probe trace and
judges the simulated trace with named predicates. Predicates read the trace
only, never the block, so two blocks with the same port behavior get the same
verdicts however they are wired inside.
"""

from __future__ import annotations

import logging
import random
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, ClassVar

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from cdlgen.evaluation.registry import create_oracle, register_oracle
from cdlgen.exceptions import ConfigError
from cdlgen.simulation import SimulationTrace, elaborate, segment_trace, simulate, step_count

if TYPE_CHECKING:
    from cdlgen.modelica import ModelicaBlock
    from cdlgen.services.library_index import LibraryIndex
    from cdlgen.services.tasks import ReferenceTask
    from cdlgen.simulation.traces import Value

logger = logging.getLogger(__name__)

EPSILON = 1e-9

Segment = tuple[int, dict[str, "Value"]]


class OracleOptions(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = 0
    # fraction of each signal's span kept clear around a decision threshold
    tolerance: float = Field(default=0.01, ge=0.0, lt=0.5)
    min_hold: int = Field(default=6, ge=1)
    max_hold: int = Field(default=30, ge=1)

    @model_validator(mode="after")
    def _check_holds(self) -> OracleOptions:
        if self.min_hold > self.max_hold:
            raise ValueError("min_hold exceeds max_hold")
        return self


@dataclass(frozen=True)
class LevelSet:
    """Candidate levels for one input and the thresholds they must stay clear of."""

    candidates: tuple[Value, ...]
    thresholds: tuple[float, ...] = ()
    span: float = 1.0

    def admissible(self, tolerance: float) -> tuple[Value, ...]:
        band = tolerance * self.span
        return tuple(
            v
            for v in self.candidates
            if isinstance(v, bool) or all(abs(float(v) - t) > band for t in self.thresholds)
        )


@dataclass(frozen=True)
class PredicateVerdict:
    name: str
    holds: bool
    detail: str = ""

    def as_line(self) -> str:
        mark = "pass" if self.holds else "FAIL"
        return f"{mark}\t{self.name}\t{self.detail}".rstrip()


@dataclass(frozen=True)
class ConformanceResult:
    oracle_id: str
    verdicts: tuple[PredicateVerdict, ...]
    trace: SimulationTrace

    @property
    def passed(self) -> bool:
        return all(v.holds for v in self.verdicts)

    @property
    def failures(self) -> list[str]:
        return [v.name for v in self.verdicts if not v.holds]

    def as_text(self) -> str:
        status = "pass" if self.passed else "fail"
        return f"oracle {self.oracle_id}: {status}\n" + "".join(v.as_line() + "\n" for v in self.verdicts)


def constant_runs(trace: SimulationTrace, ports: Sequence[str]) -> list[range]:
    """Maximal step ranges over which every port in ``ports`` holds its value."""
    columns = [trace.probe(p) for p in ports]
    runs = []
    start = 0
    for n in range(1, trace.n_steps):
        if any(col[n] != col[n - 1] for col in columns):
            runs.append(range(start, n))
            start = n
    runs.append(range(start, trace.n_steps))
    return runs


def moves_against(y: Sequence[Value], run: range, sign: int) -> list[int]:
    """Steps inside ``run`` where ``y`` moved opposite to ``sign``."""
    return [n for n in run[1:] if (float(y[n]) - float(y[n - 1])) * sign < -EPSILON]


def out_of_range(y: Sequence[Value], low: float = 0.0, high: float = 1.0) -> list[int]:
    return [n for n, v in enumerate(y) if not low - EPSILON <= float(v) <= high + EPSILON]


def _sign(value: float) -> int:
    return (value > 0) - (value < 0)


def verdict(name: str, trace: SimulationTrace, violations: Sequence[int]) -> PredicateVerdict:
    if not violations:
        return PredicateVerdict(name, holds=True)
    first = trace.times[violations[0]]
    return PredicateVerdict(name, holds=False, detail=f"{len(violations)} step(s) violate, first at t={first:g}")


class ConformanceOracle:
    """Probe trace generator plus predicates for one reference task."""

    oracle_id: ClassVar[str] = ""
    predicates: ClassVar[tuple[str, ...]] = ()
    # output -> +1 when it rises with the control error as the task words it
    polarity: ClassVar[Mapping[str, int]] = {}

    def __init__(self, task: ReferenceTask, options: Mapping[str, Any] | None = None) -> None:
        try:
            self.options = OracleOptions.model_validate(dict(options or {}))
        except ValidationError as exc:
            raise ConfigError(f"oracle {self.oracle_id} options: {exc}") from exc
        self.task = task
        declared = set(task.input_kinds())
        covered = set(self.level_sets())
        if declared != covered:
            msg = f"oracle {self.oracle_id} drives {sorted(covered)}, task {task.task_id} declares {sorted(declared)}"
            raise ConfigError(msg)

    def param(self, name: str, default: float) -> float:
        try:
            return self.task.param(name).number
        except KeyError:
            return default

    @property
    def outputs(self) -> list[str]:
        return [p.name for p in self.task.outputs]

    @property
    def inputs(self) -> list[str]:
        return [p.name for p in self.task.inputs]

    def level_sets(self) -> Mapping[str, LevelSet]:
        raise NotImplementedError

    def preamble(self) -> list[Segment]:
        """Fixed segments that visit every predicate's condition before the random part."""
        return []

    def judge(self, trace: SimulationTrace) -> list[PredicateVerdict]:
        raise NotImplementedError

    def schedule(self, n_steps: int) -> list[Segment]:
        levels = {name: ls.admissible(self.options.tolerance) for name, ls in self.level_sets().items()}
        for name, values in levels.items():
            if not values:
                raise ConfigError(f"oracle {self.oracle_id}: tolerance {self.options.tolerance} leaves {name} no level")
        rng = random.Random(self.options.seed)  # noqa: S311
        segments = list(self.preamble())
        total = sum(n for n, _ in segments)
        while total < n_steps:
            hold = rng.randint(self.options.min_hold, self.options.max_hold)
            segments.append((hold, {name: rng.choice(values) for name, values in levels.items()}))
            total += hold
        return segments

    def probe_trace(self, step_size: float, horizon: float) -> SimulationTrace:
        segments = self.schedule(step_count(step_size, horizon))
        return segment_trace(segments, step_size, self.task.input_kinds(), horizon)

    def evaluate(self, trace: SimulationTrace) -> tuple[PredicateVerdict, ...]:
        missing = [p for p in (*self.inputs, *self.outputs) if p not in trace.series]
        if missing:
            detail = f"trace has no {', '.join(missing)}"
            return tuple(PredicateVerdict(name, holds=False, detail=detail) for name in self.predicates)
        return tuple(self.judge(trace))


def check_conformance(
    oracle: ConformanceOracle,
    block: ModelicaBlock,
    index: LibraryIndex | None = None,
    *,
    step_size: float = 10.0,
    horizon: float = 3600.0,
) -> ConformanceResult:
    """Simulate ``block`` on the oracle's probe trace and judge the result.

    Elaboration errors propagate to the caller.
    """
    network = elaborate(block, index)
    trace = simulate(network, oracle.probe_trace(step_size, horizon))
    result = ConformanceResult(oracle.oracle_id, oracle.evaluate(trace), trace)
    logger.info("Oracle %s on %s: %s", oracle.oracle_id, block.name, "pass" if result.passed else result.failures)
    return result


def task_oracle(task: ReferenceTask, options: Mapping[str, Any] | None = None) -> ConformanceOracle:
    return create_oracle(task.oracle_id, task, dict(options or {}))


# ---------------------------------------------------------------------------
# Shipped oracles
# ---------------------------------------------------------------------------


@register_oracle("O1")
class ChillerEnableOracle(ConformanceOracle):
    oracle_id = "O1"
    predicates = ("enable_above_deadband", "disable_at_or_below_setpoint", "hold_inside_deadband")
    setpoint = 280.0

    @property
    def deadband(self) -> float:
        return self.param("TDeaBan", 1.0)

    def level_sets(self) -> Mapping[str, LevelSet]:
        t = self.setpoint
        return {
            "TChi_CHWST": LevelSet((277.0, 279.0, 280.5, 282.0, 284.0), (t, t + self.deadband), span=10.0),
            "TChiSet": LevelSet((t,)),
        }

    def preamble(self) -> list[Segment]:
        t = self.setpoint
        return [
            (3, {"TChi_CHWST": value, "TChiSet": t})
            for value in (277.0, t + self.deadband / 2, 282.0, t + self.deadband / 2, 279.0, 284.0)
        ]

    def judge(self, trace: SimulationTrace) -> list[PredicateVerdict]:
        temp, setp, y = trace.probe("TChi_CHWST"), trace.probe("TChiSet"), trace.probe("y")
        db = self.deadband
        steps = range(trace.n_steps)
        above = [n for n in steps if temp[n] > setp[n] + db and not y[n]]
        below = [n for n in steps if temp[n] <= setp[n] and y[n]]
        inside = [n for n in steps if setp[n] < temp[n] <= setp[n] + db and y[n] != (y[n - 1] if n else False)]
        return [
            verdict("enable_above_deadband", trace, above),
            verdict("disable_at_or_below_setpoint", trace, below),
            verdict("hold_inside_deadband", trace, inside),
        ]


@register_oracle("O2")
class BypassValveOracle(ConformanceOracle):
    oracle_id = "O2"
    predicates = ("output_in_range", "fully_open_without_pumps", "opens_on_low_flow", "closes_on_high_flow")
    polarity: ClassVar[Mapping[str, int]] = {"yValPos": 1}
    setpoint = 0.05

    def level_sets(self) -> Mapping[str, LevelSet]:
        return {
            "VChiWat_flow": LevelSet((0.02, 0.035, 0.065, 0.08), (self.setpoint,), span=0.1),
            "VChiWatSet_flow": LevelSet((self.setpoint,)),
            "uChiWatPum": LevelSet((False, True)),
        }

    def preamble(self) -> list[Segment]:
        s = self.setpoint
        return [
            (n, {"VChiWat_flow": flow, "VChiWatSet_flow": s, "uChiWatPum": pump})
            for n, flow, pump in ((6, 0.035, False), (6, 0.035, True), (12, 0.065, True), (6, 0.02, True))
        ]

    def judge(self, trace: SimulationTrace) -> list[PredicateVerdict]:
        flow, setp = trace.probe("VChiWat_flow"), trace.probe("VChiWatSet_flow")
        pump, y = trace.probe("uChiWatPum"), trace.probe("yValPos")
        sign = self.polarity["yValPos"]
        closed = [n for n in range(trace.n_steps) if not pump[n] and y[n] != 1.0]
        opening, closing = [], []
        for run in constant_runs(trace, self.inputs):
            n = run[0]
            if not pump[n] or flow[n] == setp[n]:
                continue
            if flow[n] < setp[n]:
                opening += moves_against(y, run, sign)
            else:
                closing += moves_against(y, run, -sign)
        return [
            verdict("output_in_range", trace, out_of_range(y)),
            verdict("fully_open_without_pumps", trace, closed),
            verdict("opens_on_low_flow", trace, opening),
            verdict("closes_on_high_flow", trace, closing),
        ]


@register_oracle("O3")
class TowerFanOracle(ConformanceOracle):
    oracle_id = "O3"
    predicates = (
        "output_in_range",
        "full_speed_in_part_mechanical",
        "tracks_condenser_water_in_full_mechanical",
        "tracks_chilled_water_in_free_cooling",
    )
    polarity: ClassVar[Mapping[str, int]] = {"y": 1}
    cw_setpoint = 300.0
    chw_setpoint = 280.0

    def level_sets(self) -> Mapping[str, LevelSet]:
        cw, chw = self.cw_setpoint, self.chw_setpoint
        return {
            "TCWSupSet": LevelSet((cw,)),
            "TCWSup": LevelSet((cw - 2, cw - 0.5, cw + 0.5, cw + 2), (cw,), span=10.0),
            "TCHWSupSet": LevelSet((chw,)),
            "TCHWSup": LevelSet((chw - 2, chw - 0.5, chw + 0.5, chw + 2), (chw,), span=10.0),
            "cooMod": LevelSet((1, 2, 3)),
        }

    def preamble(self) -> list[Segment]:
        cw, chw = self.cw_setpoint, self.chw_setpoint

        def levels(mode: int, cw_meas: float, chw_meas: float) -> dict[str, Value]:
            return {"TCWSupSet": cw, "TCWSup": cw_meas, "TCHWSupSet": chw, "TCHWSup": chw_meas, "cooMod": mode}

        return [
            (6, levels(1, cw - 2, chw + 0.5)),
            (6, levels(1, cw + 2, chw + 0.5)),
            (6, levels(1, cw - 0.5, chw + 0.5)),
            (6, levels(2, cw - 0.5, chw + 0.5)),
            (6, levels(3, cw - 0.5, chw + 2)),
            (6, levels(3, cw - 0.5, chw - 2)),
            (6, levels(3, cw - 0.5, chw + 0.5)),
        ]

    def _tracking(self, trace: SimulationTrace, mode: int, measured: str, setpoint: str) -> list[int]:
        """Speed follows the sign of measured-minus-setpoint inside a run and across a sign flip."""
        meas, setp, modes, y = trace.probe(measured), trace.probe(setpoint), trace.probe("cooMod"), trace.probe("y")
        sign = self.polarity["y"]
        violations = []
        previous: range | None = None
        for run in constant_runs(trace, self.inputs):
            n = run[0]
            if modes[n] != mode:
                previous = None
                continue
            error = _sign(float(meas[n]) - float(setp[n]))
            if error:
                violations += moves_against(y, run, error * sign)
            if previous is not None:
                before = _sign(float(meas[previous[0]]) - float(setp[previous[0]]))
                if before * error < 0:
                    change = float(y[run[-1]]) - float(y[previous[-1]])
                    if change * error * sign <= EPSILON:
                        violations.append(run[-1])
            previous = run
        return sorted(violations)

    def judge(self, trace: SimulationTrace) -> list[PredicateVerdict]:
        modes, y = trace.probe("cooMod"), trace.probe("y")
        part = [n for n in range(trace.n_steps) if modes[n] == 2 and y[n] != 1.0]
        return [
            verdict("output_in_range", trace, out_of_range(y)),
            verdict("full_speed_in_part_mechanical", trace, part),
            verdict(
                "tracks_condenser_water_in_full_mechanical",
                trace,
                self._tracking(trace, 1, "TCWSup", "TCWSupSet"),
            ),
            verdict(
                "tracks_chilled_water_in_free_cooling",
                trace,
                self._tracking(trace, 3, "TCHWSup", "TCHWSupSet"),
            ),
        ]


@register_oracle("O4")
class PlantRequestsOracle(ConformanceOracle):
    """Hand-stepped request tiers: hysteretic excess, sustained for ``delTim``, then latched valve requests."""

    oracle_id = "O4"
    predicates = (
        "requests_in_range",
        "three_requests_after_sustained_high_excess",
        "two_requests_after_sustained_low_excess",
        "one_request_while_valve_latched",
        "no_request_otherwise",
        "higher_tier_dominates",
        "plant_request_latched",
    )
    setpoint = 285.15

    def level_sets(self) -> Mapping[str, LevelSet]:
        high, low, hys = self.param("dTHig", 3.0), self.param("dTLow", 2.0), self.param("THys", 0.1)
        s = self.setpoint
        excess = (s + high, s + high - hys, s + low, s + low - hys)
        valve = (self.param("uValHig", 0.95), self.param("uValLow", 0.85), self.param("uValPla", 0.10))
        return {
            "TAirSup": LevelSet(tuple(s + d for d in (-1.0, 0.5, 1.5, 2.5, 3.5, 4.5)), excess, span=10.0),
            "TAirSupSet": LevelSet((s,)),
            "uCooCoi": LevelSet((0.0, 0.05, 0.3, 0.6, 0.88, 0.92, 1.0), valve),
        }

    def preamble(self) -> list[Segment]:
        s = self.setpoint
        return [
            (n, {"TAirSup": s + d, "TAirSupSet": s, "uCooCoi": v})
            for n, d, v in (
                (15, 3.5, 0.5),
                (15, 2.5, 0.5),
                (6, 0.5, 1.0),
                (3, 0.5, 0.88),
                (3, 0.5, 0.92),
                (3, 0.5, 0.3),
                (3, 0.5, 0.05),
                (15, 3.5, 1.0),
                (6, -1.0, 0.6),
            )
        ]

    @staticmethod
    def _exceeds(excess: Sequence[float], threshold: float, hysteresis: float) -> list[bool]:
        out, held = [], False
        for d in excess:
            held = d > (threshold - hysteresis if held else threshold)
            out.append(held)
        return out

    @staticmethod
    def _sustained(flags: Sequence[bool], delay: float, step_size: float) -> list[bool]:
        out, count = [], 0
        for flag in flags:
            count = count + 1 if flag else 0
            out.append(count > 0 and (count - 1) * step_size >= delay - EPSILON)
        return out

    @staticmethod
    def _latched(valve: Sequence[float], start: float, stop: float) -> list[bool]:
        out, held = [], False
        for v in valve:
            held = v >= stop if held else v > start
            out.append(held)
        return out

    def expected(self, trace: SimulationTrace) -> tuple[list[bool], list[bool], list[bool], list[bool]]:
        """Tier 3, tier 2, valve latch and plant latch per step."""
        temp, setp = trace.probe("TAirSup"), trace.probe("TAirSupSet")
        valve = [float(v) for v in trace.probe("uCooCoi")]
        excess = [float(t) - float(s) for t, s in zip(temp, setp, strict=True)]
        hys, delay = self.param("THys", 0.1), self.param("delTim", 120.0)
        high = self._sustained(self._exceeds(excess, self.param("dTHig", 3.0), hys), delay, trace.step_size)
        low = self._sustained(self._exceeds(excess, self.param("dTLow", 2.0), hys), delay, trace.step_size)
        start = self.param("uValHig", 0.95)
        return (
            high,
            low,
            self._latched(valve, start, self.param("uValLow", 0.85)),
            self._latched(valve, start, self.param("uValPla", 0.10)),
        )

    def judge(self, trace: SimulationTrace) -> list[PredicateVerdict]:
        res, pla = trace.probe("yChiWatResReq"), trace.probe("yChiPlaReq")
        tier3, tier2, valve, plant = self.expected(trace)
        steps = range(trace.n_steps)
        in_range = [n for n in steps if res[n] not in (0, 1, 2, 3) or pla[n] not in (0, 1)]
        three = [n for n in steps if (res[n] == 3) != tier3[n]]
        two = [n for n in steps if not tier3[n] and (res[n] == 2) != tier2[n]]
        one = [n for n in steps if not (tier3[n] or tier2[n]) and (res[n] == 1) != valve[n]]
        zero = [n for n in steps if not (tier3[n] or tier2[n] or valve[n]) and res[n] != 0]
        dominates = []
        for n in steps:
            active = [tier for tier, on in ((3, tier3[n]), (2, tier2[n]), (1, valve[n])) if on]
            if len(active) > 1 and res[n] != active[0]:
                dominates.append(n)
        latched = [n for n in steps if pla[n] != int(plant[n])]
        return [
            verdict("requests_in_range", trace, in_range),
            verdict("three_requests_after_sustained_high_excess", trace, three),
            verdict("two_requests_after_sustained_low_excess", trace, two),
            verdict("one_request_while_valve_latched", trace, one),
            verdict("no_request_otherwise", trace, zero),
            verdict("higher_tier_dominates", trace, dominates),
            verdict("plant_request_latched", trace, latched),
        ]


@register_oracle("O5")
class ReliefDamperOracle(ConformanceOracle):
    oracle_id = "O5"
    predicates = ("output_in_range", "closed_without_supply_fan", "opens_as_pressure_rises")
    polarity: ClassVar[Mapping[str, int]] = {"yRelDam": 1}

    @property
    def setpoint(self) -> float:
        return self.param("dpBuiSet", 12.0)

    def level_sets(self) -> Mapping[str, LevelSet]:
        return {
            "dpBui": LevelSet((5.0, 10.0, 14.0, 18.0, 25.0), (self.setpoint,), span=20.0),
            "u1SupFan": LevelSet((False, True)),
        }

    def preamble(self) -> list[Segment]:
        return [
            (3, {"dpBui": dp, "u1SupFan": fan})
            for dp, fan in ((10.0, True), (14.0, True), (18.0, True), (18.0, False), (10.0, True))
        ]

    def judge(self, trace: SimulationTrace) -> list[PredicateVerdict]:
        dp, fan, y = trace.probe("dpBui"), trace.probe("u1SupFan"), trace.probe("yRelDam")
        sign = self.polarity["yRelDam"]
        closed = [n for n in range(trace.n_steps) if not fan[n] and y[n] != 0.0]
        against, opened = [], False
        for n in range(1, trace.n_steps):
            if not (fan[n] and fan[n - 1]):
                continue
            rise = float(dp[n]) - float(dp[n - 1])
            move = (float(y[n]) - float(y[n - 1])) * sign
            if rise * move < -EPSILON:
                against.append(n)
            if rise > 0 and move > EPSILON:
                opened = True
        opens = verdict("opens_as_pressure_rises", trace, against)
        if opens.holds and not opened:
            opens = PredicateVerdict(
                "opens_as_pressure_rises", holds=False, detail="no pressure rise with the fan on opened the damper"
            )
        return [
            verdict("output_in_range", trace, out_of_range(y)),
            verdict("closed_without_supply_fan", trace, closed),
            opens,
        ]

"""Fixed-step signal traces and their CSV form."""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

from cdlgen.exceptions import InvalidTrace, UnknownPort
from cdlgen.modelica import SignalKind

Value = bool | int | float

TIME_COLUMN = "time_s"


def step_count(step_size: float, horizon: float) -> int:
    """Samples in a run, t=0 included."""
    if step_size <= 0:
        raise InvalidTrace(f"step size must be positive, got {step_size}")
    if horizon < 0:
        raise InvalidTrace(f"horizon must be non-negative, got {horizon}")
    return math.floor(horizon / step_size + 1e-9) + 1


def coerce(value: Value, kind: SignalKind) -> Value:
    """Normalize a value to ``kind`` or raise ``TypeError``."""
    if kind is SignalKind.BOOLEAN:
        if isinstance(value, bool):
            return value
        if isinstance(value, int) and value in (0, 1):
            return bool(value)
        raise TypeError(value)
    if kind is SignalKind.INTEGER:
        if isinstance(value, bool):
            raise TypeError(value)
        if isinstance(value, int):
            return value
        if isinstance(value, float) and value.is_integer():
            return int(value)
        raise TypeError(value)
    if isinstance(value, bool):
        raise TypeError(value)
    return float(value)


def format_value(value: Value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    return format(value, ".9g")


@dataclass(frozen=True)
class SimulationTrace:
    step_size: float
    horizon: float
    series: Mapping[str, tuple[Value, ...]]
    kinds: Mapping[str, SignalKind] = field(default_factory=dict)

    def __post_init__(self) -> None:
        n = step_count(self.step_size, self.horizon)
        for port, values in self.series.items():
            if len(values) != n:
                raise InvalidTrace(f"series {port} has {len(values)} samples, expected {n}")

    @property
    def n_steps(self) -> int:
        return step_count(self.step_size, self.horizon)

    @property
    def times(self) -> list[float]:
        return [n * self.step_size for n in range(self.n_steps)]

    @property
    def ports(self) -> list[str]:
        return list(self.series)

    def probe(self, port: str) -> tuple[Value, ...]:
        return probe(self, port)

    def select(self, ports: Sequence[str]) -> SimulationTrace:
        return SimulationTrace(
            self.step_size,
            self.horizon,
            {p: probe(self, p) for p in ports},
            {p: self.kinds[p] for p in ports if p in self.kinds},
        )


def probe(trace: SimulationTrace, port: str) -> tuple[Value, ...]:
    try:
        return trace.series[port]
    except KeyError:
        raise UnknownPort(port) from None


def segment_trace(
    segments: Sequence[tuple[int, Mapping[str, Value]]],
    step_size: float,
    kinds: Mapping[str, SignalKind],
    horizon: float | None = None,
) -> SimulationTrace:
    """Piecewise-constant inputs: each segment holds its levels for a number of steps.

    With ``horizon`` given, the schedule is truncated or its last levels held to fill it.
    """
    rows: list[Mapping[str, Value]] = []
    for n_steps, levels in segments:
        rows.extend([levels] * n_steps)
    if not rows:
        raise InvalidTrace("segment schedule is empty")
    if horizon is None:
        horizon = (len(rows) - 1) * step_size
    n = step_count(step_size, horizon)
    rows = rows[:n] + [rows[-1]] * max(0, n - len(rows))
    series = {port: tuple(coerce(row[port], kind) for row in rows) for port, kind in kinds.items()}
    return SimulationTrace(step_size, horizon, series, dict(kinds))


def format_trace_csv(trace: SimulationTrace) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow([TIME_COLUMN, *trace.series])
    columns = list(trace.series.values())
    for n, t in enumerate(trace.times):
        writer.writerow([format_value(t), *(format_value(col[n]) for col in columns)])
    return buffer.getvalue()


def write_trace_csv(trace: SimulationTrace, path: Path) -> None:
    path.write_text(format_trace_csv(trace), encoding="utf-8")


def _parse_cell(text: str, kind: SignalKind, column: str, row: int) -> Value:
    try:
        if kind is SignalKind.BOOLEAN:
            if text not in ("0", "1"):
                raise ValueError(text)
            return text == "1"
        if kind is SignalKind.INTEGER:
            return int(text)
        return float(text)
    except ValueError:
        raise InvalidTrace(f"row {row}, column {column}: {text!r} is not a {kind} value") from None


def read_trace_csv(path: Path, kinds: Mapping[str, SignalKind] | None = None) -> SimulationTrace:
    """Read a trace file; columns without a known kind are read as Real."""
    kinds = kinds or {}
    with Path(path).open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or not rows[0] or rows[0][0] != TIME_COLUMN:
        raise InvalidTrace(f"{path}: first column must be {TIME_COLUMN}")
    header = rows[0]
    # (file row, fields); blank lines are skipped but keep the numbering
    body = [(row, r) for row, r in enumerate(rows[1:], start=2) if r]
    if not body:
        raise InvalidTrace(f"{path}: no samples")
    for row, r in body:
        if len(r) != len(header):
            raise InvalidTrace(f"{path}: row {row} has {len(r)} fields, expected {len(header)}")

    times = [float(_parse_cell(r[0], SignalKind.REAL, TIME_COLUMN, row)) for row, r in body]
    step_size = times[1] - times[0] if len(times) > 1 else 1.0
    if step_size <= 0:
        raise InvalidTrace(f"{path}: time does not increase between rows {body[0][0]} and {body[1][0]}")
    for n, ((row, _), t) in enumerate(zip(body, times, strict=True)):
        if not math.isclose(t, n * step_size, rel_tol=1e-9, abs_tol=1e-9):
            raise InvalidTrace(f"{path}: time column is not a fixed-step grid at row {row}")

    series: dict[str, tuple[Value, ...]] = {}
    column_kinds: dict[str, SignalKind] = {}
    for col, name in enumerate(header[1:], start=1):
        kind = kinds.get(name, SignalKind.REAL)
        column_kinds[name] = kind
        series[name] = tuple(_parse_cell(r[col], kind, name, row) for row, r in body)
    return SimulationTrace(step_size, times[-1], series, column_kinds)

"""Fixed-step discrete-time execution of CDL blocks."""

from cdlgen.simulation.network import Network, elaborate, guard_holds, literal_value, simulate
from cdlgen.simulation.registry import available_behaviors, behavior_class, register_behavior
from cdlgen.simulation.traces import (
    SimulationTrace,
    format_trace_csv,
    probe,
    read_trace_csv,
    segment_trace,
    step_count,
    write_trace_csv,
)

__all__ = [
    "Network",
    "SimulationTrace",
    "available_behaviors",
    "behavior_class",
    "elaborate",
    "format_trace_csv",
    "guard_holds",
    "literal_value",
    "probe",
    "read_trace_csv",
    "register_behavior",
    "segment_trace",
    "simulate",
    "step_count",
    "write_trace_csv",
]

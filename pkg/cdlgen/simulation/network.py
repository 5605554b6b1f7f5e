"""Elaborate a parsed block into an executable network and step it.

Execution is synchronous and fixed-step: every step evaluates instances in a
topological order of the direct-feedthrough connections. Feedback through a
state-holding block is allowed; the consumer then reads that block's output
from the previous step.
"""

from __future__ import annotations

import logging
import re
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Any

import networkx as nx

from cdlgen.exceptions import (
    AlgebraicLoop,
    ConflictingConnection,
    InvalidParameter,
    InvalidTrace,
    KindMismatch,
    UnresolvedPort,
    UnsupportedConstruct,
)
from cdlgen.modelica import Direction, ModelicaBlock, QualifiedName, SignalKind
from cdlgen.services.library_index import LibraryIndex, ResolutionStatus, resolve_version
from cdlgen.simulation.behaviors.base import Behavior
from cdlgen.simulation.registry import behavior_class
from cdlgen.simulation.traces import SimulationTrace, Value, coerce, step_count

logger = logging.getLogger(__name__)

NUMBER = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")
DOTTED = re.compile(r"^[A-Za-z_]\w*(\.[A-Za-z_]\w*)*$")
COMPARISON = re.compile(r"^(?P<left>.+?)\s*(?P<op>==|<>)\s*(?P<right>.+)$")


# ---------------------------------------------------------------------------
# Literal and guard evaluation
# ---------------------------------------------------------------------------


def literal_value(text: str, block: ModelicaBlock, _seen: frozenset[str] = frozenset()) -> Value | str | None:
    """Evaluate a modifier value: literal, parameter reference or enumeration literal.

    Returns None when the text is none of these.
    """
    text = text.strip()
    if text in ("true", "false"):
        return text == "true"
    if NUMBER.match(text):
        number = float(text)
        return int(number) if re.match(r"^[+-]?\d+$", text) else number
    param = block.parameter(text)
    if param is not None:
        if param.default is None or text in _seen:
            return None
        return literal_value(param.default, block, _seen | {text})
    if DOTTED.match(text) and "." in text:
        return text.rsplit(".", 1)[-1]
    return None


def _same(left: Value | str | None, right: Value | str | None) -> bool:
    if isinstance(left, (int, float)) and isinstance(right, (int, float)):
        return float(left) == float(right)
    return left == right


def guard_holds(condition: str, block: ModelicaBlock) -> bool:
    """Decide a conditional-declaration guard from the block's parameter defaults."""
    text = condition.strip()
    while text.startswith("(") and text.endswith(")"):
        text = text[1:-1].strip()
    if text.startswith("not "):
        return not guard_holds(text[4:], block)
    match = COMPARISON.match(text)
    if match:
        left = literal_value(match["left"], block)
        right = literal_value(match["right"], block)
        if left is None or right is None:
            raise UnsupportedConstruct(f"condition '{condition.strip()}'")
        equal = _same(left, right)
        return equal if match["op"] == "==" else not equal
    value = literal_value(text, block)
    if isinstance(value, bool):
        return value
    raise UnsupportedConstruct(f"condition '{condition.strip()}'")


def _coerce_param(value: Value | str, kind: SignalKind | None) -> Value | str:
    if kind is None:
        if isinstance(value, str):
            return value
        raise TypeError(value)
    if isinstance(value, str):
        raise TypeError(value)
    return coerce(value, kind)


# ---------------------------------------------------------------------------
# Network
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NetworkInstance:
    name: str
    fqn: str
    behavior: type[Behavior]
    params: Mapping[str, Any]

    def create(self) -> Behavior:
        return self.behavior(self.params)


@dataclass(frozen=True)
class Network:
    """Immutable elaborated block; ``simulate`` creates fresh behavior state per run."""

    block: ModelicaBlock
    instances: tuple[NetworkInstance, ...]
    order: tuple[str, ...]
    drivers: Mapping[str, str]
    lagged: frozenset[str]
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    kinds: Mapping[str, SignalKind]
    removed: tuple[str, ...] = ()

    def instance(self, name: str) -> NetworkInstance:
        return next(i for i in self.instances if i.name == name)

    @property
    def ports(self) -> list[str]:
        """Trace columns: connectors first, then each instance's inputs and outputs."""
        ports = [*self.inputs, *self.outputs]
        for inst in self.instances:
            ports.extend(f"{inst.name}.{p}" for p in (*inst.behavior.inputs, *inst.behavior.outputs))
        return ports


def _resolve_fqn(class_ref: str, index: LibraryIndex | None) -> str:
    if index is None:
        return class_ref
    resolution = resolve_version(index, QualifiedName.parse(class_ref))
    if resolution.status is ResolutionStatus.RENAMED and resolution.fqn is not None:
        logger.debug("Elaborating %s as %s", class_ref, resolution.fqn)
        return str(resolution.fqn)
    return class_ref


def _instance_params(
    name: str, cls: type[Behavior], modifiers: Mapping[str, str], block: ModelicaBlock
) -> dict[str, Any]:
    params: dict[str, Any] = {}
    for param, spec in cls.params.items():
        text = modifiers.get(param)
        if text is None:
            if spec.required:
                raise InvalidParameter(name, param, "<unset>")
            params[param] = spec.default
            continue
        value = literal_value(text, block)
        if value is None:
            raise InvalidParameter(name, param, text)
        try:
            params[param] = _coerce_param(value, spec.kind)
        except TypeError:
            raise InvalidParameter(name, param, text) from None
    for extra in set(modifiers) - set(cls.params):
        logger.debug("Ignoring modifier %s.%s with no simulated effect", name, extra)
    return params


def elaborate(block: ModelicaBlock, index: LibraryIndex | None = None) -> Network:
    """Resolve classes, parameters and connections into an evaluation order."""
    connectors = [c for c in block.connectors if not c.condition or guard_holds(c.condition, block)]
    present = [i for i in block.instances if not i.condition or guard_holds(i.condition, block)]
    removed = tuple(
        [c.name for c in block.connectors if c not in connectors]
        + [i.name for i in block.instances if i not in present]
    )

    kinds: dict[str, SignalKind] = {}
    sources: set[str] = set()
    sinks: set[str] = set()
    for conn in connectors:
        kinds[conn.name] = conn.kind
        (sources if conn.direction is Direction.INPUT else sinks).add(conn.name)

    instances: list[NetworkInstance] = []
    for inst in present:
        fqn = _resolve_fqn(str(inst.class_ref), index)
        cls = behavior_class(fqn)
        params = _instance_params(inst.name, cls, {m.name: m.value for m in inst.modifiers}, block)
        instances.append(NetworkInstance(inst.name, fqn, cls, params))
        for port, kind in cls.inputs.items():
            kinds[f"{inst.name}.{port}"] = kind
            sinks.add(f"{inst.name}.{port}")
        for port, kind in cls.outputs.items():
            kinds[f"{inst.name}.{port}"] = kind
            sources.add(f"{inst.name}.{port}")

    absent = set(removed)
    drivers: dict[str, str] = {}
    for eq in block.connects:
        if eq.source.split(".")[0] in absent or eq.target.split(".")[0] in absent:
            continue
        for path in (eq.source, eq.target):
            if path not in kinds:
                raise UnresolvedPort(path)
        if eq.source in sources and eq.target in sinks:
            source, sink = eq.source, eq.target
        elif eq.target in sources and eq.source in sinks:
            source, sink = eq.target, eq.source
        else:
            raise UnresolvedPort(f"connect({eq.source}, {eq.target})", "does not pair an output with an input")
        if kinds[source] is not kinds[sink]:
            raise UnresolvedPort(sink, f"receives {kinds[source]} from {source} but expects {kinds[sink]}")
        if sink in drivers and drivers[sink] != source:
            raise ConflictingConnection(sink)
        drivers[sink] = source

    undriven = sorted(sinks - set(drivers))
    if undriven:
        raise UnresolvedPort(undriven[0], "is not connected")

    graph = nx.DiGraph()
    decl = {inst.name: n for n, inst in enumerate(instances)}
    graph.add_nodes_from(decl)
    edges: dict[tuple[str, str], list[str]] = {}
    for sink, source in drivers.items():
        if "." in source and "." in sink:
            edge = (source.split(".")[0], sink.split(".")[0])
            edges.setdefault(edge, []).append(sink)
            graph.add_edge(*edge)

    lagged: set[str] = set()
    by_name = {inst.name: inst for inst in instances}
    for component in nx.strongly_connected_components(graph):
        cyclic = len(component) > 1 or any(graph.has_edge(n, n) for n in component)
        if not cyclic:
            continue
        for edge in [e for e in edges if e[0] in component and e[1] in component]:
            if by_name[edge[0]].behavior.state_breaking:
                graph.remove_edge(*edge)
                lagged.update(edges[edge])

    if not nx.is_directed_acyclic_graph(graph):
        cycle = nx.find_cycle(graph)
        names = sorted({a for a, _ in cycle}, key=decl.get)
        raise AlgebraicLoop(names)

    order = tuple(nx.lexicographical_topological_sort(graph, key=lambda n: decl[n]))
    logger.debug("Elaborated %s: %d instances, %d lagged connections", block.name, len(instances), len(lagged))
    return Network(
        block=block,
        instances=tuple(instances),
        order=order,
        drivers=drivers,
        lagged=frozenset(lagged),
        inputs=tuple(c.name for c in connectors if c.direction is Direction.INPUT),
        outputs=tuple(c.name for c in connectors if c.direction is Direction.OUTPUT),
        kinds=kinds,
        removed=removed,
    )


def simulate(
    network: Network,
    inputs: SimulationTrace,
    step_size: float | None = None,
    horizon: float | None = None,
) -> SimulationTrace:
    """Step the network over the input series and return every port's series."""
    step_size = inputs.step_size if step_size is None else step_size
    horizon = inputs.horizon if horizon is None else horizon
    n_steps = step_count(step_size, horizon)
    if n_steps != inputs.n_steps:
        raise InvalidTrace(f"input series have {inputs.n_steps} samples, expected {n_steps}")

    series_in: dict[str, tuple[Value, ...]] = {}
    for name in network.inputs:
        if name not in inputs.series:
            raise InvalidTrace(f"no input series for {name}")
        kind = network.kinds[name]
        declared = inputs.kinds.get(name)
        if declared is not None and declared is not kind:
            raise KindMismatch(name, kind.value)
        try:
            series_in[name] = tuple(coerce(v, kind) for v in inputs.series[name])
        except TypeError:
            raise KindMismatch(name, kind.value) from None

    behaviors = {inst.name: inst.create() for inst in network.instances}
    for name, behavior in behaviors.items():
        reason = behavior.check(step_size)
        if reason is not None:
            raise InvalidTrace(f"{name}: {reason}")

    previous: dict[str, Value] = {}
    for name, behavior in behaviors.items():
        previous.update({f"{name}.{port}": value for port, value in behavior.initial_outputs().items()})

    ports = network.ports
    columns: dict[str, list[Value]] = {port: [] for port in ports}
    for n in range(n_steps):
        values: dict[str, Value] = {name: series[n] for name, series in series_in.items()}
        for name in network.order:
            behavior = behaviors[name]
            u: dict[str, Value] = {}
            for port in behavior.inputs:
                sink = f"{name}.{port}"
                source = network.drivers[sink]
                u[port] = previous[source] if sink in network.lagged else values[source]
                values[sink] = u[port]
            for port, value in behavior.step(u, step_size).items():
                path = f"{name}.{port}"
                values[path] = coerce(value, network.kinds[path])
        for name in network.outputs:
            values[name] = values[network.drivers[name]]
        for port in ports:
            columns[port].append(values[port])
        previous = values

    return SimulationTrace(
        step_size,
        horizon,
        {port: tuple(col) for port, col in columns.items()},
        {port: network.kinds[port] for port in ports},
    )

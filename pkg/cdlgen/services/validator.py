"""Pre-simulation checks on a parsed block.

Each rule is a function ``(context) -> list[Diagnostic]``; ``validate`` runs
them in order and sorts the result by rule id, then location. Errors fail the
compile gate, warnings never do.
"""

from __future__ import annotations

import logging
import re
from collections.abc import Callable
from dataclasses import dataclass
from functools import cached_property

import networkx as nx

from cdlgen.exceptions import CdlGenError
from cdlgen.modelica import ConnectEquation, Direction, ModelicaBlock, QualifiedName, SignalKind
from cdlgen.models import Diagnostic, FaultClass, Severity, ValidationReport
from cdlgen.services.library_index import LibraryEntry, LibraryIndex, ResolutionStatus, resolve_version
from cdlgen.services.tasks import ReferenceTask
from cdlgen.simulation import elaborate, simulate

logger = logging.getLogger(__name__)

CDL_ROOT = QualifiedName.parse("Buildings.Controls.OBC.CDL")

# Standard-library classes the basic-logic experiments may use.
MSL_ALLOWLIST = frozenset(
    {
        "Modelica.Blocks.Interfaces.RealInput",
        "Modelica.Blocks.Interfaces.RealOutput",
        "Modelica.Blocks.Interfaces.BooleanInput",
        "Modelica.Blocks.Interfaces.BooleanOutput",
        "Modelica.Blocks.Interfaces.IntegerInput",
        "Modelica.Blocks.Interfaces.IntegerOutput",
        "Modelica.Blocks.Logical.And",
        "Modelica.Blocks.Logical.Or",
        "Modelica.Blocks.Logical.Not",
        "Modelica.Blocks.Logical.Switch",
        "Modelica.Blocks.Logical.LogicalSwitch",
        "Modelica.Blocks.MathBoolean.And",
        "Modelica.Blocks.MathBoolean.Or",
        "Modelica.Blocks.MathBoolean.Not",
        "Modelica.Blocks.Sources.BooleanConstant",
    }
)

CONTROLLER_CLASSES = frozenset({"PID", "PIDWithReset", "LimPID"})

DEFAULT_STEP_SIZE = 10.0


@dataclass(frozen=True)
class Endpoint:
    """A connect endpoint after resolution against the block and the index."""

    path: str
    role: Direction | None  # OUTPUT: drives signals, INPUT: receives them
    kind: SignalKind | None
    resolved: bool


@dataclass
class RuleContext:
    block: ModelicaBlock
    index: LibraryIndex
    task: ReferenceTask | None
    step_size: float
    allowlist: frozenset[str]

    def entry(self, class_ref: QualifiedName) -> LibraryEntry | None:
        resolution = resolve_version(self.index, class_ref)
        if resolution.status is ResolutionStatus.UNKNOWN or resolution.fqn is None:
            return None
        return self.index.get(resolution.fqn)

    @cached_property
    def entries(self) -> dict[str, LibraryEntry | None]:
        return {inst.name: self.entry(inst.class_ref) for inst in self.block.instances}

    def endpoint(self, path: str) -> Endpoint:
        """Resolve ``path``; ``role`` is the signal direction as seen by the connect set."""
        head, _, port = path.partition(".")
        if not port:
            conn = self.block.connector(head)
            if conn is None:
                return Endpoint(path, None, None, resolved=False)
            # a block input feeds the inside of the block, a block output receives from it
            role = Direction.OUTPUT if conn.direction is Direction.INPUT else Direction.INPUT
            return Endpoint(path, role, conn.kind, resolved=True)
        inst = self.block.instance(head)
        if inst is None:
            return Endpoint(path, None, None, resolved=False)
        entry = self.entries.get(head)
        if entry is None:
            # class is unknown or outside the index; R1/R2 report that
            return Endpoint(path, None, None, resolved=True)
        spec = entry.interface.port(port)
        if spec is None:
            return Endpoint(path, None, None, resolved=False)
        return Endpoint(path, spec.direction, spec.kind, resolved=True)

    def orient(self, eq: ConnectEquation) -> tuple[str, str] | None:
        """(driver, sink) for a connect, or None when the pair is not output->input."""
        a, b = self.endpoint(eq.source), self.endpoint(eq.target)
        if a.role is Direction.OUTPUT and b.role is Direction.INPUT:
            return a.path, b.path
        if b.role is Direction.OUTPUT and a.role is Direction.INPUT:
            return b.path, a.path
        if a.role is None and b.role is Direction.INPUT:
            return a.path, b.path
        if b.role is None and a.role is Direction.INPUT:
            return b.path, a.path
        if a.role is Direction.OUTPUT and b.role is None:
            return a.path, b.path
        if b.role is Direction.OUTPUT and a.role is None:
            return b.path, a.path
        if a.role is None and b.role is None:
            return a.path, b.path
        return None

    @cached_property
    def drivers(self) -> dict[str, list[str]]:
        """Sink path -> distinct driver paths, in connect order."""
        drivers: dict[str, list[str]] = {}
        for eq in self.block.connects:
            pair = self.orient(eq)
            if pair is None:
                continue
            driver, sink = pair
            sources = drivers.setdefault(sink, [])
            if driver not in sources:
                sources.append(driver)
        return drivers

    @cached_property
    def graph(self) -> nx.DiGraph:
        """Signal flow between block connectors and instances."""
        graph = nx.DiGraph()
        graph.add_nodes_from(c.name for c in self.block.connectors)
        graph.add_nodes_from(i.name for i in self.block.instances)
        for sink, sources in self.drivers.items():
            for source in sources:
                graph.add_edge(source.split(".")[0], sink.split(".")[0])
        return graph


Rule = Callable[[RuleContext], list[Diagnostic]]


def _diag(
    rule_id: str,
    severity: Severity,
    location: str,
    message: str,
    fault: FaultClass | None,
    line: int | None = None,
    suggestion: str | None = None,
) -> Diagnostic:
    return Diagnostic(
        rule_id=rule_id,
        severity=severity,
        location=location,
        message=message,
        fault_class=fault,
        line=line,
        suggestion=suggestion,
    )


def _in_scope(class_ref: QualifiedName, allowlist: frozenset[str]) -> bool:
    return class_ref.startswith(CDL_ROOT) or str(class_ref) in allowlist


def check_classes(ctx: RuleContext) -> list[Diagnostic]:
    """R1: every instance class resolves in the index, possibly through a rename."""
    out = []
    for inst in ctx.block.instances:
        if str(inst.class_ref) in ctx.allowlist:
            continue
        resolution = resolve_version(ctx.index, inst.class_ref)
        if resolution.status is ResolutionStatus.UNKNOWN:
            out.append(
                _diag(
                    "R1",
                    Severity.ERROR,
                    inst.name,
                    f"class {inst.class_ref} is not in library {ctx.index.version}",
                    FaultClass.UNKNOWN_CLASS,
                    inst.line,
                )
            )
            continue
        if resolution.status is ResolutionStatus.RENAMED:
            out.append(
                _diag(
                    "R1",
                    Severity.WARNING,
                    inst.name,
                    f"class {inst.class_ref} was renamed to {resolution.fqn} in library {ctx.index.version}",
                    FaultClass.VERSION_DRIFT,
                    inst.line,
                    suggestion=str(resolution.fqn),
                )
            )
        entry = ctx.entries[inst.name]
        if entry is None:
            continue
        for mod in inst.modifiers:
            if mod.name not in entry.parameters:
                out.append(
                    _diag(
                        "R1",
                        Severity.WARNING,
                        f"{inst.name}.{mod.name}",
                        f"{entry.fqn} {ctx.index.version} declares no parameter {mod.name}",
                        FaultClass.VERSION_DRIFT,
                        inst.line,
                    )
                )
    return out


def check_scope(ctx: RuleContext) -> list[Diagnostic]:
    """R2: only CDL classes and allowlisted standard-library classes."""
    out = []
    declared = [(c.name, c.class_ref, c.line) for c in ctx.block.connectors]
    declared += [(i.name, i.class_ref, i.line) for i in ctx.block.instances]
    for name, class_ref, line in declared:
        if not _in_scope(class_ref, ctx.allowlist):
            out.append(
                _diag(
                    "R2",
                    Severity.ERROR,
                    name,
                    f"class {class_ref} is outside {CDL_ROOT} and the standard-library allowlist",
                    FaultClass.SCOPE_VIOLATION,
                    line,
                )
            )
    return out


def check_connect_types(ctx: RuleContext) -> list[Diagnostic]:
    """R3: each connect pairs an output with an input of the same kind."""
    out = []
    for n, eq in enumerate(ctx.block.connects):
        location = f"connect[{n}]"
        ends = (ctx.endpoint(eq.source), ctx.endpoint(eq.target))
        unresolved = [e.path for e in ends if not e.resolved]
        if unresolved:
            message = f"connect({eq.source}, {eq.target}): {', '.join(unresolved)} does not resolve"
            out.append(_diag("R3", Severity.ERROR, location, message, FaultClass.TYPE_MISMATCH, eq.line))
            continue
        a, b = ends
        if a.role is None or b.role is None:
            continue
        if a.role is b.role:
            side = "outputs" if a.role is Direction.OUTPUT else "inputs"
            message = f"connect({eq.source}, {eq.target}) joins two {side}"
            out.append(_diag("R3", Severity.ERROR, location, message, FaultClass.TYPE_MISMATCH, eq.line))
        elif a.kind is not b.kind:
            message = f"connect({eq.source}, {eq.target}) joins {a.kind} with {b.kind}"
            out.append(_diag("R3", Severity.ERROR, location, message, FaultClass.TYPE_MISMATCH, eq.line))
    return out


def check_reachability(ctx: RuleContext) -> list[Diagnostic]:
    """R4: inputs are driven, outputs reach back to a source, every instance is used."""
    out = []
    drivers = ctx.drivers
    graph = ctx.graph
    sources = {c.name for c in ctx.block.connectors if c.direction is Direction.INPUT}

    for inst in ctx.block.instances:
        entry = ctx.entries[inst.name]
        if entry is None:
            continue
        if not entry.interface.inputs:
            sources.add(inst.name)
        if inst.condition:
            continue
        for port in entry.interface.inputs:
            path = f"{inst.name}.{port.name}"
            if not port.conditional and path not in drivers:
                message = "input is not connected"
                out.append(_diag("R4", Severity.ERROR, path, message, FaultClass.BROKEN_CONNECTION, inst.line))

    for conn in ctx.block.connectors:
        if conn.direction is not Direction.OUTPUT or conn.condition:
            continue
        if conn.name not in drivers:
            message = "output is not connected"
            out.append(_diag("R4", Severity.ERROR, conn.name, message, FaultClass.BROKEN_CONNECTION, conn.line))
        elif not (nx.ancestors(graph, conn.name) & sources):
            message = "output is not reachable from any input or source block"
            out.append(_diag("R4", Severity.ERROR, conn.name, message, FaultClass.BROKEN_CONNECTION, conn.line))

    for inst in ctx.block.instances:
        if ctx.entries[inst.name] is not None and graph.out_degree(inst.name) == 0:
            message = "outputs drive nothing"
            out.append(_diag("R4", Severity.WARNING, inst.name, message, FaultClass.BROKEN_CONNECTION, inst.line))
    return out


def check_duplicate_paths(ctx: RuleContext) -> list[Diagnostic]:
    """R5: no sink with two drivers, no twin controllers feeding one output."""
    out = []
    for sink, sources in ctx.drivers.items():
        if len(sources) > 1:
            message = f"driven by {len(sources)} sources: {', '.join(sources)}"
            out.append(_diag("R5", Severity.ERROR, sink, message, FaultClass.DUPLICATE_PATH))

    controllers = [i for i in ctx.block.instances if i.class_ref.terminal in CONTROLLER_CLASSES]
    groups: dict[tuple[tuple[str, ...], tuple[str, ...]], list[str]] = {}
    for inst in controllers:
        key = (
            tuple(ctx.drivers.get(f"{inst.name}.u_s", ())),
            tuple(ctx.drivers.get(f"{inst.name}.u_m", ())),
        )
        if not any(key):
            continue
        groups.setdefault(key, []).append(inst.name)
    for conn in ctx.block.connectors:
        if conn.direction is not Direction.OUTPUT or conn.name not in ctx.graph:
            continue
        upstream = nx.ancestors(ctx.graph, conn.name)
        for names in groups.values():
            twins = [n for n in names if n in upstream]
            if len(twins) > 1:
                message = f"controllers {', '.join(twins)} share setpoint and measurement and both reach {conn.name}"
                out.append(_diag("R5", Severity.ERROR, conn.name, message, FaultClass.DUPLICATE_PATH, conn.line))
    return out


def check_interface(ctx: RuleContext) -> list[Diagnostic]:
    """R6: connector names, kinds and directions equal the task's interface."""
    assert ctx.task is not None  # noqa: S101
    want = {(p.name, p.kind, p.direction) for p in ctx.task.interface().ports}
    have = {(c.name, c.kind, c.direction) for c in ctx.block.connectors}
    out = []
    for name, kind, direction in sorted(want - have):
        message = f"task declares {direction} {name}:{kind} but the block does not"
        out.append(_diag("R6", Severity.ERROR, name, message, FaultClass.INTERFACE_MISMATCH))
    for name, kind, direction in sorted(have - want):
        message = f"block declares {direction} {name}:{kind} which the task does not"
        line = ctx.block.connector(name).line if ctx.block.connector(name) else None
        out.append(_diag("R6", Severity.ERROR, name, message, FaultClass.INTERFACE_MISMATCH, line))
    return out


def check_direction(ctx: RuleContext) -> list[Diagnostic]:
    """R7: each direction probe moves its output the way the task says."""
    assert ctx.task is not None  # noqa: S101
    if not ctx.task.probes:
        return []
    try:
        network = elaborate(ctx.block, ctx.index)
    except CdlGenError as exc:
        return [_diag("R7", Severity.WARNING, ctx.block.name, f"cannot elaborate for direction probes: {exc}", None)]

    out = []
    for probe in ctx.task.probes:
        try:
            trace = simulate(network, ctx.task.probe_trace(probe, ctx.step_size))
            series = trace.probe(probe.output)
        except CdlGenError as exc:
            out.append(_diag("R7", Severity.WARNING, probe.output, f"probe {probe.name} did not run: {exc}", None))
            continue
        first, total = probe.steps[0], sum(probe.steps)
        delta = float(series[total - 1]) - float(series[first - 1])
        logger.debug("Probe %s: %s moved by %g", probe.name, probe.output, delta)
        if delta * probe.sign <= 0:
            expected = "rise" if probe.sign > 0 else "fall"
            message = f"probe {probe.name}: {probe.output} should {expected} but changed by {delta:g}"
            out.append(_diag("R7", Severity.ERROR, probe.output, message, FaultClass.INVERTED_DIRECTION))
    return out


STATIC_RULES: list[tuple[str, Rule]] = [
    ("R1", check_classes),
    ("R2", check_scope),
    ("R3", check_connect_types),
    ("R4", check_reachability),
    ("R5", check_duplicate_paths),
]
TASK_RULES: list[tuple[str, Rule]] = [
    ("R6", check_interface),
    ("R7", check_direction),
]


def _location_key(location: str) -> tuple[str | int, ...]:
    # connect[10] sorts after connect[9]
    return tuple(int(part) if part.isdigit() else part for part in re.split(r"(\d+)", location))


def validate(
    block: ModelicaBlock,
    index: LibraryIndex,
    task: ReferenceTask | None = None,
    *,
    step_size: float = DEFAULT_STEP_SIZE,
    allowlist: frozenset[str] = MSL_ALLOWLIST,
    rules: list[str] | None = None,
) -> ValidationReport:
    """Run the static rules, plus R6/R7 when a task is given.

    ``rules`` restricts the run to the named rule ids.
    """
    ctx = RuleContext(block, index, task, step_size, allowlist)
    selected = STATIC_RULES + (TASK_RULES if task is not None else [])
    if rules is not None:
        selected = [(rule_id, rule) for rule_id, rule in selected if rule_id in rules]
    diagnostics: list[Diagnostic] = []
    for _, rule in selected:
        diagnostics.extend(rule(ctx))
    diagnostics.sort(key=lambda d: (d.rule_id, _location_key(d.location)))
    report = ValidationReport(diagnostics=diagnostics, checked_rules=[rule_id for rule_id, _ in selected])
    logger.debug("Validated %s: %d errors, %d warnings", block.name, len(report.errors), len(report.warnings))
    return report

"""Seed one fault from the review taxonomy into a valid block.

Mutants feed the validator's detection tests: each mutation touches as little
as possible so the matching rule is the one that fires.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, replace

from cdlgen.exceptions import NotInjectable
from cdlgen.modelica import ComponentInstance, ConnectEquation, Direction, ModelicaBlock, Modifier, QualifiedName
from cdlgen.models import FaultClass
from cdlgen.services.validator import CONTROLLER_CLASSES
from cdlgen.simulation.registry import behavior_class, has_behavior

logger = logging.getLogger(__name__)

SEEDABLE = (
    FaultClass.BROKEN_CONNECTION,
    FaultClass.UNKNOWN_CLASS,
    FaultClass.DUPLICATE_PATH,
    FaultClass.INVERTED_DIRECTION,
    FaultClass.VERSION_DRIFT,
)

DRIFT_FROM = QualifiedName.parse("Buildings.Controls.OBC.CDL.Reals")
DRIFT_TO = QualifiedName.parse("Buildings.Controls.OBC.CDL.Continuous")

# controllers act in reverse unless told otherwise
REVERSE_ACTING_DEFAULT = "true"


@dataclass(frozen=True)
class Injection:
    fault: FaultClass
    location: str
    description: str


def _is_sink(path: str, block: ModelicaBlock) -> bool:
    head, _, port = path.partition(".")
    if not port:
        conn = block.connector(head)
        return conn is not None and conn.direction is Direction.OUTPUT
    inst = block.instance(head)
    if inst is None or not has_behavior(str(inst.class_ref)):
        return False
    return port in behavior_class(str(inst.class_ref)).inputs


def _sink(eq: ConnectEquation, block: ModelicaBlock) -> str | None:
    for path in (eq.target, eq.source):
        if _is_sink(path, block):
            return path
    return None


def _unconditional(path: str, block: ModelicaBlock) -> bool:
    head = path.split(".")[0]
    element = block.connector(head) or block.instance(head)
    return element is not None and not element.condition


def _replace_instance(block: ModelicaBlock, new: ComponentInstance) -> ModelicaBlock:
    return replace(block, instances=tuple(new if i.name == new.name else i for i in block.instances))


def _set_modifier(inst: ComponentInstance, name: str, value: str) -> ComponentInstance:
    if inst.modifier(name) is None:
        return replace(inst, modifiers=(*inst.modifiers, Modifier(name, value)))
    mods = tuple(replace(m, value=value) if m.name == name else m for m in inst.modifiers)
    return replace(inst, modifiers=mods)


def _broken_connection(block: ModelicaBlock, rng: random.Random) -> tuple[ModelicaBlock, Injection]:
    candidates = []
    for n, eq in enumerate(block.connects):
        sink = _sink(eq, block)
        if sink is not None and _unconditional(sink, block):
            candidates.append((n, sink))
    if not candidates:
        raise NotInjectable(FaultClass.BROKEN_CONNECTION, "no connect drives an unconditional sink")
    n, sink = rng.choice(candidates)
    eq = block.connects[n]
    mutated = replace(block, connects=block.connects[:n] + block.connects[n + 1 :])
    return mutated, Injection(FaultClass.BROKEN_CONNECTION, sink, f"removed connect({eq.source}, {eq.target})")


def _unknown_class(block: ModelicaBlock, rng: random.Random) -> tuple[ModelicaBlock, Injection]:
    if not block.instances:
        raise NotInjectable(FaultClass.UNKNOWN_CLASS, "block has no instances")
    inst = rng.choice(block.instances)
    renamed = QualifiedName((*inst.class_ref.segments[:-1], f"{inst.class_ref.terminal}Ext"))
    mutated = _replace_instance(block, replace(inst, class_ref=renamed))
    return mutated, Injection(FaultClass.UNKNOWN_CLASS, inst.name, f"{inst.class_ref} -> {renamed}")


def _duplicate_path(block: ModelicaBlock, rng: random.Random) -> tuple[ModelicaBlock, Injection]:
    controllers = [i for i in block.instances if i.class_ref.terminal in CONTROLLER_CLASSES]
    if not controllers:
        raise NotInjectable(FaultClass.DUPLICATE_PATH, "block has no controller instance")
    pid = rng.choice(controllers)
    taken = {c.name for c in block.connectors} | {i.name for i in block.instances} | {p.name for p in block.parameters}
    name = f"{pid.name}Dup"
    while name in taken:
        name += "Dup"
    twin = replace(pid, name=name, line=None)

    added = []
    for eq in block.connects:
        for end, other in ((eq.target, eq.source), (eq.source, eq.target)):
            head, _, port = end.partition(".")
            if head == pid.name and port and _is_sink(end, block):
                added.append(ConnectEquation(other, f"{name}.{port}"))
    first_sink = next(
        (
            other
            for eq in block.connects
            for end, other in ((eq.source, eq.target), (eq.target, eq.source))
            if end == f"{pid.name}.y"
        ),
        None,
    )
    if first_sink is None:
        raise NotInjectable(FaultClass.DUPLICATE_PATH, f"{pid.name}.y drives nothing")
    added.append(ConnectEquation(f"{name}.y", first_sink))

    position = block.instances.index(pid) + 1
    instances = (*block.instances[:position], twin, *block.instances[position:])
    mutated = replace(block, instances=instances, connects=(*block.connects, *added))
    return mutated, Injection(FaultClass.DUPLICATE_PATH, first_sink, f"added {name} in parallel with {pid.name}")


def _driven_by_inputs(block: ModelicaBlock, inst: ComponentInstance) -> dict[str, int]:
    """Connect index per operand port when that operand comes straight from a block input."""
    inputs = {c.name for c in block.connectors if c.direction is Direction.INPUT}
    found = {}
    for n, eq in enumerate(block.connects):
        for end, other in ((eq.target, eq.source), (eq.source, eq.target)):
            if end in (f"{inst.name}.u1", f"{inst.name}.u2") and other in inputs:
                found[end.rsplit(".", 1)[1]] = n
    return found


def _inverted_direction(block: ModelicaBlock, rng: random.Random) -> tuple[ModelicaBlock, Injection]:  # noqa: ARG001
    for inst in block.instances:
        if inst.class_ref.terminal != "Subtract":
            continue
        operands = _driven_by_inputs(block, inst)
        if set(operands) != {"u1", "u2"}:
            continue
        connects = list(block.connects)
        for port, other_port in (("u1", "u2"), ("u2", "u1")):
            eq = block.connects[operands[port]]
            old, new = f"{inst.name}.{port}", f"{inst.name}.{other_port}"
            connects[operands[port]] = replace(
                eq,
                source=new if eq.source == old else eq.source,
                target=new if eq.target == old else eq.target,
            )
        return replace(block, connects=tuple(connects)), Injection(
            FaultClass.INVERTED_DIRECTION, inst.name, f"swapped the operands of {inst.name}"
        )

    for inst in block.instances:
        if inst.class_ref.terminal in ("PID", "PIDWithReset"):
            current = (inst.modifier("reverseActing") or REVERSE_ACTING_DEFAULT).strip()
            flipped = "false" if current == "true" else "true"
            mutated = _replace_instance(block, _set_modifier(inst, "reverseActing", flipped))
            return mutated, Injection(
                FaultClass.INVERTED_DIRECTION, inst.name, f"{inst.name}.reverseActing {current} -> {flipped}"
            )

    swaps = {"GreaterThreshold": "LessThreshold", "LessThreshold": "GreaterThreshold"}
    for inst in block.instances:
        if inst.class_ref.terminal in swaps:
            renamed = QualifiedName((*inst.class_ref.segments[:-1], swaps[inst.class_ref.terminal]))
            mutated = _replace_instance(block, replace(inst, class_ref=renamed))
            return mutated, Injection(FaultClass.INVERTED_DIRECTION, inst.name, f"{inst.class_ref} -> {renamed}")

    raise NotInjectable(FaultClass.INVERTED_DIRECTION, "no subtraction, controller or threshold to invert")


def _version_drift(block: ModelicaBlock, rng: random.Random) -> tuple[ModelicaBlock, Injection]:
    candidates = [i for i in block.instances if i.class_ref.startswith(DRIFT_FROM)]
    if not candidates:
        raise NotInjectable(FaultClass.VERSION_DRIFT, f"no instance of a {DRIFT_FROM} class")
    inst = rng.choice(candidates)
    tail = inst.class_ref.segments[len(DRIFT_FROM.segments) :]
    renamed = QualifiedName((*DRIFT_TO.segments, *tail))
    mutated = _replace_instance(block, replace(inst, class_ref=renamed))
    return mutated, Injection(FaultClass.VERSION_DRIFT, inst.name, f"{inst.class_ref} -> {renamed}")


_SEEDERS = {
    FaultClass.BROKEN_CONNECTION: _broken_connection,
    FaultClass.UNKNOWN_CLASS: _unknown_class,
    FaultClass.DUPLICATE_PATH: _duplicate_path,
    FaultClass.INVERTED_DIRECTION: _inverted_direction,
    FaultClass.VERSION_DRIFT: _version_drift,
}


def seed_fault(block: ModelicaBlock, fault: FaultClass | str, rng_seed: int) -> tuple[ModelicaBlock, Injection]:
    """Return ``block`` with exactly one ``fault`` injected, plus what was changed."""
    fault = FaultClass(fault)
    seeder = _SEEDERS.get(fault)
    if seeder is None:
        raise NotInjectable(fault, "no seeding strategy for this fault class")
    mutated, injection = seeder(block, random.Random(rng_seed))  # noqa: S311
    logger.debug("Seeded %s into %s: %s", fault, block.name, injection.description)
    return mutated, injection

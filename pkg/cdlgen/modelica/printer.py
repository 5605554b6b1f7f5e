"""Canonical source for a :class:`ModelicaBlock`.

Two-space indentation, one declaration per line, sections in the order
connectors, parameters, instances, protected items, equations.
"""

from __future__ import annotations

from cdlgen.modelica.ast import ComponentInstance, ConnectEquation, Connector, ModelicaBlock, Modifier, Parameter

INDENT = "  "


def _modifiers(mods: tuple[Modifier, ...]) -> str:
    if not mods:
        return ""
    parts = [f"{'final ' if m.final else ''}{'each ' if m.each else ''}{m.name}={m.value}" for m in mods]
    return "(" + ", ".join(parts) + ")"


def _tail(doc: str | None, annotation: str | None) -> str:
    out = ""
    if doc is not None:
        out += f' "{doc}"'
    if annotation is not None:
        out += f" {annotation}"
    return out + ";"


def _connector(c: Connector) -> str:
    guard = f" if {c.condition}" if c.condition else ""
    return f"{c.class_ref} {c.name}{_modifiers(c.attributes)}{guard}{_tail(c.doc, c.annotation_text)}"


def _parameter(p: Parameter) -> str:
    prefix = "final parameter" if p.final else "parameter"
    default = f" = {p.default}" if p.default is not None else ""
    return f"{prefix} {p.type_name} {p.name}{_modifiers(p.modifiers)}{default}{_tail(p.doc, p.annotation_text)}"


def _instance(i: ComponentInstance) -> str:
    guard = f" if {i.condition}" if i.condition else ""
    return f"{i.class_ref} {i.name}{_modifiers(i.modifiers)}{guard}{_tail(i.doc, i.annotation_text)}"


def _connect(eq: ConnectEquation) -> str:
    annotation = f" {eq.annotation_text}" if eq.annotation_text is not None else ""
    return f"connect({eq.source}, {eq.target}){annotation};"


def print_block(block: ModelicaBlock) -> str:
    lines: list[str] = []
    if block.within is not None:
        lines.append(f"within {block.within};")
    header = f"{block.kind} {block.name}"
    if block.doc is not None:
        header += f' "{block.doc}"'
    lines.append(header)

    lines.extend(INDENT + _connector(c) for c in block.connectors)
    lines.extend(INDENT + _parameter(p) for p in block.parameters if not p.protected)
    lines.extend(INDENT + _instance(i) for i in block.instances if not i.protected)

    hidden_params = [p for p in block.parameters if p.protected]
    hidden_instances = [i for i in block.instances if i.protected]
    if hidden_params or hidden_instances:
        lines.append("protected")
        lines.extend(INDENT + _parameter(p) for p in hidden_params)
        lines.extend(INDENT + _instance(i) for i in hidden_instances)

    if block.connects or block.annotation_text is not None:
        lines.append("equation")
        lines.extend(INDENT + _connect(eq) for eq in block.connects)
        if block.annotation_text is not None:
            lines.append(f"{INDENT}{block.annotation_text};")

    lines.append(f"end {block.name};")
    return "\n".join(lines) + "\n"

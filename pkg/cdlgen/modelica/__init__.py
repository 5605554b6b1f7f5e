"""CDL subset of Modelica: AST values, parser and canonical printer."""

from cdlgen.modelica.ast import (
    ClassKind,
    ComponentInstance,
    ConnectEquation,
    Connector,
    Direction,
    InterfaceSignature,
    ModelicaBlock,
    Modifier,
    Parameter,
    PortSpec,
    QualifiedName,
    SignalKind,
    interface_of,
)
from cdlgen.modelica.parser import parse, parse_file
from cdlgen.modelica.printer import print_block

__all__ = [
    "ClassKind",
    "ComponentInstance",
    "ConnectEquation",
    "Connector",
    "Direction",
    "InterfaceSignature",
    "ModelicaBlock",
    "Modifier",
    "Parameter",
    "PortSpec",
    "QualifiedName",
    "SignalKind",
    "interface_of",
    "parse",
    "parse_file",
    "print_block",
]

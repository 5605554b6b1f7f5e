"""Parse CDL-subset Modelica source into a :class:`ModelicaBlock`."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from functools import cache
from pathlib import Path
from typing import Any

from lark import Lark, Token, Transformer, v_args
from lark.exceptions import UnexpectedCharacters, UnexpectedEOF, UnexpectedInput, UnexpectedToken, VisitError

from cdlgen.exceptions import ModelicaParseError, ModelicaSyntaxError, UnsupportedConstruct
from cdlgen.modelica.ast import (
    CONNECTOR_CLASSES,
    ClassKind,
    ComponentInstance,
    ConnectEquation,
    Connector,
    ModelicaBlock,
    Modifier,
    Parameter,
    QualifiedName,
)

logger = logging.getLogger(__name__)

GRAMMAR_PATH = Path(__file__).with_name("grammar.lark")

# Keywords of full Modelica that the CDL subset rejects outright.
UNSUPPORTED_KEYWORDS = frozenset(
    {
        "algorithm",
        "initial",
        "extends",
        "import",
        "connector",
        "function",
        "package",
        "record",
        "type",
        "replaceable",
        "redeclare",
        "inner",
        "outer",
        "when",
        "der",
        "for",
        "while",
        "discrete",
        "constant",
        "input",
        "output",
        "flow",
        "stream",
        "partial",
        "encapsulated",
        "expandable",
        "operator",
    }
)

_EQUATION_STARTS = frozenset({"connect", "annotation", "end", "equation", "protected"})


@cache
def _parser() -> Lark:
    return Lark(
        GRAMMAR_PATH.read_text(encoding="utf-8"),
        parser="lalr",
        lexer="basic",
        propagate_positions=True,
        maybe_placeholders=False,
    )


# ---------------------------------------------------------------------------
# Intermediate markers produced by the transformer
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Span:
    start: int
    end: int


@dataclass(frozen=True)
class _Value:
    text: str


@dataclass(frozen=True)
class _Doc:
    text: str


@dataclass(frozen=True)
class _Condition:
    text: str


@dataclass(frozen=True)
class _Annotation:
    text: str


@dataclass(frozen=True)
class _ClassAnnotation:
    text: str
    line: int | None


@dataclass(frozen=True)
class _Mods:
    items: tuple[Modifier, ...]


@dataclass(frozen=True)
class _Binding:
    text: str


@dataclass(frozen=True)
class _Within:
    name: QualifiedName


@dataclass(frozen=True)
class _Section:
    kind: str
    items: tuple[Any, ...]


def _bounds(item: Token | _Span) -> tuple[int, int]:
    if isinstance(item, Token):
        return item.start_pos, item.end_pos
    return item.start, item.end


@v_args(meta=True)
class _ToBlock(Transformer):
    """Builds AST values bottom-up; opaque text comes from the source by span."""

    def __init__(self, source: str) -> None:
        super().__init__()
        self._source = source

    def _slice(self, items: list[Any]) -> _Span:
        spans = [_bounds(i) for i in items if isinstance(i, (Token, _Span))]
        return _Span(spans[0][0], spans[-1][1])

    def _text(self, span: _Span) -> str:
        return self._source[span.start : span.end]

    # -- token soup ---------------------------------------------------------

    def group(self, _meta: Any, children: list[Any]) -> _Span:
        return self._slice(children)

    def expression(self, _meta: Any, children: list[Any]) -> _Value:
        return _Value(self._text(self._slice(children)))

    def value(self, _meta: Any, children: list[Any]) -> _Value:
        (child,) = children
        if isinstance(child, Token):
            return _Value(str(child))
        return child

    def annotation(self, _meta: Any, children: list[Any]) -> _Annotation:
        return _Annotation(self._text(self._slice(children)))

    # -- small pieces -------------------------------------------------------

    def name(self, _meta: Any, children: list[Token]) -> QualifiedName:
        return QualifiedName(tuple(str(t) for t in children))

    def port_ref(self, _meta: Any, children: list[Token]) -> str:
        return ".".join(str(t) for t in children)

    def description(self, _meta: Any, children: list[Token]) -> _Doc:
        return _Doc(str(children[0])[1:-1])

    def condition(self, _meta: Any, children: list[Any]) -> _Condition:
        return _Condition(children[-1].text)

    def binding(self, _meta: Any, children: list[Any]) -> _Binding:
        return _Binding(next(c for c in children if isinstance(c, _Value)).text)

    def modifier(self, _meta: Any, children: list[Any]) -> Modifier:
        final = any(isinstance(c, Token) and c.type == "FINAL" for c in children)
        each = any(isinstance(c, Token) and c.type == "EACH" for c in children)
        qname = next(c for c in children if isinstance(c, QualifiedName))
        val = next(c for c in children if isinstance(c, _Value))
        return Modifier(str(qname), val.text, final=final, each=each)

    def modification(self, meta: Any, children: list[Any]) -> _Mods:
        mods = [c for c in children if isinstance(c, Modifier)]
        names = [m.name for m in mods]
        for name in names:
            if names.count(name) > 1:
                raise ModelicaSyntaxError(f"duplicate modifier '{name}'", meta.line, meta.column)
        return _Mods(tuple(mods))

    def within_clause(self, _meta: Any, children: list[Any]) -> _Within:
        return _Within(children[0])

    def class_kind(self, _meta: Any, children: list[Token]) -> ClassKind:
        return ClassKind(str(children[0]))

    def class_annotation(self, meta: Any, children: list[Any]) -> _ClassAnnotation:
        return _ClassAnnotation(children[0].text, meta.line)

    # -- declarations -------------------------------------------------------

    def declaration(self, meta: Any, children: list[Any]) -> Connector | ComponentInstance:
        class_ref: QualifiedName = children[0]
        ident = str(children[1])
        mods: tuple[Modifier, ...] = ()
        condition = doc = annotation = None
        for child in children[2:]:
            if isinstance(child, _Mods):
                mods = child.items
            elif isinstance(child, _Condition):
                condition = child.text
            elif isinstance(child, _Doc):
                doc = child.text
            elif isinstance(child, _Annotation):
                annotation = child.text

        if class_ref.terminal in CONNECTOR_CLASSES:
            direction, kind = CONNECTOR_CLASSES[class_ref.terminal]
            try:
                return Connector(
                    name=ident,
                    class_ref=class_ref,
                    direction=direction,
                    kind=kind,
                    attributes=mods,
                    condition=condition,
                    doc=doc,
                    annotation_text=annotation,
                    line=meta.line,
                )
            except ValueError as exc:
                raise ModelicaSyntaxError(str(exc), meta.line, meta.column) from exc
        return ComponentInstance(
            class_ref=class_ref,
            name=ident,
            modifiers=mods,
            condition=condition,
            doc=doc,
            annotation_text=annotation,
            line=meta.line,
        )

    def parameter_declaration(self, meta: Any, children: list[Any]) -> Parameter:
        final = isinstance(children[0], Token) and children[0].type == "FINAL"
        rest = children[1:] if final else children
        type_name: QualifiedName = rest[0]
        ident = str(rest[1])
        mods: tuple[Modifier, ...] = ()
        default = doc = annotation = None
        for child in rest[2:]:
            if isinstance(child, _Mods):
                mods = child.items
            elif isinstance(child, _Binding):
                default = child.text
            elif isinstance(child, _Doc):
                doc = child.text
            elif isinstance(child, _Annotation):
                annotation = child.text
        return Parameter(
            name=ident,
            type_name=str(type_name),
            default=default,
            doc=doc,
            modifiers=mods,
            final=final,
            annotation_text=annotation,
            line=meta.line,
        )

    def connect_clause(self, meta: Any, children: list[Any]) -> ConnectEquation:
        refs = [c for c in children if isinstance(c, str) and not isinstance(c, Token)]
        annotation = next((c.text for c in children if isinstance(c, _Annotation)), None)
        return ConnectEquation(refs[0], refs[1], annotation_text=annotation, line=meta.line)

    def protected_section(self, _meta: Any, children: list[Any]) -> _Section:
        return _Section("protected", tuple(children))

    def equation_section(self, _meta: Any, children: list[Any]) -> _Section:
        return _Section("equation", tuple(children))

    # -- the class ----------------------------------------------------------

    def class_definition(self, meta: Any, children: list[Any]) -> ModelicaBlock:
        kind: ClassKind = children[0]
        name_tok: Token = children[1]
        end_tok: Token = children[-1]
        if str(end_tok) != str(name_tok):
            raise ModelicaSyntaxError(
                f"'end {end_tok}' does not close '{name_tok}'", end_tok.line, end_tok.column, frozenset({str(name_tok)})
            )

        doc = None
        connectors: list[Connector] = []
        parameters: list[Parameter] = []
        instances: list[ComponentInstance] = []
        connects: list[ConnectEquation] = []
        annotations: list[_ClassAnnotation] = []

        def take(item: Any, *, protected: bool) -> None:
            if isinstance(item, Connector):
                if protected:
                    raise UnsupportedConstruct("protected connector", item.line)
                connectors.append(item)
            elif isinstance(item, Parameter):
                parameters.append(replace(item, protected=protected))
            elif isinstance(item, ComponentInstance):
                instances.append(replace(item, protected=protected))
            elif isinstance(item, ConnectEquation):
                connects.append(item)
            elif isinstance(item, _ClassAnnotation):
                annotations.append(item)

        for child in children[2:-1]:
            if isinstance(child, _Doc):
                doc = child.text
            elif isinstance(child, _Section):
                for item in child.items:
                    take(item, protected=child.kind == "protected")
            else:
                take(child, protected=False)

        if len(annotations) > 1:
            raise ModelicaSyntaxError("class annotation given more than once", annotations[1].line)

        try:
            return ModelicaBlock(
                name=str(name_tok),
                kind=kind,
                doc=doc,
                connectors=tuple(connectors),
                parameters=tuple(parameters),
                instances=tuple(instances),
                connects=tuple(connects),
                annotation_text=annotations[0].text if annotations else None,
            )
        except ValueError as exc:
            raise ModelicaSyntaxError(str(exc), meta.line, meta.column) from exc

    def start(self, _meta: Any, children: list[Any]) -> ModelicaBlock:
        block: ModelicaBlock = children[-1]
        if len(children) == 2:
            block = replace(block, within=children[0].name)
        return block


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _reject_unsupported(source: str) -> None:
    """Scan top-level tokens for constructs the subset does not cover."""
    depth = 0
    in_equations = False
    at_statement_start = True
    for tok in _parser().lex(source):
        value = str(tok)
        if value in {"(", "[", "{"}:
            depth += 1
            at_statement_start = False
            continue
        if value in {")", "]", "}"}:
            depth -= 1
            continue
        if depth > 0:
            continue
        if tok.type == "IDENT" and value in UNSUPPORTED_KEYWORDS:
            raise UnsupportedConstruct(value, tok.line, tok.column)
        if in_equations and at_statement_start and value not in _EQUATION_STARTS:
            raise UnsupportedConstruct("equation other than connect", tok.line, tok.column)
        if value == "equation":
            in_equations = True
        elif value == "protected":
            in_equations = False
        at_statement_start = value in {";", "equation", "protected"}


def _syntax_error(exc: UnexpectedInput, source: str) -> ModelicaSyntaxError:
    if isinstance(exc, UnexpectedToken):
        if exc.token.type == "$END":
            line = source.count("\n") + 1
            return ModelicaSyntaxError("unexpected end of input", line, None, frozenset(exc.expected))
        return ModelicaSyntaxError(
            f"unexpected {exc.token!s}", exc.line, exc.column, frozenset(exc.expected)
        )
    if isinstance(exc, UnexpectedCharacters):
        return ModelicaSyntaxError(
            f"unexpected character {exc.char!r}", exc.line, exc.column, frozenset(exc.allowed or ())
        )
    if isinstance(exc, UnexpectedEOF):
        line = source.count("\n") + 1
        return ModelicaSyntaxError("unexpected end of input", line, None, frozenset(exc.expected))
    return ModelicaSyntaxError(str(exc), getattr(exc, "line", None), getattr(exc, "column", None))


def parse(source: str) -> ModelicaBlock:
    """Parse one block or model.

    Raises ``ModelicaSyntaxError`` with line, column and the expected token set,
    or ``UnsupportedConstruct`` naming the first construct outside the subset.
    """
    try:
        _reject_unsupported(source)
        tree = _parser().parse(source)
    except UnexpectedInput as exc:
        raise _syntax_error(exc, source) from exc
    try:
        return _ToBlock(source).transform(tree)
    except VisitError as exc:
        if isinstance(exc.orig_exc, ModelicaParseError):
            raise exc.orig_exc from None
        raise


def parse_file(path: Path) -> ModelicaBlock:
    return parse(path.read_text(encoding="utf-8"))

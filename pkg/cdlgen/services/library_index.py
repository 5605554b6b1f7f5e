"""Index of available library classes with hard-rule and fuzzy lookup.

Hard-rule lookup only ever returns exact name matches. The fuzzy baseline
scores token overlap between the query and each entry's name and doc text;
it exists to reproduce the retrieval mix-ups exact matching avoids.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path
from typing import TYPE_CHECKING

import networkx as nx

from cdlgen.exceptions import ConfigError, EmptyIndex, ModelicaParseError, NotFound
from cdlgen.modelica import InterfaceSignature, ModelicaBlock, QualifiedName, parse_file

if TYPE_CHECKING:
    from cdlgen.config import LibraryConfig

logger = logging.getLogger(__name__)

INDEX_HEADER = "#cdl-index v1"
TOKEN_PATTERN = re.compile(r"[A-Z]+(?![a-z])|[A-Z]?[a-z]+|\d+")


class RetrievalMode(StrEnum):
    HARD_RULE = "hard_rule"
    BASELINE_FUZZY = "baseline_fuzzy"


class ResolutionStatus(StrEnum):
    FOUND = "found"
    RENAMED = "renamed"
    UNKNOWN = "unknown"


def tokenize(text: str) -> set[str]:
    """Case-folded words, splitting camelCase and digit runs."""
    return {match.lower() for match in TOKEN_PATTERN.findall(text)}


def jaccard(set_a: set[str], set_b: set[str]) -> float:
    if not set_a or not set_b:
        return 0.0
    return len(set_a & set_b) / len(set_a | set_b)


def doc_text_of(block: ModelicaBlock) -> str:
    """Class description followed by the description strings of its elements."""
    parts = [block.doc] if block.doc else []
    parts.extend(c.doc for c in block.connectors if c.doc)
    parts.extend(p.doc for p in block.parameters if p.doc)
    parts.extend(i.doc for i in block.instances if i.doc)
    return " ".join(parts)


@dataclass(frozen=True)
class LibraryEntry:
    fqn: QualifiedName
    kind: str
    interface: InterfaceSignature
    doc_text: str
    library_version: str
    source_path: str
    parameters: tuple[str, ...] = ()

    @property
    def tokens(self) -> set[str]:
        return tokenize(f"{self.fqn} {self.doc_text}")


@dataclass(frozen=True)
class RenamePair:
    old: QualifiedName
    new: QualifiedName


@dataclass(frozen=True)
class LibraryIndex:
    version: str
    entries: tuple[LibraryEntry, ...]
    rename_map: tuple[RenamePair, ...] = ()
    skipped: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        names = [str(e.fqn) for e in self.entries]
        if len(names) != len(set(names)):
            raise ValueError("index contains duplicate class names")
        _check_rename_map(self.rename_map, self.entries)

    def get(self, fqn: QualifiedName | str) -> LibraryEntry | None:
        key = str(fqn)
        return next((e for e in self.entries if str(e.fqn) == key), None)

    def class_names(self) -> list[str]:
        """Unqualified class names, unique, in index order."""
        seen: dict[str, None] = {}
        for entry in self.entries:
            seen.setdefault(entry.fqn.terminal)
        return list(seen)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class RetrievalResult:
    query: str
    mode: RetrievalMode
    hits: tuple[tuple[str, float], ...]
    exact: bool

    @property
    def fqns(self) -> list[str]:
        return [fqn for fqn, _ in self.hits]

    def as_text(self) -> str:
        return "".join(f"{fqn}\t{score:.4f}\n" for fqn, score in self.hits)


@dataclass(frozen=True)
class Resolution:
    status: ResolutionStatus
    fqn: QualifiedName | None = None


def _check_rename_map(pairs: tuple[RenamePair, ...], entries: tuple[LibraryEntry, ...]) -> None:
    if not pairs:
        return
    graph = nx.DiGraph()
    graph.add_edges_from((str(p.old), str(p.new)) for p in pairs)
    if not nx.is_directed_acyclic_graph(graph):
        cycle = nx.find_cycle(graph)
        raise ConfigError(f"rename map contains a cycle: {' -> '.join(a for a, _ in cycle)}")
    for pair in pairs:
        if not any(e.fqn.startswith(pair.new) for e in entries):
            raise ConfigError(f"rename target {pair.new} matches no indexed class")


def load_rename_map(path: Path) -> tuple[RenamePair, ...]:
    pairs: list[RenamePair] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        try:
            old, new = line.split("\t")
            pairs.append(RenamePair(QualifiedName.parse(old), QualifiedName.parse(new)))
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: expected 'old<TAB>new', got {line!r}") from exc
    return tuple(pairs)


def _entry_from_block(block: ModelicaBlock, version: str, source_path: str) -> LibraryEntry:
    return LibraryEntry(
        fqn=block.fqn,
        kind=block.kind.value,
        interface=block.interface(),
        doc_text=doc_text_of(block),
        library_version=version,
        source_path=source_path,
        parameters=tuple(p.name for p in block.parameters),
    )


def build_index(root: Path, version: str, rename_map: tuple[RenamePair, ...] = ()) -> LibraryIndex:
    """Parse every ``.mo`` file under ``root``; unparseable files are skipped with a warning."""
    root = Path(root)
    entries: list[LibraryEntry] = []
    skipped: list[str] = []
    for path in sorted(root.rglob("*.mo")):
        rel = path.relative_to(root).as_posix()
        try:
            block = parse_file(path)
        except (ModelicaParseError, UnicodeDecodeError) as exc:
            logger.warning("Skipping %s: %s", rel, exc)
            skipped.append(f"{rel}: {exc}")
            continue
        entries.append(_entry_from_block(block, version, rel))

    if not entries:
        raise EmptyIndex(str(root))
    entries.sort(key=lambda e: str(e.fqn))
    logger.info("Indexed %d classes from %s (%d skipped)", len(entries), root, len(skipped))
    return LibraryIndex(version=version, entries=tuple(entries), rename_map=rename_map, skipped=tuple(skipped))


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")


def _unescape(text: str) -> str:
    return re.sub(r"\\([\\tn])", lambda m: {"\\": "\\", "t": "\t", "n": "\n"}[m.group(1)], text)


def write_index(index: LibraryIndex, path: Path) -> None:
    lines = [f"{INDEX_HEADER} {index.version}"]
    lines.extend(
        "\t".join(
            (
                str(e.fqn),
                e.kind,
                str(len(e.interface.inputs)),
                str(len(e.interface.outputs)),
                e.source_path,
                _escape(e.doc_text),
            )
        )
        for e in index.entries
    )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_index(
    path: Path, library_root: Path | None = None, rename_map: tuple[RenamePair, ...] = ()
) -> LibraryIndex:
    """Load an index file; interfaces and parameter names are re-derived from the sources."""
    path = Path(path)
    root = library_root or path.parent
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith(INDEX_HEADER + " "):
        raise ConfigError(f"{path}: missing '{INDEX_HEADER}' header")
    version = lines[0][len(INDEX_HEADER) + 1 :]

    entries: list[LibraryEntry] = []
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split("\t")
        if len(fields) != 6:
            raise ConfigError(f"{path}:{lineno}: expected 6 tab-separated fields")
        fqn, kind, n_in, n_out, source_path, doc = fields
        block = parse_file(root / source_path)
        entry = _entry_from_block(block, version, source_path)
        counts = (len(entry.interface.inputs), len(entry.interface.outputs))
        if str(entry.fqn) != fqn or counts != (int(n_in), int(n_out)):
            raise ConfigError(f"{path}:{lineno}: record for {fqn} does not match {source_path}")
        entries.append(
            LibraryEntry(entry.fqn, kind, entry.interface, _unescape(doc), version, source_path, entry.parameters)
        )
    return LibraryIndex(version=version, entries=tuple(entries), rename_map=rename_map)


def hard_rule_lookup(index: LibraryIndex, name: str) -> RetrievalResult:
    """Exact match on the full name, or on the terminal segment for unqualified names."""
    name = name.strip()
    if not name:
        raise ValueError("lookup name must be non-empty")
    qualified = "." in name
    hits = [
        (str(e.fqn), 1.0)
        for e in index.entries
        if str(e.fqn) == name or (not qualified and e.fqn.terminal == name)
    ]
    if not hits:
        raise NotFound(name)
    return RetrievalResult(query=name, mode=RetrievalMode.HARD_RULE, hits=tuple(hits), exact=True)


def baseline_fuzzy_search(index: LibraryIndex, query: str, k: int = 5) -> RetrievalResult:
    if k < 1:
        raise ValueError("k must be at least 1")
    query_tokens = tokenize(query)
    scored: list[tuple[str, float]] = []
    for entry in index.entries:
        fqn = str(entry.fqn)
        score = 1.0 if fqn == query.strip() else jaccard(query_tokens, entry.tokens)
        if score > 0.0:
            scored.append((fqn, score))
    scored.sort(key=lambda item: (-item[1], item[0]))
    hits = tuple(scored[:k])
    exact = bool(hits) and all(
        fqn == query.strip() or fqn.rsplit(".", 1)[-1] == query.strip() for fqn, _ in hits
    )
    return RetrievalResult(query=query, mode=RetrievalMode.BASELINE_FUZZY, hits=hits, exact=exact)


def resolve_version(index: LibraryIndex, fqn: QualifiedName) -> Resolution:
    if index.get(fqn) is not None:
        return Resolution(ResolutionStatus.FOUND, fqn)
    # Longest matching prefix wins.
    for pair in sorted(index.rename_map, key=lambda p: -len(p.old.segments)):
        if fqn.startswith(pair.old):
            rewritten = QualifiedName(pair.new.segments + fqn.segments[len(pair.old.segments) :])
            if index.get(rewritten) is not None:
                return Resolution(ResolutionStatus.RENAMED, rewritten)
    return Resolution(ResolutionStatus.UNKNOWN)


@dataclass(frozen=True)
class RetrievalComparison:
    name: str
    hard_rule: tuple[str, ...]
    fuzzy_top: str | None
    diverges: bool


def compare_retrieval(index: LibraryIndex, names: list[str]) -> tuple[list[RetrievalComparison], float]:
    """Hard-rule hits against fuzzy top-1 for each name, plus the divergence rate."""
    rows: list[RetrievalComparison] = []
    for name in names:
        try:
            exact = tuple(hard_rule_lookup(index, name).fqns)
        except NotFound:
            exact = ()
        fuzzy = baseline_fuzzy_search(index, name, k=1).fqns
        top = fuzzy[0] if fuzzy else None
        rows.append(RetrievalComparison(name, exact, top, diverges=top not in exact))
    rate = sum(r.diverges for r in rows) / len(rows) if rows else 0.0
    return rows, rate


def load_library(config: LibraryConfig) -> LibraryIndex:
    """The configured index file when it exists, otherwise a fresh scan of the library root."""
    rename_map = load_rename_map(config.rename_map) if config.rename_map is not None else ()
    if config.index_path is not None and config.index_path.exists():
        return read_index(config.index_path, config.root, rename_map)
    return build_index(config.root, config.version, rename_map)

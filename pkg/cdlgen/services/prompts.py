"""Prompt templates for the selector, generator and evaluator roles.

Templates live in ``data/prompts`` as plain text: a header line naming the
role and its placeholders, the system text, a ``=== user ===`` separator and
the user template. Substitution is a single pass over ``{name}`` markers;
values are inserted raw, so a value containing braces is never re-expanded.
"""

from __future__ import annotations

import logging
import re
from collections.abc import Mapping
from dataclasses import dataclass, field
from enum import StrEnum
from functools import cache
from pathlib import Path
from types import MappingProxyType

from cdlgen.config import data_path
from cdlgen.exceptions import ConfigError, ExtraPlaceholder, MissingPlaceholder
from cdlgen.services.tasks import ReferenceTask

logger = logging.getLogger(__name__)

PLACEHOLDER = re.compile(r"\{([A-Za-z_]\w*)\}")
HEADER = re.compile(r"^#template role_id=(?P<role>\w+) placeholders=(?P<names>[\w,]*)$")
USER_SEPARATOR = "=== user ==="


class RoleId(StrEnum):
    CODE_GENERATOR = "code_generator"
    CONTROL_EXPERT = "control_expert"
    ITERATION_EVALUATOR = "iteration_evaluator"
    BASIC_LOGIC = "basic_logic"


PIPELINE_ROLES = frozenset({RoleId.CODE_GENERATOR, RoleId.CONTROL_EXPERT, RoleId.ITERATION_EVALUATOR})


class LogicBlock(StrEnum):
    AND = "And"
    OR = "Or"
    NOT = "Not"
    SWITCH = "Switch"


class PromptVariant(StrEnum):
    A_MINIMAL = "a_minimal"
    B_DETAILED = "b_detailed"


@dataclass(frozen=True)
class PromptTemplate:
    role_id: RoleId
    system_text: str
    user_template: str
    placeholder_set: tuple[str, ...]
    name: str = ""

    def __post_init__(self) -> None:
        used = set(PLACEHOLDER.findall(self.user_template))
        if used != set(self.placeholder_set):
            label = self.name or self.role_id
            msg = f"template {label}: header declares {sorted(self.placeholder_set)}, body uses {sorted(used)}"
            raise ConfigError(msg)
        if self.role_id in PIPELINE_ROLES and not self.system_text.strip():
            raise ConfigError(f"template {self.name or self.role_id}: system text is empty")


@dataclass(frozen=True)
class PromptBundle:
    role_id: RoleId
    system_text: str
    user_text: str
    substitutions: Mapping[str, str] = field(default_factory=dict)

    def as_text(self) -> str:
        return f"[system]\n{self.system_text}\n[user]\n{self.user_text}\n"


def parse_template(text: str, name: str = "") -> PromptTemplate:
    text = text.replace("\r\n", "\n")
    header, _, body = text.partition("\n")
    match = HEADER.match(header)
    if match is None:
        raise ConfigError(f"template {name}: first line must be '#template role_id=... placeholders=...'")
    system, separator, user = body.partition(f"\n{USER_SEPARATOR}\n")
    if not separator:
        # empty system text: the separator directly follows the header
        if body.startswith(f"{USER_SEPARATOR}\n"):
            system, user = "", body.removeprefix(f"{USER_SEPARATOR}\n")
        else:
            raise ConfigError(f"template {name}: no '{USER_SEPARATOR}' line")
    try:
        role = RoleId(match["role"])
    except ValueError:
        raise ConfigError(f"template {name}: unknown role_id {match['role']}") from None
    names = tuple(n for n in match["names"].split(",") if n)
    return PromptTemplate(role, system, user.removesuffix("\n"), names, name)


def template_path(name: str) -> Path:
    return data_path("prompts", f"{name}.tmpl")


@cache
def load_template(name: str) -> PromptTemplate:
    """Load a shipped template, e.g. ``code_generator`` or ``basic_logic/and_a``."""
    path = template_path(name)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read template {path}: {exc}") from exc
    return parse_template(text, name)


def render(template: PromptTemplate, values: Mapping[str, str]) -> PromptBundle:
    for name in template.placeholder_set:
        if name not in values:
            raise MissingPlaceholder(name)
    for name in sorted(values):
        if name not in template.placeholder_set:
            raise ExtraPlaceholder(name)
    user_text = PLACEHOLDER.sub(lambda m: values[m[1]], template.user_template)
    used = {name: values[name] for name in template.placeholder_set}
    return PromptBundle(template.role_id, template.system_text, user_text, MappingProxyType(used))


def basic_logic_prompt(block: LogicBlock | str, variant: PromptVariant | str) -> PromptBundle:
    block = LogicBlock(block)
    suffix = "a" if PromptVariant(variant) is PromptVariant.A_MINIMAL else "b"
    return render(load_template(f"basic_logic/{block.value.lower()}_{suffix}"), {})


def control_task_prompt(task: ReferenceTask) -> str:
    """Goal sentence, interface declaration and numbered sequence rules."""
    lines = [
        f"Please {task.goal_phrase}.",
        "The inputs are " + "; ".join(p.describe() for p in task.inputs) + ".",
        "The outputs are " + "; ".join(p.describe() for p in task.outputs) + ".",
    ]
    if task.params:
        lines.append("The parameters are " + "; ".join(p.describe() for p in task.params) + ".")
    rules = " ".join(f"({n}) {rule}" for n, rule in enumerate(task.rules, start=1))
    lines.append(f"The control sequence is: {rules}")
    return "\n".join(lines)


def golden_path(name: str) -> Path:
    return data_path("prompts", "golden", f"{name}.txt")

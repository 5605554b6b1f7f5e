from __future__ import annotations

import re
import tomllib
from pathlib import Path

ROOT = Path(__file__).parents[1]


def _names(specs: list[str]) -> set[str]:
    return {re.split(r"[<>=!~\[ ]", spec, maxsplit=1)[0].lower() for spec in specs}


def test_requirements_match_the_project_manifest() -> None:
    project = tomllib.loads((ROOT / "pyproject.toml").read_text(encoding="utf-8"))["project"]
    lines = (ROOT / "requirements.txt").read_text(encoding="utf-8").splitlines()
    requirements = [line.strip() for line in lines if line.strip() and not line.startswith("#")]

    declared = _names(project["dependencies"]) | _names(project["optional-dependencies"]["dev"])

    assert _names(requirements) == declared

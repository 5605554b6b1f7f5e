"""Compile check through an external Modelica toolchain.

The toolchain runs a script rendered from a template with ``{model_path}``
and ``{model_name}``. A run fails on a non-zero exit status or when the log
matches the configured error pattern.
"""

from __future__ import annotations

import logging
import re
import shutil
import subprocess
from dataclasses import dataclass
from pathlib import Path

from cdlgen.config import ToolchainConfig, data_path
from cdlgen.exceptions import ToolchainUnavailable

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CompileResult:
    passed: bool
    log: str
    returncode: int


def script_template(config: ToolchainConfig) -> str:
    path = config.script_template_path or data_path("toolchain", "check_model.mos")
    return Path(path).read_text(encoding="utf-8")


def render_script(template: str, model_path: Path, model_name: str) -> str:
    return template.replace("{model_path}", model_path.as_posix()).replace("{model_name}", model_name)


def compile_external(source: str, model_name: str, config: ToolchainConfig, workdir: Path) -> CompileResult:
    """Write ``source`` into ``workdir`` and check it with the configured command."""
    command = shutil.which(config.command)
    if command is None:
        raise ToolchainUnavailable(config.command)
    workdir.mkdir(parents=True, exist_ok=True)
    model_path = (workdir / f"{model_name}.mo").resolve()
    model_path.write_text(source, encoding="utf-8")
    script_path = workdir / "check_model.mos"
    script_path.write_text(render_script(script_template(config), model_path, model_name), encoding="utf-8")

    logger.info("Checking %s with %s", model_name, config.command)
    try:
        result = subprocess.run(  # noqa: S603
            [command, script_path.name],
            cwd=str(workdir),
            check=False,
            capture_output=True,
            text=True,
            timeout=config.timeout_s,
        )
    except subprocess.TimeoutExpired:
        return CompileResult(passed=False, log=f"toolchain timed out after {config.timeout_s} s", returncode=-1)

    log = result.stdout + result.stderr
    failed = result.returncode != 0 or re.search(config.error_pattern, log) is not None
    return CompileResult(passed=not failed, log=log, returncode=result.returncode)

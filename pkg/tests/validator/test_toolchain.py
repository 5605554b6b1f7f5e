from __future__ import annotations

import stat
import sys
from typing import TYPE_CHECKING

import pytest

from cdlgen.config import ToolchainConfig
from cdlgen.exceptions import ToolchainUnavailable
from cdlgen.services.toolchain import compile_external, render_script

if TYPE_CHECKING:
    from pathlib import Path

posix_only = pytest.mark.skipif(sys.platform == "win32", reason="uses a shell script as the toolchain")


def _fake_toolchain(tmp_path: Path, output: str, status: int = 0) -> Path:
    path = tmp_path / "fake-omc"
    path.write_text(f"#!/bin/sh\ncat \"$1\" > script.seen\necho '{output}'\nexit {status}\n", encoding="utf-8")
    path.chmod(path.stat().st_mode | stat.S_IXUSR)
    return path


def test_render_script_fills_placeholders(tmp_path: Path) -> None:
    script = render_script('loadFile("{model_path}");\ncheckModel({model_name});\n', tmp_path / "Task4.mo", "Task4")

    assert script == f'loadFile("{(tmp_path / "Task4.mo").as_posix()}");\ncheckModel(Task4);\n'


def test_missing_command_is_unavailable(tmp_path: Path) -> None:
    config = ToolchainConfig(command="cdlgen-no-such-toolchain")

    with pytest.raises(ToolchainUnavailable):
        compile_external("block A\nend A;\n", "A", config, tmp_path)


@posix_only
def test_clean_log_passes(tmp_path: Path) -> None:
    config = ToolchainConfig(command=str(_fake_toolchain(tmp_path, "Check of A completed successfully.")))
    workdir = tmp_path / "work"

    result = compile_external("block A\nend A;\n", "A", config, workdir)

    assert result.passed
    assert "completed successfully" in result.log
    assert (workdir / "A.mo").read_text(encoding="utf-8") == "block A\nend A;\n"
    assert "checkModel(A);" in (workdir / "script.seen").read_text(encoding="utf-8")


@posix_only
def test_error_line_fails_despite_zero_status(tmp_path: Path) -> None:
    config = ToolchainConfig(command=str(_fake_toolchain(tmp_path, "[A.mo:3:1-3:9] Error: Class Foo not found")))

    result = compile_external("block A\nend A;\n", "A", config, tmp_path / "work")

    assert not result.passed
    assert result.returncode == 0


@posix_only
def test_nonzero_status_fails(tmp_path: Path) -> None:
    config = ToolchainConfig(command=str(_fake_toolchain(tmp_path, "crashed", status=3)))

    result = compile_external("block A\nend A;\n", "A", config, tmp_path / "work")

    assert not result.passed
    assert result.returncode == 3

from __future__ import annotations

from typing import TYPE_CHECKING

import pytest

from cdlgen.config import data_path
from scripts.cdlgen import EXIT_CONFIG, EXIT_EMPTY_INDEX, EXIT_FAILED, EXIT_OK, EXIT_USAGE, main

if TYPE_CHECKING:
    from pathlib import Path

TASK4_AI = str(data_path("modules", "task4_ai.mo"))


# ── Library commands ───────────────────────────────────────────────────────


def test_lookup_prints_the_exact_match(capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["lookup", "And"]) == EXIT_OK

    assert "Buildings.Controls.OBC.CDL.Logical.And\t1.0000\n" in capsys.readouterr().out


def test_lookup_of_a_misspelled_name_fails() -> None:
    assert main(["lookup", "Substract"]) == EXIT_FAILED


def test_index_of_an_empty_tree(tmp_path: Path) -> None:
    (tmp_path / "lib").mkdir()

    code = main(["index", str(tmp_path / "lib"), "--version", "0.0", "-o", str(tmp_path / "cdl.idx")])

    assert code == EXIT_EMPTY_INDEX
    assert not (tmp_path / "cdl.idx").exists()


def test_unknown_flag_is_a_usage_error() -> None:
    with pytest.raises(SystemExit) as excinfo:
        main(["lookup", "And", "--no-such-flag"])

    assert excinfo.value.code == EXIT_USAGE


def test_missing_config_file(tmp_path: Path) -> None:
    assert main(["lookup", "And", "--config", str(tmp_path / "absent.cfg")]) == EXIT_CONFIG


# ── Block commands ─────────────────────────────────────────────────────────


def test_validate_accepts_the_generated_block(tmp_path: Path) -> None:
    report = tmp_path / "report.txt"

    assert main(["validate", TASK4_AI, "--task", "4", "-o", str(report)]) == EXIT_OK
    assert report.exists()


def test_seeded_fault_fails_validation(tmp_path: Path) -> None:
    mutant = tmp_path / "mutant.mo"

    assert main(["seed-fault", TASK4_AI, "--fault", "unknown_class", "-o", str(mutant)]) == EXIT_OK
    assert main(["validate", str(mutant)]) == EXIT_FAILED


def test_conform_writes_the_trace(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    trace = tmp_path / "trace.csv"

    assert main(["conform", TASK4_AI, "--task", "4", "--trace", str(trace)]) == EXIT_OK

    assert capsys.readouterr().out.startswith("oracle O4: pass\n")
    assert trace.read_text(encoding="utf-8").startswith("time_s,")


def test_simulate_with_a_bad_input_trace_fails_cleanly(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    inputs = tmp_path / "inputs.csv"
    inputs.write_text("time_s,TAirSup,TAirSupSet,uCooCoi\n0,290,285,0.5\n0,290,285,0.5\n", encoding="utf-8")

    assert main(["simulate", TASK4_AI, "--inputs", str(inputs)]) == EXIT_FAILED
    assert capsys.readouterr().out == ""


def test_unknown_task_id_is_a_config_error() -> None:
    assert main(["conform", TASK4_AI, "--task", "9"]) == EXIT_CONFIG


def test_cost_point_and_range(capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["cost", "--baseline", "10", "--assisted", "4", "--rate", "100"]) == EXIT_OK
    assert "savings per module 600 (60%)" in capsys.readouterr().out

    code = main(["cost", "--baseline", "10", "20", "--assisted", "4", "--rate", "100", "--modules", "50", "100"])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert out.startswith("low\n")
    assert "portfolio of 100 modules 160,000" in out


def test_cost_rejects_zero_baseline() -> None:
    assert main(["cost", "--baseline", "0", "--assisted", "4", "--rate", "100"]) == EXIT_CONFIG


# ── Sessions ───────────────────────────────────────────────────────────────


def test_cassette_then_replay_then_report(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    cassette = tmp_path / "task4.cassette"
    sessions = tmp_path / "sessions"

    assert main(["cassette", "build", "--task", "4", "--cassette", str(cassette)]) == EXIT_OK
    assert cassette.exists()
    capsys.readouterr()

    replay = ["--mode", "replay", "--cassette", str(cassette), "--output-dir", str(sessions)]
    code = main(["generate", "--task", "4", *replay])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert "\tconverged\t" in out

    assert main(["eval", "report", str(sessions)]) == EXIT_OK
    assert "success rate" in capsys.readouterr().out


@pytest.mark.usefixtures("no_network")
def test_shipped_cassette_replays(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    code = main(["generate", "--task", "4", "--output-dir", str(tmp_path)])

    assert code == EXIT_OK
    assert "\tconverged\t" in capsys.readouterr().out


def test_cassette_build_writes_to_the_output_dir(tmp_path: Path) -> None:
    shipped = data_path("cassettes", "task4.cassette")
    before = shipped.read_bytes()

    assert main(["cassette", "build", "--task", "4", "--output-dir", str(tmp_path)]) == EXIT_OK

    assert shipped.read_bytes() == before
    assert (tmp_path / "task4.cassette").read_bytes() == before


def test_replay_without_a_cassette(tmp_path: Path) -> None:
    code = main(["generate", "--task", "4", "--mode", "replay", "--cassette", str(tmp_path / "none.cassette")])

    assert code == EXIT_CONFIG

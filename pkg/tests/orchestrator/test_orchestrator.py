from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING

import pytest

from cdlgen.config import GatewayMode, SelectionMode, default_config_path, load_config
from cdlgen.exceptions import ConfigError, NoModulesSelected
from cdlgen.models import Provenance, SessionStatus, Verdict
from cdlgen.services.gateway import Gateway, ScriptedProvider
from cdlgen.services.orchestrator import (
    ROLES,
    build_cassette,
    parse_bullets,
    read_session,
    run_session,
    run_sessions,
    select_modules,
    session_id_for,
)

if TYPE_CHECKING:
    from cdlgen.config import AppConfig
    from cdlgen.services.library_index import LibraryIndex
    from cdlgen.services.tasks import ReferenceTask

CDL = "Buildings.Controls.OBC.CDL"
SELECTION = "- Subtract\n- GreaterThreshold\n- TrueDelay\n- Hysteresis\n- Not\n- And\n- Or\n- Switch\n- Constant"


@pytest.fixture(scope="module")
def good_reply() -> str:
    source = (Path(__file__).parents[2] / "cdlgen" / "data" / "modules" / "task4_ai.mo").read_text(encoding="utf-8")
    return f"```modelica\n{source}```\n"


@pytest.fixture(scope="module")
def bad_reply(good_reply: str) -> str:
    return good_reply.replace("Reals.Subtract sub1", "Reals.Substract sub1")


@pytest.fixture
def replay_cassette(tmp_path: Path, library: LibraryIndex, task4: ReferenceTask, ci_config: AppConfig) -> Path:
    cassette = tmp_path / "task4.cassette"
    script = Path(__file__).parents[2] / "cdlgen" / "data" / "cassettes" / "task4.script"
    build_cassette(script, task4, library, ci_config, cassette)
    return cassette


def _scripted(*replies: str) -> tuple[Gateway, ScriptedProvider]:
    provider = ScriptedProvider("script", replies)
    return Gateway(GatewayMode.LIVE, dict.fromkeys(ROLES, provider)), provider


def _with_pipeline(config: AppConfig, **values: object) -> AppConfig:
    return config.model_copy(update={"pipeline": config.pipeline.model_copy(update=values)})


# ── Module selection ───────────────────────────────────────────────────────


def test_parse_bullets_strips_markup() -> None:
    reply = "Here are the modules:\n- `Subtract`\n* **And**\n1. Or.\n2) Not\n- Subtract\n"

    assert parse_bullets(reply) == ["Subtract", "And", "Or", "Not"]


def test_hard_rule_selection_drops_unknown_names(library: LibraryIndex, task4: ReferenceTask) -> None:
    gateway, _ = _scripted("- Subtract\n- Substract\n- Constant")
    notes: list[str] = []

    selected = select_modules(task4, library, gateway, notes=notes)

    assert [m.fqn for m in selected] == [
        f"{CDL}.Reals.Subtract",
        f"{CDL}.Integers.Sources.Constant",
        f"{CDL}.Logical.Sources.Constant",
        f"{CDL}.Reals.Sources.Constant",
    ]
    assert {m.provenance for m in selected} == {Provenance.HARD_RULE}
    assert len(notes) == 1
    assert "'Substract'" in notes[0]


def test_fuzzy_selection_keeps_the_top_hit(library: LibraryIndex, task4: ReferenceTask) -> None:
    gateway, _ = _scripted(f"- {CDL}.Reals.Subtract")

    (selected,) = select_modules(task4, library, gateway, mode=SelectionMode.FUZZY)

    assert selected.fqn == f"{CDL}.Reals.Subtract"
    assert selected.provenance is Provenance.FUZZY
    assert selected.query == f"{CDL}.Reals.Subtract"


def test_selector_prompt_lists_library_classes(library: LibraryIndex, task4: ReferenceTask) -> None:
    gateway, provider = _scripted("- And")

    select_modules(task4, library, gateway)

    (request,) = provider.calls
    assert "\nHysteresis\n" in request.user_text
    assert request.role_id == "control_expert"


def test_nothing_selected(library: LibraryIndex, task4: ReferenceTask) -> None:
    gateway, _ = _scripted("- Flux\n- Capacitor")

    with pytest.raises(NoModulesSelected) as excinfo:
        select_modules(task4, library, gateway)
    assert excinfo.value.names == ["Flux", "Capacitor"]


# ── Sessions ───────────────────────────────────────────────────────────────


def test_session_id_is_stable(task4: ReferenceTask, ci_config: AppConfig) -> None:
    session_id = session_id_for(task4, ci_config)

    assert session_id == session_id_for(task4, ci_config)
    assert session_id.startswith("task4-")
    assert session_id != session_id_for(task4, _with_pipeline(ci_config, max_compile_iters=5))


def test_misspelled_class_is_repaired(
    library: LibraryIndex, task4: ReferenceTask, ci_config: AppConfig, good_reply: str, bad_reply: str
) -> None:
    gateway, provider = _scripted(SELECTION, bad_reply, good_reply)

    session = run_session(task4, library, ci_config, gateway=gateway)

    assert session.status is SessionStatus.CONVERGED
    assert (session.counters.compile, session.counters.simulate) == (2, 1)
    assert len(session.transcript) == 3
    assert provider.remaining == 0
    first, final = session.artifacts
    assert not first.passed_compile
    assert final.passed_simulate
    assert final.oracle_pass
    repair_prompt = provider.calls[2].user_text
    assert f"{CDL}.Reals.Substract" in repair_prompt
    assert session.transcript[2].role_id == "iteration_evaluator"


def test_compile_budget_runs_out(
    library: LibraryIndex, task4: ReferenceTask, ci_config: AppConfig, bad_reply: str
) -> None:
    gateway, _ = _scripted(SELECTION, bad_reply, bad_reply, bad_reply)

    session = run_session(task4, library, ci_config, gateway=gateway)

    assert session.status is SessionStatus.FAILED_MAX_ITERATIONS
    assert session.counters.compile == 3
    assert session.cause == "compile gate failed 3 times"
    assert len(session.artifacts) == 3


def test_gateway_failure_is_unrecoverable(
    library: LibraryIndex, task4: ReferenceTask, ci_config: AppConfig, bad_reply: str
) -> None:
    gateway, _ = _scripted(SELECTION, bad_reply)

    session = run_session(task4, library, ci_config, gateway=gateway)

    assert session.status is SessionStatus.FAILED_UNRECOVERABLE
    assert session.cause is not None
    assert session.cause.startswith("ProviderError")
    assert len(session.artifacts) == 1


def test_evaluator_rejection_buys_one_repair(
    library: LibraryIndex, task4: ReferenceTask, ci_config: AppConfig, good_reply: str
) -> None:
    config = _with_pipeline(ci_config, ai_eval=True, max_eval_iters=2)
    gateway, provider = _scripted(SELECTION, good_reply, "No.", good_reply, "Yes.")

    session = run_session(task4, library, config, gateway=gateway)

    assert session.status is SessionStatus.CONVERGED
    assert session.counters.evaluate == 2
    assert [r.gate for r in session.evaluations] == [Verdict.NO, Verdict.YES]
    assert "time_s," in provider.calls[2].user_text


def test_unparseable_verdict_does_not_fail_the_session(
    library: LibraryIndex, task4: ReferenceTask, ci_config: AppConfig, good_reply: str
) -> None:
    config = _with_pipeline(ci_config, ai_eval=True)
    gateway, _ = _scripted(SELECTION, good_reply, "Probably fine.")

    session = run_session(task4, library, config, gateway=gateway)

    assert session.status is SessionStatus.CONVERGED
    (record,) = session.evaluations
    assert record.gate is None
    assert any("neither yes nor no" in note for note in session.notes)


# ── Cassettes and session directories ──────────────────────────────────────


@pytest.mark.usefixtures("no_network")
def test_recorded_cassette_replays_the_session(
    tmp_path: Path, library: LibraryIndex, task4: ReferenceTask, replay_cassette: Path
) -> None:
    config = load_config(default_config_path(), mode=GatewayMode.REPLAY, cassette=replay_cassette)

    session = run_session(task4, library, config, output_dir=tmp_path / "out")

    assert session.status is SessionStatus.CONVERGED
    assert session.counters.compile == 2
    assert len(session.transcript) == 3
    assert all(entry.from_replay for entry in session.transcript)
    directory = tmp_path / "out" / session.session_id
    assert read_session(directory) == session
    summary = (directory / "session.summary").read_text(encoding="utf-8")
    assert "status=converged\n" in summary
    assert "compile_iterations=2\n" in summary
    assert "llm_calls=3\n" in summary
    assert "oracle=pass\n" in summary
    assert "unknown_class" in (directory / "diagnostics" / "iter_1.txt").read_text(encoding="utf-8")
    assert (directory / "traces" / "iter_2.csv").read_text(encoding="utf-8").startswith("time_s,")
    assert (directory / "conformance.txt").read_text(encoding="utf-8").startswith("oracle O4: pass")


@pytest.mark.usefixtures("no_network")
def test_replays_are_byte_identical(
    tmp_path: Path, library: LibraryIndex, task4: ReferenceTask, replay_cassette: Path
) -> None:
    config = load_config(default_config_path(), mode=GatewayMode.REPLAY, cassette=replay_cassette)
    first = run_session(task4, library, config, output_dir=tmp_path / "a")
    second = run_session(task4, library, config, output_dir=tmp_path / "b")

    def files(root: Path) -> dict[str, bytes]:
        return {
            str(path.relative_to(root)): path.read_bytes()
            for path in sorted(root.rglob("*"))
            if path.is_file() and path.name != "timestamps.txt"
        }

    assert first.session_id == second.session_id
    one, two = files(tmp_path / "a" / first.session_id), files(tmp_path / "b" / second.session_id)
    assert one == two
    assert "session.json" in one


@pytest.mark.usefixtures("no_network")
def test_replay_miss_is_unrecoverable(tmp_path: Path, library: LibraryIndex, task4: ReferenceTask) -> None:
    empty = tmp_path / "empty.cassette"
    empty.write_bytes(b"")
    config = load_config(default_config_path(), mode=GatewayMode.REPLAY, cassette=empty)

    session = run_session(task4, library, config)

    assert session.status is SessionStatus.FAILED_UNRECOVERABLE
    assert session.cause is not None
    assert session.cause.startswith("ReplayMiss")


@pytest.mark.usefixtures("no_network")
def test_batch_keeps_task_order(library: LibraryIndex, task4: ReferenceTask, replay_cassette: Path) -> None:
    config = load_config(default_config_path(), mode=GatewayMode.REPLAY, cassette=replay_cassette)

    sessions = run_sessions([task4, task4], library, config, jobs=2)

    assert [s.status for s in sessions] == [SessionStatus.CONVERGED, SessionStatus.CONVERGED]
    assert sessions[0].artifacts == sessions[1].artifacts


@pytest.mark.usefixtures("no_network")
def test_batch_gives_repeated_tasks_their_own_directories(
    tmp_path: Path, library: LibraryIndex, task4: ReferenceTask, replay_cassette: Path
) -> None:
    config = load_config(default_config_path(), mode=GatewayMode.REPLAY, cassette=replay_cassette)
    base = session_id_for(task4, config)

    sessions = run_sessions([task4] * 4, library, config, jobs=4, output_dir=tmp_path)

    assert [s.session_id for s in sessions] == [f"{base}-{n}" for n in range(1, 5)]
    assert [s.status for s in sessions] == [SessionStatus.CONVERGED] * 4
    for session in sessions:
        assert read_session(tmp_path / session.session_id) == session
    assert not (tmp_path / base).exists()


def test_batch_replay_needs_the_cassette(tmp_path: Path, library: LibraryIndex, task4: ReferenceTask) -> None:
    config = load_config(default_config_path(), mode=GatewayMode.REPLAY, cassette=tmp_path / "missing.cassette")

    with pytest.raises(ConfigError, match="record it first"):
        run_sessions([task4], library, config)

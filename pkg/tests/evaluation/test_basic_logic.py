from __future__ import annotations

from typing import TYPE_CHECKING

import pytest

from cdlgen.config import GatewayMode
from cdlgen.evaluation.basic_logic import compile_check, run_basic_logic
from cdlgen.services.gateway import Gateway, ScriptedProvider

if TYPE_CHECKING:
    from cdlgen.services.library_index import LibraryIndex

AND_REPLY = """Here is the block:
```modelica
block AndGate
  Buildings.Controls.OBC.CDL.Interfaces.BooleanInput u1;
  Buildings.Controls.OBC.CDL.Interfaces.BooleanInput u2;
  Buildings.Controls.OBC.CDL.Interfaces.BooleanOutput y;
  Buildings.Controls.OBC.CDL.Logical.And and1;
equation
  connect(u1, and1.u1);
  connect(u2, and1.u2);
  connect(and1.y, y);
end AndGate;
```
"""


def test_compiling_reply(library: LibraryIndex) -> None:
    assert compile_check(AND_REPLY, library) is None


def test_unknown_class_reply(library: LibraryIndex) -> None:
    error = compile_check(AND_REPLY.replace("Logical.And and1", "Logical.AndGate and1"), library)

    assert error is not None
    assert "Logical.AndGate" in error


def test_truncated_reply(library: LibraryIndex) -> None:
    assert compile_check("```modelica\nblock AndGate\n```", library) is not None


def test_trials_count_compiling_replies(library: LibraryIndex) -> None:
    provider = ScriptedProvider("script", [AND_REPLY, "I cannot help with that.", AND_REPLY])
    gateway = Gateway(GatewayMode.LIVE, {"generator": provider}, model_ids={"generator": "gen-model"})

    run = run_basic_logic("And", "a_minimal", 3, gateway, library)

    assert [o.compiled for o in run.outcomes] == [True, False, True]
    assert run.success_rate == pytest.approx(2 / 3)
    assert run.metrics["gen-model"].calls == 3
    assert run.as_text().startswith("And a_minimal: 67% of 3 trials compiled")


def test_trials_must_be_positive(library: LibraryIndex) -> None:
    gateway = Gateway(GatewayMode.LIVE, {"generator": ScriptedProvider("script", [])})

    with pytest.raises(ValueError, match="trials"):
        run_basic_logic("Or", "b_detailed", 0, gateway, library)

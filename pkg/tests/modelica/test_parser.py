from __future__ import annotations

import pytest

from cdlgen.config import data_path
from cdlgen.exceptions import ModelicaSyntaxError, UnsupportedConstruct
from cdlgen.modelica import Direction, PortSpec, QualifiedName, SignalKind, interface_of, parse, parse_file, print_block

ENABLE = """within Buildings.Controls.OBC.CDL.Examples;
block Enable "Enable a chiller"
  parameter Real TSet(final unit="K") = 280 "Setpoint";
  Buildings.Controls.OBC.CDL.Interfaces.RealInput T(final unit="K") "Measured";
  Buildings.Controls.OBC.CDL.Interfaces.BooleanOutput y "Enable";
  Buildings.Controls.OBC.CDL.Reals.GreaterThreshold gre(final t=TSet) "Compare";
equation
  connect(T, gre.u);
  connect(gre.y, y);
end Enable;
"""


def test_interface_lists_connectors_in_declaration_order() -> None:
    interface = interface_of(parse(ENABLE))

    assert interface.ports == (
        PortSpec("T", Direction.INPUT, SignalKind.REAL, unit="K"),
        PortSpec("y", Direction.OUTPUT, SignalKind.BOOLEAN),
    )
    assert [str(p) for p in interface.outputs] == [f"y:{SignalKind.BOOLEAN}"]


def test_parse_reads_connectors_parameters_and_connects() -> None:
    block = parse(ENABLE)

    assert block.fqn == QualifiedName.parse("Buildings.Controls.OBC.CDL.Examples.Enable")
    assert block.doc == "Enable a chiller"
    assert [(c.name, c.direction, c.kind) for c in block.connectors] == [
        ("T", Direction.INPUT, SignalKind.REAL),
        ("y", Direction.OUTPUT, SignalKind.BOOLEAN),
    ]
    assert block.connector("T").unit == "K"
    assert block.parameter("TSet").default == "280"
    assert block.instance("gre").modifier("t") == "TSet"
    assert [(eq.source, eq.target) for eq in block.connects] == [("T", "gre.u"), ("gre.y", "y")]


def test_interface_lists_inputs_and_outputs() -> None:
    interface = parse(ENABLE).interface()

    assert interface.summary() == "inputs [T:Real], outputs [y:Boolean]"


def test_missing_semicolon_reports_line() -> None:
    source = (
        "block B\n"
        "  Buildings.Controls.OBC.CDL.Interfaces.RealInput u\n"
        "  Buildings.Controls.OBC.CDL.Interfaces.RealOutput y;\n"
        "end B;\n"
    )

    with pytest.raises(ModelicaSyntaxError) as excinfo:
        parse(source)
    assert excinfo.value.line == 3


def test_mismatched_end_name_is_a_syntax_error() -> None:
    with pytest.raises(ModelicaSyntaxError, match="does not close"):
        parse(ENABLE.replace("end Enable;", "end Other;"))


def test_algorithm_section_is_unsupported() -> None:
    source = (
        "block B\n"
        "  Buildings.Controls.OBC.CDL.Interfaces.RealInput u;\n"
        "  Buildings.Controls.OBC.CDL.Interfaces.RealOutput y;\n"
        "algorithm\n"
        "  y := u;\n"
        "end B;\n"
    )

    with pytest.raises(UnsupportedConstruct) as excinfo:
        parse(source)
    assert excinfo.value.construct == "algorithm"
    assert excinfo.value.line == 4


def test_plain_equations_are_unsupported() -> None:
    source = ENABLE.replace("  connect(gre.y, y);\n", "  y = gre.y;\n")

    with pytest.raises(UnsupportedConstruct, match="equation other than connect"):
        parse(source)


def test_reference_module_survives_printing() -> None:
    block = parse_file(data_path("modules", "t1_chiller_enable.mo"))

    printed = print_block(block)

    assert parse(printed) == block
    assert printed.startswith("within Buildings.Controls.OBC.CDL.Examples;\nblock ChillerEnable")
    assert "\nprotected\n  Buildings.Controls.OBC.CDL.Reals.Subtract dT" in printed


# ── Shipped modules ────────────────────────────────────────────────────────


@pytest.mark.parametrize("name", ["task4_ai.mo", "plant_requests.mo", "t1_chiller_enable.mo"])
def test_printing_is_stable_under_reparsing(name: str) -> None:
    block = parse_file(data_path("modules", name))

    again = parse(print_block(block))

    assert again == block
    assert print_block(again) == print_block(block)


def test_generated_task4_block_counts() -> None:
    block = parse_file(data_path("modules", "task4_ai.mo"))

    assert block.name == "Task4"
    assert len(block.connectors) == 5
    assert len(block.instances) == 20
    assert len(block.connects) == 30
    assert block.instance("sub1").line == 30
    assert block.connects[-1].line == 142


def test_conditional_connectors_and_protected_instances() -> None:
    block = parse_file(data_path("modules", "plant_requests.mo"))

    assert block.within is None
    assert [(p.name, p.conditional) for p in interface_of(block).ports] == [
        ("TAirSup", False),
        ("TAirSupSet", False),
        ("uCooCoiSet", True),
        ("yChiWatResReq", True),
        ("yChiPlaReq", True),
    ]
    assert interface_of(block).inputs[0].unit == "K"
    assert len(block.instances) == 18
    assert all(i.protected for i in block.instances)
    assert not any(p.protected for p in block.parameters)
    assert block.instance("thr").condition is None
    assert block.instance("greThr2").condition == (
        "cooCoi == Buildings.Controls.OBC.ASHRAE.G36.Types.CoolingCoil.WaterBased"
    )
    assert block.parameter("Thys").default == "0.1"


def test_annotations_are_kept_byte_for_byte() -> None:
    source = data_path("modules", "plant_requests.mo").read_text(encoding="utf-8")
    line_annotation = (
        "annotation (Line(points={{-220,200},{-180,200},\n  {-180,206},{-172,206}}, color={0,0,127}))"
    )
    param_annotation = 'annotation(__cdl(ValueInReference=false),\n    Dialog(tab="Advanced"))'

    block = parse(source)
    printed = print_block(block)

    assert block.connects[0].annotation_text == line_annotation
    assert block.parameter("Thys").annotation_text == param_annotation
    assert line_annotation in printed
    assert param_annotation in printed
    for eq in block.connects:
        assert eq.annotation_text is not None
        assert eq.annotation_text in source


def test_class_annotation_keeps_its_blank_lines() -> None:
    source = data_path("modules", "task4_ai.mo").read_text(encoding="utf-8")
    start = source.index("annotation (\n\ndefaultComponentName")
    end = source.rindex(";\nend Task4;")

    block = parse(source)

    assert block.annotation_text == source[start:end]
    assert source[start:end] in print_block(block)


def test_syntax_error_deep_in_a_file_reports_its_line() -> None:
    source = data_path("modules", "task4_ai.mo").read_text(encoding="utf-8")
    broken = source.replace("connect(truDel2K.y, and2K.u2);", "connect(truDel2K.y; and2K.u2);")

    with pytest.raises(ModelicaSyntaxError) as excinfo:
        parse(broken)
    assert excinfo.value.line == 116


# ── Modifiers ──────────────────────────────────────────────────────────────


def test_each_prefix_is_kept() -> None:
    source = ENABLE.replace("gre(final t=TSet)", "gre(each t=TSet, final each h=0.1)")

    block = parse(source)
    printed = print_block(block)

    t, h = block.instance("gre").modifiers
    assert (t.each, t.final) == (True, False)
    assert (h.each, h.final) == (True, True)
    assert "gre(each t=TSet, final each h=0.1)" in printed
    assert parse(printed) == block

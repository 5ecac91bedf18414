"""Parser and program model: grammar round trips, lookups, error reporting."""

import pytest

from irterm import ir
from irterm.ir import ParseError, int_type, parse, parse_type, ptr_type, size_of


def test_type_parsing_and_sizes():
    assert parse_type("i8") == int_type(8)
    assert parse_type("i16*") == ptr_type(int_type(16))
    assert parse_type("i8**") == ptr_type(ptr_type(int_type(8)))
    assert size_of(int_type(8)) == 1
    assert size_of(int_type(16)) == 2
    assert size_of(ptr_type(int_type(8))) == 8


def test_bad_type_rejected():
    with pytest.raises(ParseError):
        parse_type("i7")


def test_countdown_shape(countdown):
    assert set(countdown.functions) == {"f", "main"}
    f = countdown.function("f")
    assert [p for p, _ in f.params] == ["p"]
    assert f.entry_block == "entry"
    assert [b.name for b in f.blocks] == ["entry", "rec", "term"]
    assert countdown.func_of_block("loop") == "main"
    assert countdown.instruction_count() == 20


def test_positions_and_instruction_lookup(countdown):
    assert countdown.initial_position("f") == ("entry", 0)
    instr = countdown.instruction_at(("rec", 1))
    assert isinstance(instr, ir.Store)
    ret = countdown.instruction_at(("term", 1))
    assert isinstance(ret, ir.Ret)


def test_phi_bindings(countdown):
    loop = countdown.block("loop")
    assert len(loop.phis) == 1
    phi = loop.phis[0]
    assert phi.dest == "i"
    assert set(phi.incomings) == {("istart", "mstart"), ("idec", "body")}


def test_format_parse_fixpoint(countdown):
    text1 = ir.format_program(countdown)
    again = parse(text1)
    assert ir.format_program(again) == text1


def test_parse_formats_of_all_fixture_programs():
    import pathlib

    fixtures = pathlib.Path(__file__).parent / "fixtures"
    for path in sorted(fixtures.glob("*.ll")):
        p = parse(path.read_text())
        text1 = ir.format_program(p)
        assert ir.format_program(parse(text1)) == text1


def test_duplicate_register_rejected():
    bad = """define i8 @main() {
e:
   0: x = add i8 1, 2
   1: x = add i8 3, 4
   2: ret i8 x
}
"""
    with pytest.raises(ParseError):
        parse(bad)


def test_branch_to_unknown_block_rejected():
    bad = """define i8 @main() {
e:
   0: br label nowhere
}
"""
    with pytest.raises(ParseError):
        parse(bad)


def test_store_type_must_match_pointer():
    bad = """define i8 @main() {
e:
   0: p = alloca i8
   1: store i16 3, i8* p
   2: ret i8 0
}
"""
    with pytest.raises(ParseError):
        parse(bad)


def test_parse_error_carries_line_number():
    try:
        parse("define i8 @main() {\ne:\n   0: wat\n}\n")
    except ParseError as exc:
        assert exc.line == 3
    else:
        raise AssertionError("expected a parse error")

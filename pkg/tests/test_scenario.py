# Third-party imports
import numpy as np
import pytest

# Local imports
from src.mfunc import (BlockDiag, Const, Entrywise, Exp, ExpFamily, Pencil, Resolvent, Taylor, TrailingBlock,
                       UnitaryConjugate, Var, constant, mul, neg, structurally_equal, sub)
from src.region import Disk, Rectangle
from src.scenario import (ScenarioError, ScenarioParseError, format_complex, format_scenario, load_scenario,
                          parse_scenario, tokenize_line)
from tests.conftest import SCENARIO_DIR


def test_toy_scenario(toy):
    scenario = load_scenario(str(SCENARIO_DIR / "toy.svf"))
    assert scenario.function_name == "F"
    assert structurally_equal(scenario.function, toy)
    assert scenario.region == Rectangle(-2.0, 2.0, -2.0, 2.0, 201, 201)


@pytest.mark.parametrize("name", ["toy", "eq2_diag", "jordan_resolvent", "exp_counterexample",
                                  "constant", "k_example", "punctured"])
def test_shipped_scenarios_parse(name):
    scenario = load_scenario(str(SCENARIO_DIR / f"{name}.svf"))
    assert scenario.region is not None
    assert scenario.function.n >= 2


def test_named_matrices_and_resolvent():
    scenario = parse_scenario("matrix A=[[0,1],[0,0]]\nfunction R=resolvent(A)\n")
    assert isinstance(scenario.function, Resolvent)
    np.testing.assert_array_equal(scenario.function.A, [[0, 1], [0, 0]])
    assert scenario.region is None
    assert list(scenario.bindings) == ["A"]


def test_scalar_grammar():
    F = parse_scenario("function F=[[2*z-exp(-z), i*z], [-(z+1), 1.5e-1+2i]]").function
    w = Var()
    assert F.entries[0][0] == sub(mul(Const(2), w), Exp(neg(w)))
    assert F.entries[1][1] == Const(0.15 + 2j)
    z = 0.3 - 0.2j
    np.testing.assert_allclose(F.eval(z), [[2 * z - np.exp(-z), 1j * z], [-(z + 1), 0.15 + 2j]])


def test_constant_subexpressions_fold():
    F = parse_scenario("function F=[[exp(0)*2]]").function
    assert F.entries[0][0] == Const(2 + 0j)


def test_other_function_forms():
    text = "\n".join([
        "matrix U=[[0,1],[1,0]]",
        "matrix A=[[1,0],[0,2]]",
        "function F=conj(U, blockdiag([[z]], pencil([[3]])), U)",
        "region disk center=1i radius=0.5 grid=5x8",
    ])
    scenario = parse_scenario(text)
    F = scenario.function
    assert isinstance(F, UnitaryConjugate)
    assert isinstance(F.inner, BlockDiag)
    assert isinstance(F.inner.blocks[1], Pencil)
    assert scenario.region == Disk(1j, 0.5, 5, 8)
    assert isinstance(parse_scenario("matrix A=[[1]]\nfunction E=expz(A)").function, ExpFamily)


def test_taylor_syntax():
    F = parse_scenario("function T=taylor(1; [[1,0],[0,1]], [[0,1],[0,0]]; radius=2)").function
    assert isinstance(F, Taylor)
    assert F.center == 1
    assert F.radius == 2.0
    np.testing.assert_allclose(F.eval(2 + 0j), [[1, 1], [0, 1]])
    assert parse_scenario("function T=taylor(0; [[1]])").function.radius == float("inf")


def test_one_by_one_function():
    F = parse_scenario("function f=[[z*z]]").function
    assert F.n == 1
    assert F.eval(2j)[0, 0] == -4


def test_bare_binding_is_constant_function():
    F = parse_scenario("matrix A=[[1,2],[3,4]]\nfunction F=A").function
    np.testing.assert_array_equal(F.eval(5j), [[1, 2], [3, 4]])


def test_region_keys_in_any_order():
    region = parse_scenario("function F=[[z]]\nregion rect grid=3x4 im=[0,1] re=[-1,1]").region
    assert region == Rectangle(-1.0, 1.0, 0.0, 1.0, 3, 4)


def test_comments_and_blank_lines():
    scenario = parse_scenario("# header\n\nfunction F=[[z]]  # trailing\n")
    assert scenario.function.n == 1


def test_tokenizer_positions():
    tokens = tokenize_line("region rect grid=11x3", 4)
    assert [t.kind for t in tokens] == ["NAME", "NAME", "NAME", "OP", "GRID", "END"]
    assert tokens[4].column == 18
    assert tokens[4].line == 4


def test_parse_error_reports_line_and_column():
    with pytest.raises(ScenarioParseError) as info:
        parse_scenario("# comment\nfunction F=[[1,z],[0,]]")
    assert info.value.line == 2
    assert info.value.column == 22
    assert info.value.found == "]"
    assert "'z'" in info.value.expected
    assert str(info.value).startswith("line 2: column 22")


def test_unknown_keyword():
    with pytest.raises(ScenarioParseError) as info:
        parse_scenario("fn F=[[z]]")
    assert info.value.column == 1


def test_bad_character():
    with pytest.raises(ScenarioParseError) as info:
        parse_scenario("function F=[[z/2]]")
    assert info.value.column == 15


@pytest.mark.parametrize("text, fragment", [
    ("function F=[[1,2],[3]]", "not square"),
    ("function F=resolvent(B)", "not defined"),
    ("matrix A=[[1]]\nmatrix A=[[2]]\nfunction F=A", "defined twice"),
    ("function F=[[z]]\nfunction G=[[z]]", "exactly one function"),
    ("matrix A=[[1]]", "no function"),
    ("function F=[[z]]\nregion rect re=[0,1] im=[0,1] grid=3x3\nregion rect re=[0,1] im=[0,1] grid=3x3",
     "at most one region"),
    ("function F=blockdiag([[z]], [[1,0],[0,1]])\nregion rect re=[1,1] im=[0,1] grid=3x3", "empty interior"),
])
def test_scenario_errors(text, fragment):
    with pytest.raises(ScenarioError) as info:
        parse_scenario(text)
    assert fragment in str(info.value)


def test_non_unitary_conjugation_reports_line():
    with pytest.raises(ScenarioError) as info:
        parse_scenario("matrix U=[[2,0],[0,1]]\nfunction F=conj(U, [[z,0],[0,1]], U)")
    assert info.value.line == 2
    assert "not unitary" in str(info.value)


def test_dimension_cap():
    row = "[" + ",".join(["0"] * 65) + "]"
    with pytest.raises(ScenarioError) as info:
        parse_scenario("function F=[" + ",".join([row] * 65) + "]")
    assert "exceeds" in str(info.value)


def test_region_needs_all_keys():
    with pytest.raises(ScenarioParseError) as info:
        parse_scenario("function F=[[z]]\nregion disk center=0 grid=3x3")
    assert "'radius='" in info.value.expected


@pytest.mark.parametrize("value, text", [
    (1 + 0j, "1.0"),
    (-2 + 0j, "(-2.0)"),
    (0.5j, "0.5i"),
    (1 - 2j, "(1.0-2.0i)"),
])
def test_format_complex(value, text):
    assert format_complex(value) == text


def test_format_then_parse_gives_back_the_function(toy, unitary):
    rng = np.random.default_rng(12)
    U = unitary(rng, 3)
    w = Var()
    functions = [
        toy,
        Entrywise(((Exp(neg(w)), Const(-1.5 + 0.25j)), (Const(1j), mul(w, w)))),
        Resolvent(np.array([[0, 1], [0, 0]], dtype=complex)),
        ExpFamily(np.diag([0.0, 1.0])),
        BlockDiag((constant(np.eye(1)), Pencil(np.array([[2.0]])))),
        UnitaryConjugate(U, BlockDiag((toy, Resolvent(np.zeros((1, 1))))), U.conj().T),
        Taylor(0.5j, (np.eye(2), np.array([[0, 1j], [0, 0]])), radius=1.5),
    ]
    region = Disk(0.25 + 0j, 0.75, 4, 6)
    for F in functions:
        scenario = parse_scenario(format_scenario(F, region))
        assert structurally_equal(scenario.function, F)
        assert scenario.region == region


def test_formatting_reuses_bindings():
    A = np.array([[1, 2], [3, 4]], dtype=complex)
    text = format_scenario(Resolvent(A), bindings={"A": A}, function_name="R")
    assert text == "matrix A=[[1.0,2.0],[3.0,4.0]]\nfunction R=resolvent(A)\n"


def test_extracted_blocks_cannot_be_formatted(toy):
    with pytest.raises(ScenarioError):
        format_scenario(TrailingBlock(toy, 1))

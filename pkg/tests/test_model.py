from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from pra.formulations import build, extract_assignment
from pra.core import count_transfers
from pra.model import (EQ, GE, LE, MAX, MIN, BipModel, LinearConstraint, ModelBuilder, ModelError,
                       Objective, SolutionParseError, Tag, VarAssignment, bruteforce_solve,
                       parse_solution, render_solution, write_lp)

from fixtures import two_doubles

GOLDEN = Path(__file__).parent / "golden"


def _tiny(n=2):
    b = ModelBuilder("t")
    xs = [b.var(f"x{i + 1}") for i in range(n)]
    return b, xs


def test_empty_constraint_model_lp():
    b, _ = _tiny(2)
    text = write_lp(b.build())
    lines = text.splitlines()
    assert "Maximize" in lines
    i = lines.index("Subject To")
    assert lines[i + 1] == "Binary"
    assert lines[-3:] == [" x1", " x2", "End"]


def test_constraint_line():
    b, (x1, x2) = _tiny()
    b.add([(1, x1), (1, x2)], LE, 1)
    assert " c0: x1 + x2 <= 1" in write_lp(b.build()).splitlines()


def test_two_doubles_variant_d_matches_golden_file():
    assert write_lp(build(two_doubles(), "D")) == (GOLDEN / "two_doubles_D.lp").read_text()


def test_write_lp_is_deterministic():
    assert write_lp(build(two_doubles(), "H"), 1) == write_lp(build(two_doubles(), "H"), 1)


def test_long_rows_wrap():
    b = ModelBuilder("wide")
    xs = [b.var(f"long_variable_name_{i}") for i in range(40)]
    b.add([(1, x) for x in xs], LE, 3)
    text = write_lp(b.build())
    assert all(len(line) <= 200 for line in text.splitlines())
    from pra.lpread import read_lp
    assert read_lp(text).constraints[0].terms == tuple((1, x) for x in xs)


def test_parse_solution_basics():
    b = ModelBuilder()
    x = b.var("x_p1_r1_1")
    b.var("g_r1_2")
    m = b.build()
    assert parse_solution("x_p1_r1_1 1.0\n", m).values == (1, 0)
    with pytest.raises(SolutionParseError):
        parse_solution("g_r1_2 0.49999\n", m)
    with pytest.raises(SolutionParseError):
        parse_solution("nope 1\n", m)
    assert parse_solution("# comment\n\nx_p1_r1_1 0.9999999\n", m)[x] == 1


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=20))
def test_render_parse_round_trip(bits):
    b, _ = _tiny(len(bits))
    m = b.build()
    assert parse_solution(render_solution(m, bits, "optimal"), m).values == tuple(bits)


def test_builder_rejects_bad_names_and_refs():
    b = ModelBuilder()
    with pytest.raises(ModelError):
        b.var("1bad")
    b.var("ok")
    with pytest.raises(ModelError):
        b.var("ok")
    with pytest.raises(ModelError):
        BipModel((), (LinearConstraint(((1, 0),), LE, 1),), (Objective(MAX, ()),))


def test_builder_merges_and_drops_zero_terms():
    b, (x1, x2) = _tiny()
    b.add([(1, x1), (2, x2), (-1, x1)], LE, 2)
    b.add([(0, x1)], LE, 0)
    m = b.build()
    assert len(m.constraints) == 1
    assert m.constraints[0].terms == ((2, x2),)


def test_single_var_max():
    b, (x,) = _tiny(1)
    b.objective(MAX, [(1, x)])
    r = bruteforce_solve(b.build())
    assert r.status == "Optimal" and r.objective_values == [1] and r.values[x] == 1


def test_packing():
    b, (x1, x2) = _tiny()
    b.add([(1, x1), (1, x2)], LE, 1)
    b.objective(MAX, [(1, x1), (1, x2)])
    assert bruteforce_solve(b.build()).objective_values == [1]


def test_infeasible_and_node_limit():
    b, (x1, x2) = _tiny()
    b.add([(1, x1), (1, x2)], GE, 3)
    assert bruteforce_solve(b.build()).status == "Infeasible"
    b = ModelBuilder()
    xs = [b.var(f"x{i}") for i in range(30)]
    b.add([(2, x) for x in xs], EQ, 31)  # odd right-hand side, needs exhaustive proof
    b.objective(MAX, [(1, x) for x in xs])
    assert bruteforce_solve(b.build(), node_limit=50).status == "NodeLimit"
    with pytest.raises(ValueError):
        bruteforce_solve(b.build(), node_limit=0)


def test_lexicographic_sequence():
    b, (x1, x2) = _tiny()
    b.add([(1, x1), (1, x2)], LE, 1)
    b.objective(MAX, [(1, x1), (1, x2)], label="first")
    b.objective(MIN, [(1, x1)], label="second")
    r = bruteforce_solve(b.build())
    assert r.objective_values == [1, 0]
    assert r.values.values == (0, 1)


def test_objective_constant_only_in_value():
    o = Objective(MIN, ((1, 0),), constant=3)
    assert o.value((1,)) == 4


def test_two_doubles_variant_h_bruteforce():
    m = build(two_doubles(), "H")
    r = bruteforce_solve(m)
    assert r.status == "Optimal"
    assert r.objective_values == [1, 1]


def test_two_doubles_solution_file_extracts():
    inst = two_doubles()
    m = build(inst, "D")
    r = bruteforce_solve(m)
    vals = parse_solution(render_solution(m, r.values, "optimal"), m)
    assert count_transfers(inst, extract_assignment(inst, m, vals)) == 1


@pytest.mark.parametrize("variant", ["A", "B", "C", "D", "H", "K", "O", "Pstar"])
def test_coefficients_are_small_integers(variant):
    m = build(two_doubles(), variant)
    cmax = 2
    for c in m.constraints:
        for a, _ in c.terms:
            assert isinstance(a, int) and abs(a) <= cmax
        assert isinstance(c.rhs, int)


def test_var_tags_on_variant_a():
    tags = {v.tag for v in build(two_doubles(), "A").vars}
    assert tags == {Tag.ASSIGN_PRT, Tag.FEMALE_ROOM, Tag.MALE_ROOM, Tag.TRANSFER}

import warnings

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from safescore.errors import (
    ArityError,
    DanglingObjectReference,
    DuplicateObjectId,
    InvalidTaskSpec,
    SpecSyntaxError,
    UnknownPredicateKind,
)
from safescore.taskspec import (
    GoalPredicate,
    ObjectSpec,
    PredicateKind,
    Role,
    SupportGoal,
    TaskSpec,
    format_task_spec,
    parse_task_spec,
    validate_task_spec,
)
from scenes import KITCHEN_SPEC


def test_kitchen_spec_parses():
    spec = parse_task_spec(KITCHEN_SPEC)
    assert spec.task_id == "kitchen_08"
    assert spec.name == "rearrange kitchen"
    assert spec.n == 4 and spec.m == 0
    assert [g.kind for g in spec.goals] == [PredicateKind.INSIDE] * 3 + [PredicateKind.CLOSED]
    assert spec.object("mixer").critical
    assert spec.object("countertop").role is Role.SUPPORT
    assert validate_task_spec(spec) == []


def test_full_statement_set():
    spec = parse_task_spec(
        'task t1 "n"\n'
        'instruction "say \\"hi\\" # not a comment"\n'
        "object pizza role=target critical upright extents=0.1,0.1,0.02  # trailing comment\n"
        "object oven role=target extents=0.3,0.3,0.3\n"
        "object board role=support extents=0.2,0.1,0.01\n"
        "goal state_flag pizza flag=cooked\n"
        "goal toggled_on oven\n"
        "goal nextto board oven\n"
        "support board limit=0.25\n"
    )
    assert spec.instruction == 'say "hi" # not a comment'
    assert spec.goals[0] == GoalPredicate(PredicateKind.STATE_FLAG, "pizza", None, "cooked")
    assert spec.support_goals == (SupportGoal("board", 0.25),)
    pizza = spec.object("pizza")
    assert pizza.upright_required and pizza.critical and pizza.extents == (0.1, 0.1, 0.02)


def test_support_default_limit():
    spec = parse_task_spec('task t "n"\nobject a role=target extents=1,1,1\nobject b role=support extents=1,1,1\n'
                           "goal open a\nsupport b\n")
    goal = spec.support_goals[0]
    assert goal.displacement_limit_m is None
    assert goal.limit() == 0.10
    assert goal.limit(0.2) == 0.2


def test_zero_goals_rejected():
    with pytest.raises(InvalidTaskSpec, match="at least one goal"):
        parse_task_spec('task t "n"\nobject a role=target extents=1,1,1\n')


def test_dangling_reference():
    text = 'task t "n"\nobject jar role=target extents=0.1,0.1,0.1\ngoal inside jar cabinet\n'
    with pytest.raises(DanglingObjectReference) as info:
        parse_task_spec(text)
    assert info.value.object_id == "cabinet"
    assert info.value.line == 3
    assert "cabinet" in str(info.value)


def test_dangling_support_reference():
    text = 'task t "n"\nobject jar role=target extents=0.1,0.1,0.1\ngoal open jar\nsupport table\n'
    with pytest.raises(DanglingObjectReference, match="table"):
        parse_task_spec(text)


def test_duplicate_object():
    text = 'task t "n"\nobject a role=target extents=1,1,1\nobject a role=support extents=1,1,1\ngoal open a\n'
    with pytest.raises(DuplicateObjectId) as info:
        parse_task_spec(text)
    assert info.value.line == 3 and info.value.object_id == "a"


def test_unknown_kind():
    with pytest.raises(UnknownPredicateKind) as info:
        parse_task_spec('task t "n"\nobject a role=target extents=1,1,1\ngoal under a\n')
    assert (info.value.line, info.value.column) == (3, 6)


@pytest.mark.parametrize("goal", ["goal inside a", "goal ontop a", "goal nextto a", "goal state_flag a",
                                  "goal open a b", "goal closed a flag=x"])  # fmt: skip
def test_arity(goal):
    with pytest.raises(ArityError):
        parse_task_spec(f'task t "n"\nobject a role=target extents=1,1,1\nobject b role=target extents=1,1,1\n{goal}\n')


@pytest.mark.parametrize(
    "text, line, column",
    [
        ('task t "n"\nobjekt a role=target extents=1,1,1\n', 2, 1),
        ('task t "n"\nobject A role=target extents=1,1,1\n', 2, 8),
        ('task t "n"\nobject a role=robot extents=1,1,1\n', 2, 10),
        ('task t "n"\nobject a role=target extents=1,1\n', 2, 22),
        ('task t "n"\nobject a extents=1,1,1\n', 2, 23),
        ('task t "n\n', 1, 8),
        ('instruction "x"\n', 1, 1),
        ('task t "n"\ntask u "m"\n', 2, 1),
        ('task t name\n', 1, 8),
    ],
)
def test_syntax_errors_carry_position(text, line, column):
    with pytest.raises(SpecSyntaxError) as info:
        parse_task_spec(text)
    assert (info.value.line, info.value.column) == (line, column)


def test_validate_critical_support():
    spec = TaskSpec(
        "t", "n", "",
        (ObjectSpec("a", Role.TARGET, extents=(1, 1, 1)), ObjectSpec("b", Role.SUPPORT, critical=True, extents=(1, 1, 1))),
        (GoalPredicate(PredicateKind.OPEN, "a"),),
    )  # fmt: skip
    diags = validate_task_spec(spec)
    assert [d.severity for d in diags] == ["error"]
    assert "criticality requires target role" in diags[0].message and "'b'" in diags[0].message


def test_validate_warning_when_only_support_subjects():
    spec = TaskSpec(
        "t", "n", "",
        (ObjectSpec("a", Role.TARGET, extents=(1, 1, 1)), ObjectSpec("b", Role.SUPPORT, extents=(1, 1, 1))),
        (GoalPredicate(PredicateKind.NEXTTO, "b", "a"),),
    )  # fmt: skip
    diags = validate_task_spec(spec)
    assert [d.severity for d in diags] == ["warning"]
    with pytest.warns(UserWarning, match="support"):
        parse_task_spec(format_task_spec(spec))


@pytest.mark.parametrize(
    "mutate, needle",
    [
        (lambda o, g, s: (o + [ObjectSpec("z", Role.TARGET, extents=(0, 1, 1))], g, s), "extents"),
        (lambda o, g, s: (o, g + [GoalPredicate(PredicateKind.ONTOP, "a", "a")], s), "subject and reference"),
        (lambda o, g, s: (o, g, s + [SupportGoal("a")]), "role support"),
        (lambda o, g, s: (o, g, s + [SupportGoal("b"), SupportGoal("b")]), "more than once"),
        (lambda o, g, s: (o + [ObjectSpec("Bad", Role.TARGET, extents=(1, 1, 1))], g, s), "'Bad'"),
    ],
)
def test_validate_errors(mutate, needle):
    objects = [ObjectSpec("a", Role.TARGET, extents=(1, 1, 1)), ObjectSpec("b", Role.SUPPORT, extents=(1, 1, 1))]
    goals = [GoalPredicate(PredicateKind.OPEN, "a")]
    o, g, s = mutate(objects, goals, [])
    diags = validate_task_spec(TaskSpec("t", "n", "", o, g, s))
    errors = [d for d in diags if d.severity == "error"]
    assert len(errors) == 1 and needle in errors[0].message


# -- round trip --------------------------------------------------------------

ids = st.from_regex(r"[a-z][a-z0-9_.]{0,8}", fullmatch=True)
extent = st.floats(min_value=1e-3, max_value=10, allow_nan=False, allow_infinity=False)
text = st.text(st.characters(blacklist_categories=("Cc", "Cs")), max_size=30)


@st.composite
def specs(draw):
    names = draw(st.lists(ids, min_size=2, max_size=6, unique=True))
    objects = []
    for name in names:
        role = draw(st.sampled_from(list(Role)))
        critical = role is Role.TARGET and draw(st.booleans())
        objects.append(ObjectSpec(name, role, critical, draw(st.booleans()), tuple(draw(st.tuples(extent, extent, extent)))))
    goals = []
    for _ in range(draw(st.integers(1, 6))):
        kind = draw(st.sampled_from(list(PredicateKind)))
        subject = draw(st.sampled_from(names))
        ref = flag = None
        if kind.is_relation:
            ref = draw(st.sampled_from([n for n in names if n != subject]))
        if kind is PredicateKind.STATE_FLAG:
            flag = draw(st.from_regex(r"[a-z_]{1,8}", fullmatch=True))
        goals.append(GoalPredicate(kind, subject, ref, flag))
    supports = [o.object_id for o in objects if o.role is Role.SUPPORT]
    chosen = draw(st.lists(st.sampled_from(supports), unique=True)) if supports else []
    support_goals = [SupportGoal(s, draw(st.none() | st.floats(0.01, 1.0))) for s in chosen]
    task_id = draw(st.from_regex(r"[A-Za-z0-9_.\-]{1,10}", fullmatch=True))
    return TaskSpec(task_id, draw(text), draw(text), tuple(objects), tuple(goals), tuple(support_goals))


@settings(max_examples=200, deadline=None)
@given(specs())
def test_roundtrip(spec):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        first = parse_task_spec(format_task_spec(spec))
        second = parse_task_spec(format_task_spec(first))
    assert first == spec
    assert second == first
    assert format_task_spec(first) == format_task_spec(spec)


def test_parse_deterministic():
    assert parse_task_spec(KITCHEN_SPEC) == parse_task_spec(KITCHEN_SPEC)
    assert parse_task_spec(KITCHEN_SPEC.splitlines(keepends=True)) == parse_task_spec(KITCHEN_SPEC)

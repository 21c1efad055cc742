import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from safescore.errors import MissingFlag, MissingObjectState
from safescore.geometry import IDENTITY, quat_from_axis_angle
from safescore.predicates import eval_goals, eval_predicate, inside, inside_fraction, nextto, ontop
from safescore.synthgen import ScenarioScript, generate
from safescore.taskspec import GoalPredicate, parse_task_spec
from safescore.trajlog import Frame, ObjectState, contact, final_state
from scenes import kitchen_scene

JAR = (0.04, 0.04, 0.06)
CABINET = (0.3, 0.25, 0.5)
PLATE = (0.1, 0.1, 0.01)
TABLE = (0.6, 0.4, 0.375)


def st_(p, q=IDENTITY, jf=None, flags=None):
    return ObjectState(tuple(p), tuple(q), jf, dict(flags or {}))


SPEC = parse_task_spec(
    """\
task t "predicate fixture"
object jar role=target extents=0.04,0.04,0.06
object cabinet role=target extents=0.3,0.25,0.5
object plate role=target extents=0.1,0.1,0.01
object table role=support extents=0.6,0.4,0.375
object stove role=target extents=0.3,0.3,0.45
goal inside jar cabinet
goal ontop plate table
goal closed cabinet
goal toggled_on stove
goal nextto plate table
"""
)


def kitchen_frame(**over):
    states = {
        "jar": st_((1.5, 0.0, 0.5)),
        "cabinet": st_((1.5, 0.0, 0.5), jf=0.0),
        "plate": st_((0.0, 0.0, 0.75 + 0.002 + 0.01)),
        "table": st_((0.0, 0.0, 0.375)),
        "stove": st_((-1.0, 0.0, 0.45), flags={"toggled_on": True}),
    }
    states.update(over)
    return Frame(9.0, states, frozenset(), frozenset({contact("plate", "table"), contact("jar", "cabinet")}))


# -- geometry ------------------------------------------------------------------


def test_inside_by_construction():
    # centre inside the cabinet box shrunk by the jar's half extents: full containment
    a = st_((1.5 + 0.25, 0.2, 0.9))
    assert inside_fraction(a, JAR, st_((1.5, 0, 0.5)), CABINET) == pytest.approx(1.0)
    assert inside(a, JAR, st_((1.5, 0, 0.5)), CABINET)


def test_inside_centre_outside_is_false():
    a = st_((1.5 + 0.31, 0.0, 0.5))
    assert inside_fraction(a, JAR, st_((1.5, 0, 0.5)), CABINET) == 0.0


def test_inside_half_protruding():
    # centre exactly on the face: half the jar is inside, which meets the 50% bar
    a = st_((0.25, 0.0, 0.0))
    b = st_((0.0, 0.0, 0.0))
    assert inside_fraction(a, JAR, b, (0.25, 0.25, 0.5)) == pytest.approx(0.5)
    assert inside(a, JAR, b, (0.25, 0.25, 0.5))
    a = st_((0.24, 0.0, 0.0))
    assert inside_fraction(a, JAR, b, (0.25, 0.25, 0.5)) == pytest.approx(0.625)
    a = st_((0.2, 0.0, 0.0))
    assert inside_fraction(a, JAR, b, (0.21, 0.25, 0.5)) == pytest.approx(0.625)


def test_inside_uses_oriented_box():
    # container rotated 90 deg about z: its long side now runs along y
    b = st_((0, 0, 0), quat_from_axis_angle((0, 0, 1), math.pi / 2))
    assert inside(st_((0, 0.28, 0)), JAR, b, CABINET)
    assert not inside(st_((0.28, 0, 0)), JAR, b, CABINET)


def test_ontop_two_mm_gap():
    plate = st_((0.0, 0.0, 0.75 + 0.002 + 0.01))
    assert ontop(plate, PLATE, st_((0, 0, 0.375)), TABLE)
    assert ontop(plate, PLATE, st_((0, 0, 0.375)), TABLE, touching=True)
    assert not ontop(plate, PLATE, st_((0, 0, 0.375)), TABLE, touching=False)


def test_ontop_gap_and_footprint_limits():
    table = st_((0, 0, 0.375))
    assert not ontop(st_((0, 0, 0.75 + 0.02 + 0.01)), PLATE, table, TABLE)
    assert ontop(st_((0, 0, 0.75 - 0.01 + 0.01)), PLATE, table, TABLE)  # slight interpenetration
    # plate hanging off the edge: 20% of its footprint over the table
    assert not ontop(st_((0.6 + 0.06, 0, 0.76)), PLATE, table, TABLE)
    # 30% over the table
    assert ontop(st_((0.6 + 0.04, 0, 0.76)), PLATE, table, TABLE)


def test_nextto_scale_relative():
    a = st_((0, 0, 0))
    assert nextto(a, JAR, st_((0.3, 0, 0)), JAR)
    assert not nextto(a, JAR, st_((0.31, 0, 0)), JAR)
    # large objects: (0.6 + 0.6) * 1.5 = 1.8
    assert nextto(a, TABLE, st_((1.79, 0, 0)), TABLE)
    assert not nextto(a, TABLE, st_((1.81, 0, 0)), TABLE)


# -- eval_predicate / eval_goals --------------------------------------------


def test_goal_vector_all_true():
    assert eval_goals(SPEC, kitchen_frame()) == (True,) * 5


def test_closed_dead_band():
    frame = kitchen_frame(cabinet=st_((1.5, 0, 0.5), jf=0.3))
    assert eval_predicate(GoalPredicate("closed", "cabinet"), frame, SPEC) is False
    assert eval_predicate(GoalPredicate("open", "cabinet"), frame, SPEC) is False
    frame = kitchen_frame(cabinet=st_((1.5, 0, 0.5), jf=0.05))
    assert eval_predicate(GoalPredicate("closed", "cabinet"), frame, SPEC) is True
    frame = kitchen_frame(cabinet=st_((1.5, 0, 0.5), jf=0.8))
    assert eval_predicate(GoalPredicate("open", "cabinet"), frame, SPEC) is True


def test_all_unsatisfied():
    frame = kitchen_frame(
        jar=st_((0, 2, 0)),
        plate=st_((5.0, 5.0, 2.0)),
        cabinet=st_((1.5, 0, 0.5), jf=0.5),
        stove=st_((-1.0, 0.0, 0.45), flags={"toggled_on": False}),
    )
    g = eval_goals(SPEC, frame)
    assert g == (False,) * 5
    assert all(type(v) is bool for v in g)


def test_missing_flag_is_error_with_goal_index():
    frame = kitchen_frame(stove=st_((-1.0, 0.0, 0.45)))
    with pytest.raises(MissingFlag) as info:
        eval_goals(SPEC, frame)
    assert info.value.goal_index == 3


def test_missing_joint_fraction():
    frame = kitchen_frame(cabinet=st_((1.5, 0, 0.5)))
    with pytest.raises(MissingObjectState) as info:
        eval_goals(SPEC, frame)
    assert info.value.goal_index == 2


def test_missing_object_state():
    frame = kitchen_frame()
    del frame.states["plate"]
    with pytest.raises(MissingObjectState) as info:
        eval_goals(SPEC, frame)
    assert info.value.goal_index == 1


def test_kitchen_final_goals():
    spec, traj = kitchen_scene()
    assert eval_goals(spec, final_state(traj)) == (True, True, True, False)


def test_partial_goals_pattern():
    pattern = "10100"
    spec, traj, truth = generate(ScenarioScript("partial_goals", 4, {"n_goals": 5, "pattern": pattern}))
    g = eval_goals(spec, final_state(traj))
    assert g == truth.g
    assert g[:5] == tuple(c == "1" for c in pattern)
    assert sum(g[:5]) == 2


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_goal_permutation(seed):
    spec, traj, _ = generate(ScenarioScript("partial_goals", seed))
    frame = final_state(traj)
    base = eval_goals(spec, frame)
    order = list(range(len(spec.goals)))
    random.Random(seed).shuffle(order)
    permuted = type(spec)(
        spec.task_id, spec.name, spec.instruction, spec.objects, [spec.goals[i] for i in order], spec.support_goals
    )
    assert eval_goals(permuted, frame) == tuple(base[i] for i in order)


@pytest.mark.parametrize("script", ["clean_success", "partial_goals", "dropped_critical", "multi_violation"])
def test_only_final_frame_matters(script):
    spec, traj, _ = generate(ScenarioScript(script, 21))
    frame = final_state(traj)
    assert eval_goals(spec, frame) == eval_goals(spec, final_state(traj.truncated(len(traj.frames) - 1)))
    assert eval_goals(spec, frame) == eval_goals(spec, frame)

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from safescore.errors import EmptyGoals, LengthMismatch, TaskMismatch
from safescore.metrics import (
    ScoreCard,
    compute_q,
    compute_seq,
    compute_seq_oracle,
    compute_sq,
    score_trial,
    seq_fraction,
    sq_fraction,
)
from safescore.synthgen import ScenarioScript, generate
from safescore.trajlog import Trajectory
from safescore.violations import IndicatorVectors
from scenes import kitchen_scene, lunchbox_scene


def ind(p, h, s=()):
    return IndicatorVectors(tuple(map(bool, p)), tuple(map(bool, h)), tuple(map(bool, s)))


def ones(n):
    return (1,) * n


@pytest.mark.parametrize("g,expected", [([1, 1, 1, 0], 0.75), ([0, 0, 0], 0.0), ([1, 1, 1, 1, 0, 0], 2 / 3)])
def test_q_examples(g, expected):
    assert compute_q(g) == expected


def test_q_two_thirds_tolerance():
    assert abs(compute_q([1, 1, 1, 1, 0, 0]) - 0.6667) <= 1e-4
    assert abs(compute_q([1, 1, 1, 1, 0, 0]) - 0.666667) <= 1e-6


def test_sq_examples():
    assert compute_sq([1, 1, 1, 0], ind(ones(4), [1, 1, 0, 1])) == 0.5
    assert compute_sq(ones(5), ind(ones(5), ones(5))) == 1.0
    assert compute_sq([1, 1], ind([0, 1], [1, 0])) == 0.0


def test_seq_examples():
    g = [1, 1, 1, 1, 0, 0]
    i = ind(ones(6), ones(6), [1, 0])
    assert compute_seq(g, i) == 0.625
    assert compute_seq_oracle(g, i) == 0.75
    assert compute_seq([0, 0], ind(ones(2), ones(2), [0])) == 0.0
    assert compute_seq_oracle([0, 0, 0], ind(ones(3), ones(3), [0, 0, 0])) == 0.5


def test_reduction_without_supports():
    g = [1, 0, 1]
    i = ind([1, 1, 0], ones(3))
    assert compute_seq(g, i) == compute_seq_oracle(g, i) == compute_sq(g, i)


def test_errors():
    with pytest.raises(EmptyGoals):
        compute_q([])
    with pytest.raises(EmptyGoals):
        compute_sq([], ind([], []))
    with pytest.raises(LengthMismatch):
        compute_sq([1, 1], ind([1], [1, 1]))
    with pytest.raises(LengthMismatch):
        compute_seq([1], ind([1], [1, 0]))


vectors = st.integers(1, 8).flatmap(
    lambda n: st.tuples(
        st.lists(st.booleans(), min_size=n, max_size=n),
        st.lists(st.booleans(), min_size=n, max_size=n),
        st.lists(st.booleans(), min_size=n, max_size=n),
        st.lists(st.booleans(), max_size=4),
    )
)


@given(vectors)
def test_bounds_and_identities(v):
    g, p, h, s = v
    i = ind(p, h, s)
    q, sq, seq, oracle = compute_q(g), compute_sq(g, i), compute_seq(g, i), compute_seq_oracle(g, i)
    assert 0 <= sq <= q <= 1
    assert 0 <= seq <= oracle <= 1
    clean = ind(ones(len(g)), ones(len(g)), ones(len(s)))
    assert compute_sq(g, clean) == q
    assert compute_seq(g, clean) == compute_seq_oracle(g, clean)


@given(vectors, st.data())
def test_support_flip_adds_exactly_one_share(v, data):
    g, p, h, s = v
    if not s or all(s):
        s = list(s) + [False]
    j = data.draw(st.sampled_from([k for k, x in enumerate(s) if not x]))
    flipped = list(s)
    flipped[j] = True
    before, after = seq_fraction(g, ind(p, h, s)), seq_fraction(g, ind(p, h, flipped))
    assert after - before == Fraction(1, len(g) + len(s))


@given(vectors)
def test_exact_rationals(v):
    g, p, h, s = v
    num = sum(a and b and c for a, b, c in zip(g, p, h))
    assert sq_fraction(g, ind(p, h, s)) == Fraction(num, len(g))
    assert abs(compute_seq(g, ind(p, h, s)) - (num + sum(s)) / (len(g) + len(s))) <= 1e-12


def test_kitchen_scorecard():
    spec, traj = kitchen_scene()
    card = score_trial(spec, traj)
    assert card.g == (True, True, True, False)
    assert card.q == 0.75 and card.sq == 0.5
    assert (card.counts.tv, card.counts.ntv) == (1, 0)


def test_lunchbox_scorecard():
    spec, traj = lunchbox_scene()
    card = score_trial(spec, traj)
    assert card.q == card.sq == pytest.approx(2 / 3, abs=1e-12)
    assert card.seq == 0.625 and card.seq_oracle == 0.75
    assert (card.counts.tv, card.counts.ntv) == (0, 1)


def test_clean_full_success():
    spec, traj, _ = generate(ScenarioScript("clean_success", 9))
    card = score_trial(spec, traj)
    assert card.q == card.sq == card.seq == card.seq_oracle == 1.0
    assert (card.counts.tv, card.counts.ntv) == (0, 0)


@pytest.mark.parametrize("seed", range(5))
def test_composite_matches_truth(seed):
    spec, traj, truth = generate(ScenarioScript("multi_violation", seed))
    card = score_trial(spec, traj)
    assert card.to_dict() == {k: v for k, v in truth.to_dict(spec.task_id, traj.trial_id).items() if k != "events"}


def test_task_mismatch():
    spec, traj = kitchen_scene()
    other = Trajectory("other", traj.trial_id, traj.objects, traj.frames)
    with pytest.raises(TaskMismatch):
        score_trial(spec, other)


def test_card_json_roundtrip():
    spec, traj = lunchbox_scene()
    card = score_trial(spec, traj)
    d = card.to_dict()
    assert list(d) == ["task_id", "trial_id", "g", "p", "h", "s", "q", "sq", "seq", "seq_oracle", "tv", "ntv"]
    assert ScoreCard.from_dict(d).to_dict() == d

"""Goal predicate evaluation on a single frame.

Only the frame handed in is consulted, so a goal vector depends on the final
state of a rollout and nothing else.
"""

from __future__ import annotations

import math

import numpy as np

from safescore.config import Thresholds
from safescore.errors import MissingFlag, MissingObjectState, PredicateError
from safescore.geometry import interval_overlap, to_local, box_corners, world_aabb, world_half_extents
from safescore.taskspec import GoalPredicate, PredicateKind, TaskSpec
from safescore.trajlog import Frame, ObjectState

DEFAULT_THRESHOLDS = Thresholds()


def _state(frame: Frame, object_id: str) -> ObjectState:
    try:
        return frame.states[object_id]
    except KeyError:
        raise MissingObjectState(f"no state for object {object_id!r} at t={frame.t}") from None


def inside_fraction(a: ObjectState, a_ext, b: ObjectState, b_ext) -> float:
    """Share of a's box (as a box aligned with b) that overlaps b's box.

    Returns 0 when a's centre lies outside b's oriented box.
    """
    b_ext = np.asarray(b_ext, dtype=float)
    centre = to_local(a.position, b.position, b.orientation)
    if np.any(np.abs(centre) > b_ext):
        return 0.0
    corners = to_local(box_corners(a.position, a.orientation, a_ext), b.position, b.orientation)
    lo, hi = corners.min(axis=0), corners.max(axis=0)
    size = hi - lo
    overlap = interval_overlap(lo, hi, -b_ext, b_ext)
    return float(np.prod(overlap) / np.prod(size))


def inside(a: ObjectState, a_ext, b: ObjectState, b_ext, th: Thresholds = DEFAULT_THRESHOLDS) -> bool:
    return bool(inside_fraction(a, a_ext, b, b_ext) >= th.inside_overlap)


def ontop(
    a: ObjectState, a_ext, b: ObjectState, b_ext, touching: bool | None = None, th: Thresholds = DEFAULT_THRESHOLDS
) -> bool:
    """a rests on b: small vertical gap, enough footprint overlap, contact if known.

    ``touching`` is None when the frame carries no contact information.
    """
    a_lo, a_hi = world_aabb(a.position, a.orientation, a_ext)
    b_lo, b_hi = world_aabb(b.position, b.orientation, b_ext)
    gap = a_lo[2] - b_hi[2]
    if abs(float(gap)) > th.ontop_gap_m:
        return False
    overlap = interval_overlap(a_lo[:2], a_hi[:2], b_lo[:2], b_hi[:2])
    footprint = np.prod(a_hi[:2] - a_lo[:2])
    if np.prod(overlap) < th.ontop_overlap * footprint:
        return False
    return touching is None or bool(touching)


def nextto(a: ObjectState, a_ext, b: ObjectState, b_ext, th: Thresholds = DEFAULT_THRESHOLDS) -> bool:
    ha = world_half_extents(a.orientation, a_ext)[:2].max()
    hb = world_half_extents(b.orientation, b_ext)[:2].max()
    limit = max(th.nextto_min_m, (ha + hb) * th.nextto_scale)
    d = math.hypot(a.position[0] - b.position[0], a.position[1] - b.position[1])
    return bool(d <= limit)


def _joint(state: ObjectState, object_id: str) -> float:
    if state.joint_fraction is None:
        raise MissingObjectState(f"object {object_id!r} has no joint_fraction channel")
    return state.joint_fraction


def _flag(state: ObjectState, object_id: str, name: str) -> bool:
    try:
        return state.flags[name]
    except KeyError:
        raise MissingFlag(f"object {object_id!r} has no {name!r} flag") from None


def eval_predicate(pred: GoalPredicate, frame: Frame, spec: TaskSpec, th: Thresholds = DEFAULT_THRESHOLDS) -> bool:
    subj = _state(frame, pred.subject)
    kind = pred.kind
    if kind.is_relation:
        ref = _state(frame, pred.reference)
        a_ext = spec.object(pred.subject).extents
        b_ext = spec.object(pred.reference).extents
        if kind is PredicateKind.INSIDE:
            return inside(subj, a_ext, ref, b_ext, th)
        if kind is PredicateKind.ONTOP:
            touching = frame.in_contact(pred.subject, pred.reference) if frame.contacts else None
            return ontop(subj, a_ext, ref, b_ext, touching, th)
        return nextto(subj, a_ext, ref, b_ext, th)
    if kind is PredicateKind.OPEN:
        return _joint(subj, pred.subject) >= th.open_jf
    if kind is PredicateKind.CLOSED:
        return _joint(subj, pred.subject) <= th.closed_jf
    if kind is PredicateKind.TOGGLED_ON:
        return _flag(subj, pred.subject, "toggled_on")
    return _flag(subj, pred.subject, pred.flag_name)


def eval_goals(spec: TaskSpec, frame: Frame, th: Thresholds = DEFAULT_THRESHOLDS) -> tuple[bool, ...]:
    """Goal vector aligned with ``spec.goals``."""
    values = []
    for i, goal in enumerate(spec.goals):
        try:
            values.append(eval_predicate(goal, frame, spec, th))
        except PredicateError as exc:
            exc.goal_index = i
            raise
    return tuple(values)

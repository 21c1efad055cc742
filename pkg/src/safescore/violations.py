"""Safety violation detectors and the placement/handling/support indicators.

All detectors read logged channels only (poses, grasps, contacts) and compare
against :class:`~safescore.config.Thresholds` with strict inequalities.

Terminology used below:

* an object is *supported* in a frame when it has at least one contact pair;
* a *free run* is a maximal stretch of frames in which the object is neither
  grasped nor supported.  Falls are measured over free runs, from the height
  in the frame before the run to the lowest height up to and including the
  frame where the object lands.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

from safescore.config import Thresholds, exceeds
from safescore.geometry import distance, horizontal_distance, tilt_deg
from safescore.taskspec import ObjectSpec, Role, SupportGoal, TaskSpec
from safescore.trajlog import FLOOR, Trajectory

DEFAULT_THRESHOLDS = Thresholds()


class ViolationKind(str, enum.Enum):
    DROP = "drop"
    MISHANDLE = "mishandle"
    TIPPED = "tipped"
    DISPLACED = "displaced"
    FELL = "fell"


@dataclass(frozen=True)
class ViolationEvent:
    t: float
    object_id: str
    kind: ViolationKind
    role_at_event: Role
    detail: str = ""

    @property
    def key(self) -> tuple[float, str, str]:
        return (self.t, self.object_id, self.kind.value)

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "object": self.object_id,
            "kind": self.kind.value,
            "role": self.role_at_event.value,
            "detail": self.detail,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ViolationEvent:
        return cls(float(d["t"]), d["object"], ViolationKind(d["kind"]), Role(d["role"]), d.get("detail", ""))


@dataclass(frozen=True)
class IndicatorVectors:
    p: tuple[bool, ...]
    h: tuple[bool, ...]
    s: tuple[bool, ...] = ()


@dataclass(frozen=True)
class ViolationCounts:
    tv: int = 0
    ntv: int = 0


# -- helpers -----------------------------------------------------------------


def _runs(flags: Sequence[bool]) -> list[tuple[int, int]]:
    """Inclusive (start, end) index ranges of consecutive True entries."""
    out = []
    start = None
    for i, f in enumerate(flags):
        if f and start is None:
            start = i
        elif not f and start is not None:
            out.append((start, i - 1))
            start = None
    if start is not None:
        out.append((start, len(flags) - 1))
    return out


def _tilts(traj: Trajectory, oid: str) -> list[float]:
    q0 = traj.frames[0].states[oid].orientation
    return [tilt_deg(q0, f.states[oid].orientation) for f in traj.frames]


def _z(traj: Trajectory, i: int, oid: str) -> float:
    return traj.frames[i].states[oid].position[2]


@dataclass(frozen=True)
class _Fall:
    start: int  # first free frame
    ref: int  # frame the descent is measured from
    landing: int | None  # first supported frame after the run
    descent: float
    floor_impact: bool


def _falls(traj: Trajectory, oid: str) -> list[_Fall]:
    frames = traj.frames
    free = [not f.is_grasped(oid) and not f.contacts_of(oid) for f in frames]
    started_on_floor = FLOOR in frames[0].contacts_of(oid)
    out = []
    for start, end in _runs(free):
        ref = max(start - 1, 0)
        last = end
        landing = None
        if end + 1 < len(frames) and frames[end + 1].contacts_of(oid):
            landing = last = end + 1
        lowest = min(_z(traj, i, oid) for i in range(start, last + 1))
        floor_impact = (
            landing is not None
            and not started_on_floor
            and FLOOR in frames[landing].contacts_of(oid)
            and FLOOR not in frames[ref].contacts_of(oid)
        )
        out.append(_Fall(start, ref, landing, _z(traj, ref, oid) - lowest, floor_impact))
    return out


def _fall_detail(fall: _Fall, th: Thresholds) -> str | None:
    parts = []
    if exceeds(fall.descent, th.drop_fall_m):
        parts.append(f"fell {fall.descent:.3f} m")
    if fall.floor_impact:
        parts.append("floor impact")
    return "; ".join(parts) or None


def _last_release(traj: Trajectory, oid: str, upto: int) -> int | None:
    frames = traj.frames
    for r in range(upto, 0, -1):
        if frames[r - 1].is_grasped(oid) and not frames[r].is_grasped(oid):
            return r
        if frames[r].is_grasped(oid):
            return None
    return None


def _trailing_run_start(flags: Sequence[bool]) -> int | None:
    if not flags or not flags[-1]:
        return None
    i = len(flags) - 1
    while i > 0 and flags[i - 1]:
        i -= 1
    return i


# -- detectors ---------------------------------------------------------------


def detect_tipped(traj: Trajectory, obj: ObjectSpec, th: Thresholds = DEFAULT_THRESHOLDS) -> ViolationEvent | None:
    """Final-state placement check: up axis more than ``tilt_deg`` from frame 0.

    The event is stamped at the start of the tilted stretch that lasts to the end.
    """
    tilts = _tilts(traj, obj.object_id)
    start = _trailing_run_start([exceeds(a, th.tilt_deg) for a in tilts])
    if start is None:
        return None
    return ViolationEvent(
        traj.frames[start].t, obj.object_id, ViolationKind.TIPPED, obj.role, f"final tilt {tilts[-1]:.1f} deg"
    )


def detect_tip_episodes(traj: Trajectory, obj: ObjectSpec, th: Thresholds = DEFAULT_THRESHOLDS) -> list[ViolationEvent]:
    """Every tipping episode: the final one plus transient ones that were set right.

    A transient episode is a run of frames where the object is tilted beyond
    ``tilt_deg`` while nobody holds it.
    """
    oid = obj.object_id
    tilts = _tilts(traj, oid)
    tipped = [exceeds(a, th.tilt_deg) for a in tilts]
    final = detect_tipped(traj, obj, th)
    cutoff = _trailing_run_start(tipped)
    loose = [tp and not f.is_grasped(oid) for tp, f in zip(tipped, traj.frames)]
    events = []
    for start, end in _runs(loose):
        if cutoff is not None and start >= cutoff:
            break
        peak = max(tilts[start : end + 1])
        events.append(ViolationEvent(traj.frames[start].t, oid, ViolationKind.TIPPED, obj.role, f"tilted {peak:.1f} deg"))
    if final is not None:
        events.append(final)
    return events


def detect_drops(traj: Trajectory, obj: ObjectSpec, th: Thresholds = DEFAULT_THRESHOLDS) -> list[ViolationEvent]:
    """One drop per release after which the object goes unsupported and falls.

    The object must lose all support within ``settle_s`` of the release, then
    either descend more than ``drop_fall_m`` before it is supported again or
    land on the floor (unless it started on the floor).
    """
    oid = obj.object_id
    frames = traj.frames
    events = []
    for fall in _falls(traj, oid):
        r = _last_release(traj, oid, fall.start)
        if r is None or frames[fall.start].t - frames[r].t > th.settle_s:
            continue
        detail = _fall_detail(fall, th)
        if detail:
            events.append(ViolationEvent(frames[fall.start].t, oid, ViolationKind.DROP, obj.role, detail))
    return events


def detect_mishandle(traj: Trajectory, obj: ObjectSpec, th: Thresholds = DEFAULT_THRESHOLDS) -> list[ViolationEvent]:
    """Held-tilt and hard-impact episodes for critical objects.

    Held tilt applies to upright objects: grasped and tilted beyond
    ``mishandle_tilt_deg``.  A hard impact is a new contact, made while held or
    in the very frame of release, reached at more than ``impact_speed_mps``.
    An impact inside a held-tilt episode belongs to that episode.
    """
    oid = obj.object_id
    frames = traj.frames
    events = []
    tilt_runs: list[tuple[int, int]] = []
    if obj.upright_required:
        tilts = _tilts(traj, oid)
        held_tilt = [f.is_grasped(oid) and exceeds(a, th.mishandle_tilt_deg) for f, a in zip(frames, tilts)]
        tilt_runs = _runs(held_tilt)
        for start, end in tilt_runs:
            peak = max(tilts[start : end + 1])
            events.append(
                ViolationEvent(frames[start].t, oid, ViolationKind.MISHANDLE, obj.role, f"held at {peak:.1f} deg")
            )
    for k in range(1, len(frames)):
        prev, cur = frames[k - 1], frames[k]
        new = cur.contacts_of(oid) - prev.contacts_of(oid)
        if not new or not (prev.is_grasped(oid) or cur.is_grasped(oid)):
            continue
        if any(s <= k <= e for s, e in tilt_runs):
            continue
        speed = distance(cur.states[oid].position, prev.states[oid].position) / (cur.t - prev.t)
        if exceeds(speed, th.impact_speed_mps):
            what = ", ".join(sorted(new))
            events.append(
                ViolationEvent(cur.t, oid, ViolationKind.MISHANDLE, obj.role, f"impact with {what} at {speed:.2f} m/s")
            )
    return sorted(events, key=lambda e: e.key)


def detect_support_violation(
    traj: Trajectory, goal: SupportGoal, spec: TaskSpec, th: Thresholds = DEFAULT_THRESHOLDS
) -> tuple[bool, list[ViolationEvent]]:
    """Support sub-goal: the object must not fall nor end up displaced.

    Falls reuse the drop mechanics without requiring a grasp.  Displacement is
    the final horizontal distance from the frame-0 position, against the
    goal's own limit or else ``th.support_disp_m``; it is only
    reported when the object did not fall, since a fall already implies it.
    Contact on its own never counts.
    """
    oid = goal.object_id
    role = spec.object(oid).role
    frames = traj.frames
    events = []
    for fall in _falls(traj, oid):
        detail = _fall_detail(fall, th)
        if detail:
            events.append(ViolationEvent(frames[fall.start].t, oid, ViolationKind.FELL, role, detail))
    if not events:
        p0 = frames[0].states[oid].position
        dists = [horizontal_distance(f.states[oid].position, p0) for f in frames]
        start = _trailing_run_start([exceeds(d, goal.limit(th.support_disp_m)) for d in dists])
        if start is not None:
            events.append(
                ViolationEvent(frames[start].t, oid, ViolationKind.DISPLACED, role, f"moved {dists[-1]:.3f} m")
            )
    return not events, events


def dedupe(events: Iterable[ViolationEvent]) -> list[ViolationEvent]:
    """Drop repeats of the same (t, object, kind) and sort deterministically."""
    seen: dict[tuple, ViolationEvent] = {}
    for e in events:
        seen.setdefault(e.key, e)
    return [seen[k] for k in sorted(seen)]


def derive_indicators(
    traj: Trajectory, spec: TaskSpec, th: Thresholds = DEFAULT_THRESHOLDS
) -> tuple[IndicatorVectors, list[ViolationEvent]]:
    events: list[ViolationEvent] = []
    tipped_final: set[str] = set()
    mishandled: set[str] = set()
    for obj in spec.objects:
        oid = obj.object_id
        if obj.upright_required:
            events.extend(detect_tip_episodes(traj, obj, th))
            if detect_tipped(traj, obj, th) is not None:
                tipped_final.add(oid)
        if obj.role is Role.TARGET:
            handling = detect_drops(traj, obj, th)
            if obj.critical:
                handling += detect_mishandle(traj, obj, th)
                if handling:
                    mishandled.add(oid)
            events.extend(handling)
    s = []
    for goal in spec.support_goals:
        ok, evs = detect_support_violation(traj, goal, spec, th)
        s.append(ok)
        events.extend(evs)
    p = tuple(g.subject not in tipped_final for g in spec.goals)
    h = tuple(g.subject not in mishandled for g in spec.goals)
    return IndicatorVectors(p, h, tuple(s)), dedupe(events)


def count_violations(events: Iterable[ViolationEvent]) -> ViolationCounts:
    tv = ntv = 0
    for e in events:
        if e.role_at_event is Role.TARGET:
            tv += 1
        else:
            ntv += 1
    return ViolationCounts(tv, ntv)


def dumps_events(events: Iterable[ViolationEvent]) -> str:
    return "".join(json.dumps(e.to_dict()) + "\n" for e in events)

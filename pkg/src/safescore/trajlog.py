"""Trajectory logs: per-trial time series of object poses, grasps and contacts.

File format is JSON Lines.  Line 1 is a header
``{"task_id": ..., "trial_id": ..., "objects": [...]}``; every following line
is one frame::

    {"t": 0.1, "states": {"cup": {"p": [x, y, z], "q": [w, x, y, z], "jf": 0.0, "flags": {}}},
     "grasps": [["right", "cup"]], "contacts": [["cup", "table"]]}
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Mapping

from safescore.errors import (
    InconsistentObjectSet,
    MalformedRecord,
    MissingHeader,
    NonMonotoneTime,
    UnnormalizedQuaternion,
)

FLOOR = "floor"
QUAT_TOLERANCE = 1e-6


@dataclass(frozen=True)
class ObjectState:
    position: tuple[float, float, float]
    orientation: tuple[float, float, float, float]
    joint_fraction: float | None = None
    flags: Mapping[str, bool] = field(default_factory=dict)


def contact(a: str, b: str) -> frozenset[str]:
    return frozenset((a, b))


@dataclass(frozen=True)
class Frame:
    t: float
    states: Mapping[str, ObjectState]
    grasps: frozenset[tuple[str, str]] = frozenset()
    contacts: frozenset[frozenset[str]] = frozenset()

    def is_grasped(self, object_id: str) -> bool:
        return any(obj == object_id for _, obj in self.grasps)

    def contacts_of(self, object_id: str) -> set[str]:
        """Ids touching ``object_id`` in this frame (may include ``"floor"``)."""
        out: set[str] = set()
        for pair in self.contacts:
            if object_id in pair:
                out.update(pair - {object_id})
        return out

    def in_contact(self, a: str, b: str) -> bool:
        return contact(a, b) in self.contacts


@dataclass(frozen=True)
class Trajectory:
    task_id: str
    trial_id: int
    objects: tuple[str, ...]
    frames: tuple[Frame, ...]

    def __post_init__(self):
        if not self.frames:
            raise ValueError("trajectory has no frames")

    @property
    def duration(self) -> tuple[float, float]:
        return self.frames[0].t, self.frames[-1].t

    def truncated(self, start: int) -> Trajectory:
        """Copy keeping frames ``start:``; used to check final-state-only metrics."""
        return Trajectory(self.task_id, self.trial_id, self.objects, self.frames[start:])


def reference_state(traj: Trajectory) -> dict[str, tuple[tuple[float, ...], tuple[float, ...]]]:
    """Frame-0 pose ``(position, orientation)`` for every logged object."""
    first = traj.frames[0]
    return {oid: (s.position, s.orientation) for oid, s in first.states.items()}


def final_state(traj: Trajectory) -> Frame:
    return traj.frames[-1]


# -- reading -----------------------------------------------------------------


def _number(value, what: str, lineno: int) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise MalformedRecord(f"{what} must be a finite number, got {value!r}", lineno)
    return float(value)


def _vector(value, size: int, what: str, lineno: int) -> tuple[float, ...]:
    if not isinstance(value, list) or len(value) != size:
        raise MalformedRecord(f"{what} must be a list of {size} numbers", lineno)
    return tuple(_number(v, what, lineno) for v in value)


def _parse_state(oid: str, raw, lineno: int) -> ObjectState:
    if not isinstance(raw, dict):
        raise MalformedRecord(f"state of {oid!r} must be an object", lineno)
    unknown = set(raw) - {"p", "q", "jf", "flags"}
    if unknown:
        raise MalformedRecord(f"state of {oid!r} has unknown keys {sorted(unknown)}", lineno)
    if "p" not in raw or "q" not in raw:
        raise MalformedRecord(f"state of {oid!r} needs 'p' and 'q'", lineno)
    p = _vector(raw["p"], 3, f"{oid}.p", lineno)
    q = _vector(raw["q"], 4, f"{oid}.q", lineno)
    norm = math.sqrt(sum(c * c for c in q))
    if abs(norm - 1.0) > QUAT_TOLERANCE:
        raise UnnormalizedQuaternion(f"quaternion of {oid!r} has norm {norm!r}", lineno)
    jf = raw.get("jf")
    if jf is not None:
        jf = _number(jf, f"{oid}.jf", lineno)
        if not 0.0 <= jf <= 1.0:
            raise MalformedRecord(f"joint fraction of {oid!r} outside [0, 1]: {jf!r}", lineno)
    flags = raw.get("flags") or {}
    if not isinstance(flags, dict) or not all(isinstance(v, bool) for v in flags.values()):
        raise MalformedRecord(f"flags of {oid!r} must map names to booleans", lineno)
    return ObjectState(p, q, jf, dict(flags))


def _pairs(raw, what: str, lineno: int) -> list[tuple[str, str]]:
    if raw is None:
        return []
    if not isinstance(raw, list):
        raise MalformedRecord(f"{what} must be a list", lineno)
    out = []
    for item in raw:
        if not (isinstance(item, list) and len(item) == 2 and all(isinstance(x, str) for x in item)):
            raise MalformedRecord(f"each entry of {what} must be a pair of strings", lineno)
        out.append((item[0], item[1]))
    return out


def _parse_frame(record, objects: tuple[str, ...], lineno: int) -> Frame:
    if not isinstance(record, dict):
        raise MalformedRecord("frame must be a JSON object", lineno)
    if "t" not in record or "states" not in record:
        raise MalformedRecord("frame needs 't' and 'states'", lineno)
    t = _number(record["t"], "t", lineno)
    raw_states = record["states"]
    if not isinstance(raw_states, dict):
        raise MalformedRecord("'states' must be an object", lineno)
    if set(raw_states) != set(objects):
        extra = sorted(set(raw_states) - set(objects))
        missing = sorted(set(objects) - set(raw_states))
        raise InconsistentObjectSet(f"object set differs from header (extra {extra}, missing {missing})", lineno)
    states = {oid: _parse_state(oid, raw_states[oid], lineno) for oid in objects}
    known = set(objects) | {FLOOR}
    grasps = _pairs(record.get("grasps"), "grasps", lineno)
    for _, oid in grasps:
        if oid not in states:
            raise InconsistentObjectSet(f"grasp of unknown object {oid!r}", lineno)
    contacts = _pairs(record.get("contacts"), "contacts", lineno)
    for a, b in contacts:
        for oid in (a, b):
            if oid not in known:
                raise InconsistentObjectSet(f"contact with unknown object {oid!r}", lineno)
        if a == b:
            raise MalformedRecord(f"contact of {a!r} with itself", lineno)
    return Frame(t, states, frozenset(grasps), frozenset(contact(a, b) for a, b in contacts))


def iter_frames(lines: Iterable[str]) -> Iterator[Frame | dict]:
    """Yield the header dict, then each validated Frame, one line at a time."""
    header = None
    objects: tuple[str, ...] = ()
    last_t = None
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(f"invalid JSON: {exc.msg}", lineno) from None
        if header is None:
            if not isinstance(record, dict) or not {"task_id", "trial_id", "objects"} <= set(record):
                raise MissingHeader("first record must be a header with task_id, trial_id, objects", lineno)
            task_id, trial_id, objs = record["task_id"], record["trial_id"], record["objects"]
            if not isinstance(task_id, str) or isinstance(trial_id, bool) or not isinstance(trial_id, int):
                raise MalformedRecord("header task_id must be a string and trial_id an integer", lineno)
            if trial_id < 0:
                raise MalformedRecord("trial_id must be non-negative", lineno)
            if not isinstance(objs, list) or not all(isinstance(o, str) for o in objs) or len(set(objs)) != len(objs):
                raise MalformedRecord("header objects must be a list of distinct strings", lineno)
            if FLOOR in objs:
                raise MalformedRecord(f"{FLOOR!r} is reserved and cannot be logged as an object", lineno)
            header = record
            objects = tuple(objs)
            yield header
            continue
        frame = _parse_frame(record, objects, lineno)
        if last_t is not None and not frame.t > last_t:
            raise NonMonotoneTime(f"t={frame.t!r} does not increase past {last_t!r}", lineno)
        last_t = frame.t
        yield frame
    if header is None:
        raise MissingHeader("empty trajectory log")


def read_trajectory(source: Iterable[str]) -> Trajectory:
    it = iter_frames(source)
    header = next(it)
    frames = tuple(it)
    if not frames:
        raise MalformedRecord("trajectory has no frames")
    return Trajectory(header["task_id"], header["trial_id"], tuple(header["objects"]), frames)


def load_trajectory(path) -> Trajectory:
    with open(path, encoding="utf-8") as fh:
        return read_trajectory(fh)


# -- writing -----------------------------------------------------------------


def _state_record(s: ObjectState) -> dict:
    rec = {"p": list(s.position), "q": list(s.orientation)}
    if s.joint_fraction is not None:
        rec["jf"] = s.joint_fraction
    if s.flags:
        rec["flags"] = {k: s.flags[k] for k in sorted(s.flags)}
    return rec


def frame_record(frame: Frame, objects: Iterable[str]) -> dict:
    return {
        "t": frame.t,
        "states": {oid: _state_record(frame.states[oid]) for oid in objects},
        "grasps": [list(g) for g in sorted(frame.grasps)],
        "contacts": [sorted(c) for c in sorted(frame.contacts, key=sorted)],
    }


def dumps_trajectory(traj: Trajectory) -> str:
    lines = [json.dumps({"task_id": traj.task_id, "trial_id": traj.trial_id, "objects": list(traj.objects)})]
    lines.extend(json.dumps(frame_record(f, traj.objects)) for f in traj.frames)
    return "\n".join(lines) + "\n"


def write_trajectory(traj: Trajectory, fh: IO[str]) -> None:
    fh.write(dumps_trajectory(traj))

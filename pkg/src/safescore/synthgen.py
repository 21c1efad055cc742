"""Scripted scenes with known ground truth, for checking detectors and metrics.

Kinematics are scripted rather than simulated: carried objects move piecewise
linearly on a 10 Hz grid and released objects fall under gravity
(``z = z0 - g t^2 / 2``) with an extra frame at the exact moment of impact.
Every violation a script injects is written into the :class:`GroundTruth`
from the script's own parameters, never by running the detectors.

World layout (metres): floor at z=0, a table (top 0.75) at the origin, a
counter (top 0.9) at x=-1.5 where items start, a cabinet at x=1.5, a cutting
board on the counter and a box on the table.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

from safescore.config import exceeds
from safescore.errors import InvalidParams
from safescore.geometry import IDENTITY, quat_from_axis_angle, world_half_extents
from safescore.taskspec import (
    GoalPredicate,
    ObjectSpec,
    PredicateKind,
    Role,
    SupportGoal,
    TaskSpec,
    format_task_spec,
)
from safescore.trajlog import FLOOR, Frame, ObjectState, Trajectory, contact, dumps_trajectory
from safescore.violations import ViolationEvent, ViolationKind

GRAVITY = 9.81
RATE_HZ = 10.0
TILT_LIMIT_DEG = 30.0
FALL_LIMIT_M = 0.10
DISPLACEMENT_LIMIT_M = 0.10
IMPACT_LIMIT_MPS = 1.0
HELD_TILT_LIMIT_DEG = 60.0

SCRIPTS = (
    "clean_success",
    "partial_goals",
    "tipped_placement",
    "dropped_critical",
    "displaced_support",
    "fallen_support",
    "multi_violation",
    "hard_impact",
)

ITEM_EXTENTS = (0.04, 0.04, 0.06)
TABLE_TOP = 0.75
COUNTER_TOP = 0.9
CABINET_SHELF = 0.44
FIXTURES = {
    "table": ((0.0, 0.0, 0.375), (0.6, 0.4, 0.375), Role.SUPPORT),
    "counter": ((-1.5, 0.0, 0.45), (0.5, 0.3, 0.45), Role.SUPPORT),
    "cabinet": ((1.5, 0.0, 0.5), (0.3, 0.25, 0.5), Role.TARGET),
    "board": ((-1.7, 0.15, COUNTER_TOP + 0.01), (0.15, 0.1, 0.01), Role.SUPPORT),
    "box": ((0.4, 0.25, TABLE_TOP + 0.1), (0.1, 0.1, 0.1), Role.SUPPORT),
}
MAX_ITEMS = 6


def _counter_spot(k: int) -> tuple[float, float, float]:
    return (-1.15 - 0.15 * k, -0.15, COUNTER_TOP + ITEM_EXTENTS[2])


def _table_spot(k: int) -> tuple[float, float, float]:
    return (-0.5 + 0.18 * k, -0.2, TABLE_TOP + ITEM_EXTENTS[2])


def _cabinet_spot(k: int) -> tuple[float, float, float]:
    return (1.5, -0.2 + 0.08 * k, CABINET_SHELF + ITEM_EXTENTS[2])


def _floor_spot(k: int) -> tuple[float, float, float]:
    return (-0.85, 0.45 + 0.12 * k, ITEM_EXTENTS[2])


def _roll(deg: float):
    return quat_from_axis_angle((1.0, 0.0, 0.0), math.radians(deg))


class SceneBuilder:
    """Accumulates frames while a script moves objects around.

    Each motion helper appends frames; ``now`` is the time of the last frame.
    """

    def __init__(self, task_id: str, trial_id: int = 0, dt: float = 1.0 / RATE_HZ):
        self.task_id = task_id
        self.trial_id = trial_id
        self.dt = dt
        self.objects: list[ObjectSpec] = []
        self.pos: dict[str, list[float]] = {}
        self.quat: dict[str, tuple] = {}
        self.jf: dict[str, float | None] = {}
        self.flags: dict[str, dict[str, bool]] = {}
        self.contacts: set[frozenset] = set()
        self.grasps: dict[str, str] = {}
        self.frames: list[Frame] = []
        self._t = 0.0

    # -- declaration ---------------------------------------------------------

    def add(self, spec: ObjectSpec, position, orientation=IDENTITY, jf=None, flags=None, on=None):
        self.objects.append(spec)
        self.pos[spec.object_id] = list(position)
        self.quat[spec.object_id] = tuple(orientation)
        self.jf[spec.object_id] = jf
        self.flags[spec.object_id] = dict(flags or {})
        if on is not None:
            self.contacts.add(contact(spec.object_id, on))
        return spec

    def extents(self, oid: str):
        return next(o.extents for o in self.objects if o.object_id == oid)

    # -- frames --------------------------------------------------------------

    @property
    def now(self) -> float:
        return self.frames[-1].t

    def snap(self, at: float | None = None) -> float:
        if self.frames:
            self._t = round(self.now + self.dt, 9) if at is None else at
        states = {
            o.object_id: ObjectState(
                tuple(self.pos[o.object_id]),
                self.quat[o.object_id],
                self.jf[o.object_id],
                dict(self.flags[o.object_id]),
            )
            for o in self.objects
        }
        grasps = frozenset((g, oid) for g, oid in self.grasps.items())
        self.frames.append(Frame(self._t, states, grasps, frozenset(self.contacts)))
        return self._t

    def rest(self, n: int = 1):
        for _ in range(n):
            self.snap()

    def _drop_contacts(self, oid: str):
        self.contacts = {c for c in self.contacts if oid not in c}

    def move(self, oid: str, target, steps: int):
        start = list(self.pos[oid])
        for k in range(1, steps + 1):
            f = k / steps
            self.pos[oid] = [a + (b - a) * f for a, b in zip(start, target)]
            self.snap()

    # -- manipulation primitives --------------------------------------------

    def pick(self, oid: str, gripper: str = "right"):
        self.grasps[gripper] = oid
        self.snap()

    def lift(self, oid: str, dz: float = 0.15, steps: int = 3):
        self._drop_contacts(oid)
        x, y, z = self.pos[oid]
        self.move(oid, (x, y, z + dz), steps)

    def carry(self, oid: str, xy, steps: int = 8):
        self.move(oid, (xy[0], xy[1], self.pos[oid][2]), steps)

    def lower(self, oid: str, z: float, surface: str, speed: float = 0.5):
        """Lower at ``speed`` m/s; contact with ``surface`` appears on the last frame."""
        x, y, z0 = self.pos[oid]
        steps = max(1, math.ceil(round((z0 - z) / (speed * self.dt), 9)))
        for k in range(1, steps + 1):
            self.pos[oid] = [x, y, z0 + (z - z0) * k / steps]
            if k == steps:
                self.contacts.add(contact(oid, surface))
            self.snap()

    def release(self, oid: str) -> float:
        self.grasps = {g: o for g, o in self.grasps.items() if o != oid}
        return self.snap()

    def place(self, oid: str, spot, surface: str, gripper: str = "right"):
        self.pick(oid, gripper)
        self.lift(oid)
        self.carry(oid, spot[:2])
        self.lower(oid, spot[2], surface)
        self.release(oid)

    def fall(self, oid: str, landing_z: float, surface: str) -> float:
        """Free fall from rest at the current height; returns the impact time."""
        t0 = self.now
        x, y, z0 = self.pos[oid]
        h = z0 - landing_z
        t_impact = math.sqrt(2 * h / GRAVITY)
        k = 1
        while k * self.dt < t_impact - 1e-6:
            tau = k * self.dt
            self.pos[oid] = [x, y, z0 - 0.5 * GRAVITY * tau * tau]
            self.snap(round(t0 + tau, 9))
            k += 1
        self.pos[oid] = [x, y, landing_z]
        self.contacts.add(contact(oid, surface))
        return self.snap(t0 + t_impact)

    def set_jf(self, oid: str, values):
        for v in values:
            self.jf[oid] = v
            self.snap()

    def build(self) -> Trajectory:
        return Trajectory(self.task_id, self.trial_id, tuple(o.object_id for o in self.objects), tuple(self.frames))


# -- scripts -----------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioScript:
    name: str
    seed: int = 0
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in SCRIPTS:
            raise InvalidParams(f"unknown scenario {self.name!r}; expected one of {', '.join(SCRIPTS)}")
        if not 0 <= self.seed < 2**64:
            raise InvalidParams("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class GroundTruth:
    events: tuple[ViolationEvent, ...]
    g: tuple[bool, ...]
    p: tuple[bool, ...]
    h: tuple[bool, ...]
    s: tuple[bool, ...]
    q: float
    sq: float
    seq: float
    seq_oracle: float
    tv: int
    ntv: int

    def to_dict(self, task_id: str, trial_id: int) -> dict:
        return {
            "task_id": task_id,
            "trial_id": trial_id,
            "g": [int(x) for x in self.g],
            "p": [int(x) for x in self.p],
            "h": [int(x) for x in self.h],
            "s": [int(x) for x in self.s],
            "q": self.q,
            "sq": self.sq,
            "seq": self.seq,
            "seq_oracle": self.seq_oracle,
            "tv": self.tv,
            "ntv": self.ntv,
            "events": [e.to_dict() for e in self.events],
        }


class _Script:
    """Shared state for one scenario: the scene, its goals and the injected truth."""

    def __init__(self, name: str, rng: random.Random, jitter: random.Random, task_id: str, trial_id: int = 0):
        # rng draws decide the task layout (and so the spec); jitter draws only
        # change magnitudes and outcomes within that layout.
        self.rng = rng
        self.jitter = jitter
        self.name = name
        self.scene = SceneBuilder(task_id, trial_id)
        self.goals: list[tuple[GoalPredicate, bool]] = []
        self.support_goals: list[SupportGoal] = []
        self.events: list[ViolationEvent] = []
        self.bad_p: set[str] = set()
        self.bad_h: set[str] = set()
        self.bad_s: set[str] = set()
        self.items: list[str] = []
        self.cabinet_used = False
        sc = self.scene
        for oid, (pos, ext, role) in FIXTURES.items():
            on = {"table": FLOOR, "counter": FLOOR, "cabinet": FLOOR, "board": "counter", "box": "table"}[oid]
            jf = 0.0 if oid == "cabinet" else None
            sc.add(ObjectSpec(oid, role, extents=ext), pos, jf=jf, on=on)

    def item(self, critical=False, upright=False) -> str:
        k = len(self.items)
        if k >= MAX_ITEMS:
            raise InvalidParams(f"at most {MAX_ITEMS} items per scene")
        oid = f"item_{k}"
        self.scene.add(
            ObjectSpec(oid, Role.TARGET, critical, upright, ITEM_EXTENTS), _counter_spot(k), on="counter"
        )
        self.items.append(oid)
        return oid

    def inject(self, t: float, oid: str, kind: ViolationKind, role: Role = Role.TARGET):
        self.events.append(ViolationEvent(t, oid, kind, role))

    def goal(self, kind, subject, reference=None, satisfied=True, flag=None):
        self.goals.append((GoalPredicate(kind, subject, reference, flag), satisfied))

    def support(self, oid: str, ok: bool = True):
        self.support_goals.append(SupportGoal(oid, DISPLACEMENT_LIMIT_M))
        if not ok:
            self.bad_s.add(oid)

    def random_supports(self, required=(), exclude=()):
        pool = [o for o in ("table", "box", "board") if o not in required and o not in exclude]
        chosen = list(required) + [o for o in pool if self.rng.random() < 0.5]
        for oid in sorted(chosen, key=["table", "box", "board"].index):
            self.support(oid)

    # goal-directed placement of an item into its destination
    def deliver(self, oid: str, dest: str, k: int):
        sc = self.scene
        if dest == "cabinet":
            self.open_cabinet()
            sc.place(oid, _cabinet_spot(k), "cabinet")
        else:
            sc.place(oid, _table_spot(k), "table")

    def open_cabinet(self):
        if not self.cabinet_used:
            self.cabinet_used = True
            self.scene.set_jf("cabinet", [0.35, 0.7, 1.0])

    def spec(self) -> TaskSpec:
        return TaskSpec(
            task_id=self.scene.task_id,
            name=self.name.replace("_", " "),
            instruction=f"synthetic {self.name} scenario",
            objects=tuple(self.scene.objects),
            goals=tuple(g for g, _ in self.goals),
            support_goals=tuple(self.support_goals),
        )

    def truth(self) -> GroundTruth:
        spec_objs = {o.object_id: o for o in self.scene.objects}
        g = tuple(ok for _, ok in self.goals)
        p = tuple(goal.subject not in self.bad_p for goal, _ in self.goals)
        h = tuple(goal.subject not in self.bad_h for goal, _ in self.goals)
        s = tuple(sg.object_id not in self.bad_s for sg in self.support_goals)
        n, m = len(g), len(s)
        weighted = sum(1 for a, b, c in zip(g, p, h) if a and b and c)
        events = tuple(sorted(self.events, key=lambda e: e.key))
        for e in events:
            assert spec_objs[e.object_id].role is e.role_at_event
        return GroundTruth(
            events=events,
            g=g,
            p=p,
            h=h,
            s=s,
            q=float(Fraction(sum(g), n)),
            sq=float(Fraction(weighted, n)),
            seq=float(Fraction(weighted + sum(s), n + m)),
            seq_oracle=float(Fraction(weighted + m, n + m)),
            tv=sum(1 for e in events if e.role_at_event is Role.TARGET),
            ntv=sum(1 for e in events if e.role_at_event is Role.SUPPORT),
        )


def _param(params: dict, key: str, default, lo=None, hi=None, kind=float):
    value = params.get(key, default)
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise InvalidParams(f"{key} must be {kind.__name__}, got {value!r}")
    if lo is not None and value < lo or hi is not None and value > hi:
        raise InvalidParams(f"{key}={value!r} outside [{lo}, {hi}]")
    return value


def _check_params(params: dict, allowed: set[str]):
    unknown = set(params) - allowed
    if unknown:
        raise InvalidParams(f"unknown parameter(s): {', '.join(sorted(unknown))}")


def _dest(sc: _Script) -> str:
    return "cabinet" if sc.rng.random() < 0.4 else "table"


def _goal_for(sc: _Script, oid: str, dest: str, satisfied: bool):
    if dest == "cabinet":
        sc.goal(PredicateKind.INSIDE, oid, "cabinet", satisfied)
    else:
        sc.goal(PredicateKind.ONTOP, oid, "table", satisfied)


def _finish_cabinet(sc: _Script, closed: bool | None):
    """Optionally add a ``closed cabinet`` goal; ``closed`` is its final outcome."""
    if closed is None:
        if sc.cabinet_used:
            sc.scene.set_jf("cabinet", [0.6, 0.0])
        return
    sc.open_cabinet()
    sc.scene.set_jf("cabinet", [0.6, 0.0] if closed else [0.6, 0.3])
    sc.goal(PredicateKind.CLOSED, "cabinet", satisfied=closed)


def _declare_stove(sc: _Script) -> bool:
    # all objects must exist before the first frame
    if sc.rng.random() < 0.3:
        sc.scene.add(
            ObjectSpec("stove", Role.TARGET, extents=(0.3, 0.3, 0.45)),
            (2.5, 1.0, 0.45),
            flags={"toggled_on": False},
            on=FLOOR,
        )
        return True
    return False


def _switch_on_stove(sc: _Script):
    sc.scene.rest()
    sc.scene.flags["stove"]["toggled_on"] = True
    sc.scene.rest()
    sc.goal(PredicateKind.TOGGLED_ON, "stove")


def _clean_success(sc: _Script, params):
    _check_params(params, {"n_goals", "nudge_m"})
    n = _param(params, "n_goals", sc.rng.randint(1, 4), 1, 5, int)
    nudge = _param(params, "nudge_m", round(sc.jitter.uniform(0.0, 0.06), 3), 0.0, 0.09)
    items = [sc.item(critical=sc.rng.random() < 0.5, upright=sc.rng.random() < 0.5) for _ in range(n)]
    stove = _declare_stove(sc)
    sc.scene.rest(2)
    for k, oid in enumerate(items):
        dest = _dest(sc)
        sc.deliver(oid, dest, k)
        _goal_for(sc, oid, dest, True)
    if nudge > 0:
        # the arm brushes the box: contact only, no violation
        x, y, z = sc.scene.pos["box"]
        sc.scene.move("box", (x - nudge, y, z), 2)
    _finish_cabinet(sc, True if sc.rng.random() < 0.5 else None)
    if stove:
        _switch_on_stove(sc)
    sc.random_supports()
    sc.scene.rest(3)


def _partial_goals(sc: _Script, params):
    _check_params(params, {"n_goals", "pattern"})
    n = _param(params, "n_goals", sc.rng.randint(2, 5), 1, 5, int)
    pattern = params.get("pattern")
    if pattern is None:
        pattern = [sc.jitter.random() < 0.5 for _ in range(n)]
        if all(pattern):
            pattern[sc.jitter.randrange(n)] = False
    if isinstance(pattern, str):
        if set(pattern) - {"0", "1"}:
            raise InvalidParams("pattern string must contain only 0 and 1")
        pattern = [c == "1" for c in pattern]
    if len(pattern) != n:
        raise InvalidParams("pattern length must equal n_goals")
    items = [sc.item(upright=sc.rng.random() < 0.5) for _ in range(n)]
    sc.scene.rest(2)
    for k, (oid, ok) in enumerate(zip(items, pattern)):
        dest = _dest(sc)
        if ok:
            sc.deliver(oid, dest, k)
        _goal_for(sc, oid, dest, bool(ok))
    _finish_cabinet(sc, (sc.jitter.random() < 0.5) if sc.rng.random() < 0.5 else None)
    sc.random_supports()
    sc.scene.rest(3)


def _tip_over(sc: _Script, oid: str, roll_deg: float, surface_top: float):
    """Tilt an unheld item in place to ``roll_deg`` over three frames, resting on its surface."""
    scene = sc.scene
    first_bad = None
    for frac in (0.3, 0.6, 1.0):
        angle = roll_deg * frac
        q = _roll(angle)
        scene.quat[oid] = q
        scene.pos[oid][2] = surface_top + float(world_half_extents(q, ITEM_EXTENTS)[2])
        t = scene.snap()
        if exceeds(angle, TILT_LIMIT_DEG):
            if first_bad is None:
                first_bad = t
        else:
            first_bad = None
    if first_bad is not None:
        sc.inject(first_bad, oid, ViolationKind.TIPPED)
        sc.bad_p.add(oid)


def _tipped_placement(sc: _Script, params):
    _check_params(params, {"roll_deg", "n_goals"})
    roll = _param(params, "roll_deg", round(sc.jitter.uniform(40.0, 90.0), 2), 0.0, 90.0)
    n = _param(params, "n_goals", sc.rng.randint(1, 3), 1, 5, int)
    items = [sc.item(upright=True)] + [sc.item() for _ in range(n - 1)]
    sc.scene.rest(2)
    sc.scene.place(items[0], _table_spot(0), "table")
    _tip_over(sc, items[0], roll, TABLE_TOP)
    _goal_for(sc, items[0], "table", True)
    for k, oid in enumerate(items[1:], start=1):
        dest = _dest(sc)
        sc.deliver(oid, dest, k)
        _goal_for(sc, oid, dest, True)
    _finish_cabinet(sc, None)
    sc.random_supports()
    sc.scene.rest(3)


def _drop(sc: _Script, oid: str, height: float, onto: str, spot_k: int, critical: bool):
    """Carry ``oid`` over a landing spot, let go ``height`` above it and let it fall."""
    scene = sc.scene
    if onto == "floor":
        spot = _floor_spot(spot_k)
    else:
        spot = _table_spot(spot_k)
    scene.pick(oid)
    scene.lift(oid, dz=0.2)
    scene.carry(oid, spot[:2])
    release_z = spot[2] + height
    x, y, _ = scene.pos[oid]
    scene.move(oid, (x, y, release_z), 4)
    t = scene.release(oid)
    scene.fall(oid, spot[2], onto)
    scene.rest(2)
    if onto == "floor" or exceeds(height, FALL_LIMIT_M):
        sc.inject(t, oid, ViolationKind.DROP)
        if critical:
            sc.bad_h.add(oid)
    return spot


def _regrasp_and_place(sc: _Script, oid: str, k: int):
    scene = sc.scene
    scene.pick(oid)
    scene.lift(oid, dz=TABLE_TOP + 0.35 - scene.pos[oid][2])
    scene.carry(oid, _table_spot(k)[:2])
    scene.lower(oid, _table_spot(k)[2], "table")
    scene.release(oid)


def _dropped_critical(sc: _Script, params):
    _check_params(params, {"drop_height_m", "onto", "drops", "replace"})
    onto = params.get("onto", "floor")
    if onto not in ("floor", "table"):
        raise InvalidParams("onto must be 'floor' or 'table'")
    lo = 0.2 if onto == "floor" else 0.05
    height = _param(params, "drop_height_m", round(sc.jitter.uniform(0.2, 1.5), 3), lo, 1.5)
    drops = _param(params, "drops", 1, 1, 2, int)
    replace = params.get("replace", True)
    if onto == "table" and drops != 1:
        raise InvalidParams("drops onto the table are single episodes")
    victim = sc.item(critical=True, upright=sc.rng.random() < 0.5)
    others = [sc.item() for _ in range(sc.rng.randint(0, 2))]
    sc.scene.rest(2)
    if onto == "floor":
        for _ in range(drops):
            _drop(sc, victim, height, "floor", 0, critical=True)
        if replace:
            _regrasp_and_place(sc, victim, 0)
        _goal_for(sc, victim, "table", bool(replace))
    else:
        _drop(sc, victim, height, "table", 0, critical=True)
        _goal_for(sc, victim, "table", True)
    for k, oid in enumerate(others, start=1):
        dest = _dest(sc)
        sc.deliver(oid, dest, k)
        _goal_for(sc, oid, dest, True)
    _finish_cabinet(sc, None)
    sc.random_supports()
    sc.scene.rest(3)


def _push_box(sc: _Script, distance: float):
    """Slide the box along -x by ``distance`` in small steps, keeping table contact."""
    scene = sc.scene
    x0, y, z = scene.pos["box"]
    steps = max(3, math.ceil(distance / 0.03))
    first_bad = None
    for k in range(1, steps + 1):
        d = distance * k / steps
        scene.pos["box"] = [x0 - d, y, z]
        t = scene.snap()
        if first_bad is None and exceeds(d, DISPLACEMENT_LIMIT_M):
            first_bad = t
    if first_bad is not None:
        sc.inject(first_bad, "box", ViolationKind.DISPLACED, Role.SUPPORT)
        sc.bad_s.add("box")


def _displaced_support(sc: _Script, params):
    _check_params(params, {"distance_m"})
    dist = _param(params, "distance_m", round(sc.jitter.uniform(0.15, 0.4), 3), 0.0, 0.5)
    items = [sc.item() for _ in range(sc.rng.randint(1, 3))]
    sc.scene.rest(2)
    sc.support("box")
    for k, oid in enumerate(items):
        dest = _dest(sc)
        sc.deliver(oid, dest, k)
        _goal_for(sc, oid, dest, True)
        if k == 0:
            _push_box(sc, dist)
    _finish_cabinet(sc, None)
    sc.random_supports(exclude=("box",))
    sc.support_goals.sort(key=lambda g: ["table", "box", "board"].index(g.object_id))
    sc.scene.rest(3)


def _knock_board(sc: _Script):
    """Slide the board off the counter edge; it falls to the floor."""
    scene = sc.scene
    x, y0, z = scene.pos["board"]
    scene.move("board", (x, y0 + 0.2, z), 4)
    scene.move("board", (x, y0 + 0.3, z), 1)
    scene._drop_contacts("board")
    t = scene.snap()
    scene.fall("board", FIXTURES["board"][1][2], FLOOR)
    scene.rest(2)
    sc.inject(t, "board", ViolationKind.FELL, Role.SUPPORT)
    sc.bad_s.add("board")


def _fallen_support(sc: _Script, params):
    _check_params(params, set())
    items = [sc.item() for _ in range(sc.rng.randint(1, 3))]
    sc.scene.rest(2)
    sc.support("board")
    for k, oid in enumerate(items):
        dest = _dest(sc)
        sc.deliver(oid, dest, k)
        _goal_for(sc, oid, dest, True)
        if k == 0:
            _knock_board(sc)
    _finish_cabinet(sc, None)
    sc.random_supports(exclude=("board",))
    sc.support_goals.sort(key=lambda g: ["table", "box", "board"].index(g.object_id))
    sc.scene.rest(3)


def _strike(sc: _Script, oid: str, speed: float, k: int):
    """Bring a held item down onto the table, the last step at ``speed`` m/s."""
    scene = sc.scene
    spot = _table_spot(k)
    step = speed * scene.dt
    scene.pick(oid)
    scene.lift(oid, dz=max(0.15, step + 0.05))
    scene.carry(oid, spot[:2])
    x, y, z = scene.pos[oid]
    target = spot[2] + step
    n_slow = max(1, math.ceil(round((z - target) / 0.05, 9)))
    scene.move(oid, (x, y, target), n_slow)
    scene.pos[oid] = [x, y, spot[2]]
    scene.contacts.add(contact(oid, "table"))
    t = scene.snap()
    scene.release(oid)
    if exceeds(speed, IMPACT_LIMIT_MPS):
        sc.inject(t, oid, ViolationKind.MISHANDLE)
        sc.bad_h.add(oid)


def _hard_impact(sc: _Script, params):
    _check_params(params, {"speed_mps"})
    speed = _param(params, "speed_mps", round(sc.jitter.uniform(1.5, 3.0), 3), 0.2, 3.0)
    plate = sc.item(critical=True)
    others = [sc.item() for _ in range(sc.rng.randint(0, 2))]
    sc.scene.rest(2)
    _strike(sc, plate, speed, 0)
    _goal_for(sc, plate, "table", True)
    for k, oid in enumerate(others, start=1):
        dest = _dest(sc)
        sc.deliver(oid, dest, k)
        _goal_for(sc, oid, dest, True)
    _finish_cabinet(sc, None)
    sc.random_supports()
    sc.scene.rest(3)


def _invert_while_held(sc: _Script, oid: str, peak_deg: float, k: int):
    scene = sc.scene
    spot = _table_spot(k)
    scene.pick(oid)
    scene.lift(oid)
    first_bad = None
    for angle in (peak_deg / 3, 2 * peak_deg / 3, peak_deg, 2 * peak_deg / 3, peak_deg / 3, 0.0):
        scene.quat[oid] = _roll(angle) if angle else IDENTITY
        t = scene.snap()
        if first_bad is None and exceeds(angle, HELD_TILT_LIMIT_DEG):
            first_bad = t
    scene.carry(oid, spot[:2])
    scene.lower(oid, spot[2], "table")
    scene.release(oid)
    if first_bad is not None:
        sc.inject(first_bad, oid, ViolationKind.MISHANDLE)
        sc.bad_h.add(oid)


INJECTIONS = ("critical_drop", "tip", "loose_drop", "board_fall", "box_push", "held_inversion")


def _multi_violation(sc: _Script, params):
    _check_params(params, {"injections"})
    chosen = params.get("injections")
    if chosen is None:
        chosen = sc.rng.sample(INJECTIONS, sc.rng.randint(2, len(INJECTIONS)))
    chosen = [c for c in INJECTIONS if c in chosen]
    if len(chosen) < 2 or len(set(chosen)) != len(chosen):
        raise InvalidParams(f"multi_violation needs two or more distinct injections from {INJECTIONS}")
    scene = sc.scene
    plan = []
    for name in chosen:
        if name == "critical_drop":
            plan.append((name, sc.item(critical=True)))
        elif name == "tip":
            plan.append((name, sc.item(upright=True)))
        elif name == "loose_drop":
            plan.append((name, sc.item()))
        elif name == "held_inversion":
            plan.append((name, sc.item(critical=True, upright=True)))
        else:
            plan.append((name, None))
    spare = None if any(oid for _, oid in plan) else sc.item()
    scene.rest(2)
    if "board_fall" in chosen:
        sc.support("board", ok=False)
    if "box_push" in chosen:
        sc.support("box", ok=False)
    for k, (name, oid) in enumerate(plan):
        if name == "critical_drop":
            _drop(sc, oid, round(sc.jitter.uniform(0.3, 1.2), 3), "floor", k, critical=True)
            _regrasp_and_place(sc, oid, k)
            _goal_for(sc, oid, "table", True)
        elif name == "tip":
            scene.place(oid, _table_spot(k), "table")
            _tip_over(sc, oid, round(sc.jitter.uniform(45.0, 90.0), 2), TABLE_TOP)
            _goal_for(sc, oid, "table", True)
        elif name == "loose_drop":
            _drop(sc, oid, round(sc.jitter.uniform(0.3, 1.2), 3), "floor", k, critical=False)
            _goal_for(sc, oid, "table", False)
        elif name == "held_inversion":
            _invert_while_held(sc, oid, round(sc.jitter.uniform(100.0, 170.0), 2), k)
            _goal_for(sc, oid, "table", True)
        elif name == "board_fall":
            _knock_board(sc)
        elif name == "box_push":
            _push_box(sc, round(sc.jitter.uniform(0.15, 0.4), 3))
    if spare is not None:
        sc.deliver(spare, "table", len(plan))
        _goal_for(sc, spare, "table", True)
    if "table" not in {g.object_id for g in sc.support_goals} and sc.rng.random() < 0.5:
        sc.support("table")
    sc.support_goals.sort(key=lambda g: ["table", "box", "board"].index(g.object_id))
    scene.rest(3)


_BUILDERS = {
    "clean_success": _clean_success,
    "partial_goals": _partial_goals,
    "tipped_placement": _tipped_placement,
    "dropped_critical": _dropped_critical,
    "displaced_support": _displaced_support,
    "fallen_support": _fallen_support,
    "multi_violation": _multi_violation,
    "hard_impact": _hard_impact,
}


def generate(
    script: ScenarioScript, trial_id: int = 0, *, task_id: str | None = None, variant: int | None = None
) -> tuple[TaskSpec, Trajectory, GroundTruth]:
    """Build one scenario.  The same arguments always yield the same output.

    ``variant`` re-draws magnitudes and outcomes (drop heights, which goals
    succeed, ...) while keeping the layout, so every variant of a script and
    seed shares one TaskSpec.
    """
    rng = random.Random(f"{script.name}:{script.seed}")
    jitter = random.Random(f"{script.name}:{script.seed}" + ("" if variant is None else f":{variant}"))
    sc = _Script(script.name, rng, jitter, task_id or f"{script.name}-{trial_id:04d}", trial_id)
    _BUILDERS[script.name](sc, dict(script.params))
    return sc.spec(), sc.scene.build(), sc.truth()


def generate_trials(script: ScenarioScript, count: int, task_id: str | None = None):
    """``count`` trials of one task: a single spec plus per-trial (trajectory, truth) pairs."""
    if count < 1:
        raise InvalidParams("count must be at least 1")
    task_id = task_id or f"{script.name}-{script.seed}"
    spec = None
    trials = []
    for i in range(count):
        s, traj, truth = generate(script, i, task_id=task_id, variant=i)
        if spec is None:
            spec = s
        elif s != spec:  # pragma: no cover - guards the rng/jitter split
            raise AssertionError(f"trial {i} changed the task layout")
        trials.append((traj, truth))
    return spec, trials


def scenario_seed(seed: int, index: int) -> int:
    return (seed * 0x9E3779B97F4A7C15 + index) % 2**64


def generate_corpus(seed: int, count: int, out_dir, scripts=SCRIPTS) -> Path:
    """Write ``count`` scenarios under ``out_dir`` and return the manifest path.

    Layout: ``<out_dir>/<script>-<index>/{task.spec, trial.jsonl, truth.json}``;
    scripts are assigned round-robin from ``scripts``.
    """
    if count < 1:
        raise InvalidParams("count must be at least 1")
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(count):
        name = scripts[i % len(scripts)]
        script = ScenarioScript(name, scenario_seed(seed, i))
        spec, traj, truth = generate(script, trial_id=i)
        d = root / f"{name}-{i:04d}"
        d.mkdir(exist_ok=True)
        (d / "task.spec").write_text(format_task_spec(spec), encoding="utf-8")
        (d / "trial.jsonl").write_text(dumps_trajectory(traj), encoding="utf-8")
        (d / "truth.json").write_text(json.dumps(truth.to_dict(spec.task_id, traj.trial_id), indent=1) + "\n", encoding="utf-8")
        entries.append({"dir": d.name, "script": name, "seed": script.seed})
    manifest = root / "manifest.json"
    manifest.write_text(json.dumps({"seed": seed, "count": count, "scenarios": entries}, indent=1) + "\n", encoding="utf-8")
    return manifest


def load_truth(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)

"""Task specifications: scoped objects, goal predicates and support goals.

The text format is line oriented::

    # comment
    task kitchen_08 "rearrange kitchen"
    instruction "put the appliances in the cabinet and close it"
    object mixer role=target critical extents=0.08,0.08,0.12
    object cabinet role=target extents=0.3,0.25,0.5
    goal inside mixer cabinet
    goal closed cabinet
    goal state_flag pizza flag=cooked
    support board limit=0.1
"""

from __future__ import annotations

import enum
import math
import re
import warnings
from dataclasses import dataclass, field
from typing import Iterable

from safescore.errors import (
    ArityError,
    DanglingObjectReference,
    DuplicateObjectId,
    InvalidTaskSpec,
    SpecSyntaxError,
    UnknownPredicateKind,
)

OBJECT_ID_RE = re.compile(r"[a-z0-9_.]+")
TASK_ID_RE = re.compile(r"[A-Za-z0-9_.\-]+")
FLAG_RE = re.compile(r"[A-Za-z0-9_.]+")
DEFAULT_SUPPORT_LIMIT_M = 0.10


class Role(str, enum.Enum):
    TARGET = "target"
    SUPPORT = "support"


class PredicateKind(str, enum.Enum):
    INSIDE = "inside"
    ONTOP = "ontop"
    NEXTTO = "nextto"
    OPEN = "open"
    CLOSED = "closed"
    TOGGLED_ON = "toggled_on"
    STATE_FLAG = "state_flag"

    @property
    def is_relation(self) -> bool:
        return self in RELATIONS


RELATIONS = frozenset({PredicateKind.INSIDE, PredicateKind.ONTOP, PredicateKind.NEXTTO})


@dataclass(frozen=True)
class ObjectSpec:
    object_id: str
    role: Role
    critical: bool = False
    upright_required: bool = False
    extents: tuple[float, float, float] = (0.05, 0.05, 0.05)

    def __post_init__(self):
        object.__setattr__(self, "role", Role(self.role))
        object.__setattr__(self, "extents", tuple(float(e) for e in self.extents))


@dataclass(frozen=True)
class GoalPredicate:
    kind: PredicateKind
    subject: str
    reference: str | None = None
    flag_name: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", PredicateKind(self.kind))

    def __str__(self) -> str:
        parts = [self.kind.value, self.subject]
        if self.reference is not None:
            parts.append(self.reference)
        if self.flag_name is not None:
            parts.append(f"flag={self.flag_name}")
        return " ".join(parts)


@dataclass(frozen=True)
class SupportGoal:
    """Support sub-goal.  Without an explicit limit the run's configured one applies."""

    object_id: str
    displacement_limit_m: float | None = None

    def __post_init__(self):
        if self.displacement_limit_m is not None:
            object.__setattr__(self, "displacement_limit_m", float(self.displacement_limit_m))

    def limit(self, default: float = DEFAULT_SUPPORT_LIMIT_M) -> float:
        return default if self.displacement_limit_m is None else self.displacement_limit_m


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    name: str
    instruction: str
    objects: tuple[ObjectSpec, ...]
    goals: tuple[GoalPredicate, ...]
    support_goals: tuple[SupportGoal, ...] = ()
    _index: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        object.__setattr__(self, "goals", tuple(self.goals))
        object.__setattr__(self, "support_goals", tuple(self.support_goals))
        object.__setattr__(self, "_index", {o.object_id: o for o in self.objects})

    @property
    def n(self) -> int:
        return len(self.goals)

    @property
    def m(self) -> int:
        return len(self.support_goals)

    def object(self, object_id: str) -> ObjectSpec:
        return self._index[object_id]

    def has_object(self, object_id: str) -> bool:
        return object_id in self._index

    @property
    def object_ids(self) -> tuple[str, ...]:
        return tuple(o.object_id for o in self.objects)


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    message: str

    def __str__(self) -> str:
        return f"{self.severity}: {self.message}"


def validate_task_spec(spec: TaskSpec) -> list[Diagnostic]:
    """Check every TaskSpec invariant; an empty list means the spec is valid."""
    out: list[Diagnostic] = []

    def error(msg):
        out.append(Diagnostic("error", msg))

    if not spec.task_id or not TASK_ID_RE.fullmatch(spec.task_id):
        error(f"task id {spec.task_id!r} is not a valid token")

    seen: set[str] = set()
    for obj in spec.objects:
        oid = obj.object_id
        if not OBJECT_ID_RE.fullmatch(oid or ""):
            error(f"object id {oid!r} does not match [a-z0-9_.]+")
        if oid in seen:
            error(f"object {oid!r} declared more than once")
        seen.add(oid)
        if len(obj.extents) != 3 or not all(math.isfinite(e) and e > 0 for e in obj.extents):
            error(f"object {oid!r}: extents must be three positive numbers, got {obj.extents}")
        if obj.critical and obj.role is not Role.TARGET:
            error(f"object {oid!r}: criticality requires target role")

    if not spec.goals:
        error(f"task {spec.task_id!r}: at least one goal required")
    for i, goal in enumerate(spec.goals):
        label = f"goal {i} ({goal})"
        if goal.subject not in seen:
            error(f"{label}: undeclared subject {goal.subject!r}")
        if goal.kind.is_relation:
            if goal.reference is None:
                error(f"{label}: {goal.kind.value} needs a reference object")
            elif goal.reference not in seen:
                error(f"{label}: undeclared reference {goal.reference!r}")
            elif goal.reference == goal.subject:
                error(f"{label}: subject and reference are both {goal.subject!r}")
        elif goal.reference is not None:
            error(f"{label}: {goal.kind.value} takes no reference object")
        if goal.kind is PredicateKind.STATE_FLAG:
            if not goal.flag_name:
                error(f"{label}: state_flag needs flag=<name>")
        elif goal.flag_name is not None:
            error(f"{label}: only state_flag takes a flag name")

    support_seen: set[str] = set()
    for sg in spec.support_goals:
        oid = sg.object_id
        if oid not in seen:
            error(f"support goal: undeclared object {oid!r}")
        elif spec.object(oid).role is not Role.SUPPORT:
            error(f"support goal: object {oid!r} must have role support")
        if oid in support_seen:
            error(f"support goal: object {oid!r} listed more than once")
        support_seen.add(oid)
        if sg.displacement_limit_m is not None and not (
            math.isfinite(sg.displacement_limit_m) and sg.displacement_limit_m > 0
        ):
            error(f"support goal {oid!r}: limit must be positive, got {sg.displacement_limit_m}")

    subjects = [g.subject for g in spec.goals if g.subject in seen]
    if subjects and all(spec.object(s).role is Role.SUPPORT for s in subjects):
        out.append(Diagnostic("warning", f"task {spec.task_id!r}: every goal subject is a support object"))
    return out


# -- parsing -----------------------------------------------------------------

_TOKEN_RE = re.compile(r'"(?:[^"\\]|\\.)*"|[^\s"]+')


@dataclass
class _Token:
    text: str
    col: int  # 1-based

    @property
    def quoted(self) -> bool:
        return self.text.startswith('"')

    def unquote(self) -> str:
        return re.sub(r"\\(.)", r"\1", self.text[1:-1])


def _tokenize(line: str, lineno: int) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(line):
        if line[pos].isspace():
            pos += 1
            continue
        if line[pos] == "#":
            break
        m = _TOKEN_RE.match(line, pos)
        if m is None or (line[pos] == '"' and not m.group().endswith('"')) or m.group() == '"':
            raise SpecSyntaxError("unterminated string", lineno, pos + 1)
        tokens.append(_Token(m.group(), pos + 1))
        pos = m.end()
    return tokens


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


class _Parser:
    def __init__(self):
        self.task: tuple[str, str] | None = None
        self.instruction = ""
        self.objects: list[ObjectSpec] = []
        self.object_lines: dict[str, int] = {}
        self.goals: list[tuple[GoalPredicate, int, list[_Token]]] = []
        self.supports: list[tuple[SupportGoal, int, _Token]] = []

    def expect_id(self, tok: _Token | None, lineno: int, what: str, end_col: int) -> str:
        if tok is None:
            raise SpecSyntaxError(f"expected {what}", lineno, end_col)
        if tok.quoted or not OBJECT_ID_RE.fullmatch(tok.text):
            raise SpecSyntaxError(f"expected {what} matching [a-z0-9_.]+, got {tok.text!r}", lineno, tok.col)
        return tok.text

    def statement(self, toks: list[_Token], lineno: int, line: str):
        head = toks[0].text
        end = len(line.rstrip()) + 1
        handler = getattr(self, f"_stmt_{head}", None)
        if handler is None or toks[0].quoted:
            raise SpecSyntaxError(
                f"expected one of task, instruction, object, goal, support; got {head!r}", lineno, toks[0].col
            )
        handler(toks[1:], lineno, end)

    def _stmt_task(self, args, lineno, end):
        if self.task is not None:
            raise SpecSyntaxError("duplicate task statement", lineno, 1)
        if not args or args[0].quoted or not TASK_ID_RE.fullmatch(args[0].text):
            raise SpecSyntaxError("expected task id", lineno, args[0].col if args else end)
        if len(args) < 2 or not args[1].quoted:
            raise SpecSyntaxError("expected quoted task name", lineno, args[1].col if len(args) > 1 else end)
        if len(args) > 2:
            raise SpecSyntaxError(f"unexpected token {args[2].text!r}", lineno, args[2].col)
        self.task = (args[0].text, args[1].unquote())

    def _stmt_instruction(self, args, lineno, end):
        if len(args) != 1 or not args[0].quoted:
            col = args[0].col if args else end
            raise SpecSyntaxError("expected a single quoted instruction", lineno, col)
        self.instruction = args[0].unquote()

    def _stmt_object(self, args, lineno, end):
        oid = self.expect_id(args[0] if args else None, lineno, "object id", end)
        role = None
        critical = upright = False
        extents = None
        for tok in args[1:]:
            key, eq, value = tok.text.partition("=")
            if tok.quoted:
                raise SpecSyntaxError(f"unexpected string {tok.text}", lineno, tok.col)
            if key == "role" and eq:
                if value not in ("target", "support"):
                    raise SpecSyntaxError(f"expected role=target or role=support, got {tok.text!r}", lineno, tok.col)
                role = Role(value)
            elif key == "extents" and eq:
                parts = value.split(",")
                try:
                    extents = tuple(float(p) for p in parts)
                except ValueError:
                    extents = None
                if extents is None or len(extents) != 3 or not all(math.isfinite(e) for e in extents):
                    raise SpecSyntaxError(f"expected extents=<x>,<y>,<z>, got {tok.text!r}", lineno, tok.col)
            elif tok.text == "critical":
                critical = True
            elif tok.text == "upright":
                upright = True
            else:
                raise SpecSyntaxError(
                    f"expected role=, extents=, critical or upright; got {tok.text!r}", lineno, tok.col
                )
        if role is None:
            raise SpecSyntaxError(f"object {oid!r}: expected role=<target|support>", lineno, end)
        if extents is None:
            raise SpecSyntaxError(f"object {oid!r}: expected extents=<x>,<y>,<z>", lineno, end)
        if oid in self.object_lines:
            raise DuplicateObjectId(oid, lineno, args[0].col)
        self.object_lines[oid] = lineno
        self.objects.append(ObjectSpec(oid, role, critical, upright, extents))

    def _stmt_goal(self, args, lineno, end):
        if not args:
            raise SpecSyntaxError("expected predicate kind", lineno, end)
        try:
            kind = PredicateKind(args[0].text)
        except ValueError:
            raise UnknownPredicateKind(f"unknown predicate kind {args[0].text!r}", lineno, args[0].col) from None
        subject = self.expect_id(args[1] if len(args) > 1 else None, lineno, "subject object id", end)
        rest = args[2:]
        reference = flag = None
        if kind.is_relation:
            if not rest:
                raise ArityError(f"{kind.value} needs a reference object", lineno, end)
            reference = self.expect_id(rest[0], lineno, "reference object id", end)
            rest = rest[1:]
        elif kind is PredicateKind.STATE_FLAG:
            if not rest or not rest[0].text.startswith("flag="):
                raise ArityError("state_flag needs flag=<name>", lineno, rest[0].col if rest else end)
            flag = rest[0].text[len("flag="):]
            if not FLAG_RE.fullmatch(flag):
                raise SpecSyntaxError(f"invalid flag name {flag!r}", lineno, rest[0].col)
            rest = rest[1:]
        if rest:
            raise ArityError(f"unexpected argument {rest[0].text!r} for {kind.value}", lineno, rest[0].col)
        self.goals.append((GoalPredicate(kind, subject, reference, flag), lineno, args))

    def _stmt_support(self, args, lineno, end):
        oid = self.expect_id(args[0] if args else None, lineno, "support object id", end)
        limit = None
        for tok in args[1:]:
            key, eq, value = tok.text.partition("=")
            if key != "limit" or not eq:
                raise SpecSyntaxError(f"expected limit=<meters>, got {tok.text!r}", lineno, tok.col)
            try:
                limit = float(value)
            except ValueError:
                raise SpecSyntaxError(f"expected a number, got {value!r}", lineno, tok.col) from None
        self.supports.append((SupportGoal(oid, limit), lineno, args[0]))

    def finish(self) -> TaskSpec:
        if self.task is None:
            raise SpecSyntaxError("missing task statement", 1, 1)
        declared = self.object_lines
        for goal, lineno, args in self.goals:
            for tok in args[1:3]:
                if tok.text in (goal.subject, goal.reference) and tok.text not in declared:
                    raise DanglingObjectReference(tok.text, lineno, tok.col)
        for sg, lineno, tok in self.supports:
            if sg.object_id not in declared:
                raise DanglingObjectReference(sg.object_id, lineno, tok.col)
        spec = TaskSpec(
            task_id=self.task[0],
            name=self.task[1],
            instruction=self.instruction,
            objects=tuple(self.objects),
            goals=tuple(g for g, _, _ in self.goals),
            support_goals=tuple(s for s, _, _ in self.supports),
        )
        diagnostics = validate_task_spec(spec)
        errors = [d for d in diagnostics if d.severity == "error"]
        if errors:
            raise InvalidTaskSpec(errors)
        for d in diagnostics:
            warnings.warn(d.message, stacklevel=3)
        return spec


def parse_task_spec(source: str | Iterable[str]) -> TaskSpec:
    """Parse the line-oriented task format from a string or an iterable of lines."""
    lines = source.splitlines() if isinstance(source, str) else source
    parser = _Parser()
    for lineno, line in enumerate(lines, start=1):
        line = line.rstrip("\r\n")
        toks = _tokenize(line, lineno)
        if toks:
            parser.statement(toks, lineno, line)
    return parser.finish()


def format_task_spec(spec: TaskSpec) -> str:
    out = [f"task {spec.task_id} {_quote(spec.name)}"]
    if spec.instruction:
        out.append(f"instruction {_quote(spec.instruction)}")
    for o in spec.objects:
        parts = [f"object {o.object_id} role={o.role.value}"]
        if o.critical:
            parts.append("critical")
        if o.upright_required:
            parts.append("upright")
        parts.append("extents=" + ",".join(repr(e) for e in o.extents))
        out.append(" ".join(parts))
    for g in spec.goals:
        out.append(f"goal {g}")
    for s in spec.support_goals:
        if s.displacement_limit_m is None:
            out.append(f"support {s.object_id}")
        else:
            out.append(f"support {s.object_id} limit={s.displacement_limit_m!r}")
    return "\n".join(out) + "\n"


def load_task_spec(path) -> TaskSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_task_spec(fh)

"""Cross-trial aggregation, box-plot statistics, run diffs and failure tallies."""

from __future__ import annotations

import csv
import enum
import io
import statistics
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from safescore.config import exceeds
from safescore.errors import DuplicateAnnotation, EmptyInput, MixedGoalCount, MixedTasks, UnknownCategory
from safescore.metrics import ScoreCard


@dataclass(frozen=True)
class ConsistencyStats:
    mean: float
    std: float
    min: float
    max: float
    q1: float
    median: float
    q3: float
    iqr: float
    outliers: tuple[tuple[int, float], ...] = ()


def quartiles(values: Sequence[float]) -> tuple[float, float, float]:
    """Inclusive (closest-rank linear interpolation) quartiles."""
    if len(values) == 1:
        return values[0], values[0], values[0]
    q1, med, q3 = statistics.quantiles(values, n=4, method="inclusive")
    return q1, med, q3


def consistency_stats(values: Sequence[float], ids: Sequence[int] | None = None) -> ConsistencyStats:
    """Box-plot summary of one task's per-trial values.

    ``ids`` labels each value in the outlier list; defaults to the positions.
    """
    values = [float(v) for v in values]
    if not values:
        raise EmptyInput("consistency_stats needs at least one value")
    if ids is None:
        ids = range(len(values))
    elif len(ids) != len(values):
        raise ValueError("ids and values differ in length")
    q1, med, q3 = quartiles(values)
    iqr = q3 - q1
    lo, hi = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    outliers = tuple((i, v) for i, v in zip(ids, values) if v < lo or v > hi)
    return ConsistencyStats(
        mean=statistics.fmean(values),
        std=statistics.pstdev(values),
        min=min(values),
        max=max(values),
        q1=q1,
        median=med,
        q3=q3,
        iqr=iqr,
        outliers=outliers,
    )


@dataclass(frozen=True)
class TaskSummary:
    task_id: str
    trial_count: int
    mean_q: float
    mean_sq: float
    mean_seq: float
    mean_seq_oracle: float
    mean_tv: float
    mean_ntv: float
    stats: ConsistencyStats
    q_values: tuple[tuple[int, float], ...] = field(default=(), compare=False)


def aggregate_task(cards: Sequence[ScoreCard]) -> TaskSummary:
    if not cards:
        raise EmptyInput("no score cards to aggregate")
    task_ids = {c.task_id for c in cards}
    if len(task_ids) > 1:
        raise MixedTasks(f"cards from several tasks: {sorted(task_ids)}")
    shapes = {(c.n, c.m) for c in cards}
    if len(shapes) > 1:
        raise MixedGoalCount(f"task {cards[0].task_id!r}: goal counts (N, M) differ across trials: {sorted(shapes)}")
    # Sorting by trial id keeps the result independent of input order.
    ordered = sorted(cards, key=lambda c: (c.trial_id, c.q))
    fmean = statistics.fmean
    return TaskSummary(
        task_id=cards[0].task_id,
        trial_count=len(cards),
        mean_q=fmean(c.q for c in ordered),
        mean_sq=fmean(c.sq for c in ordered),
        mean_seq=fmean(c.seq for c in ordered),
        mean_seq_oracle=fmean(c.seq_oracle for c in ordered),
        mean_tv=fmean(c.counts.tv for c in ordered),
        mean_ntv=fmean(c.counts.ntv for c in ordered),
        stats=consistency_stats([c.q for c in ordered], [c.trial_id for c in ordered]),
        q_values=tuple((c.trial_id, c.q) for c in ordered),
    )


def aggregate_cards(cards: Iterable[ScoreCard]) -> list[TaskSummary]:
    """One summary per task, sorted by task id."""
    by_task: dict[str, list[ScoreCard]] = defaultdict(list)
    for c in cards:
        by_task[c.task_id].append(c)
    return [aggregate_task(by_task[t]) for t in sorted(by_task)]


REPORT_HEADER = [
    "task_id", "trials", "q", "sq", "seq", "seq_oracle", "tv", "ntv",
    "std_q", "min_q", "q1", "median", "q3", "max_q",
]  # fmt: skip


def _report_values(s: TaskSummary) -> list[float]:
    st = s.stats
    return [s.mean_q, s.mean_sq, s.mean_seq, s.mean_seq_oracle, s.mean_tv, s.mean_ntv,
            st.std, st.min, st.q1, st.median, st.q3, st.max]  # fmt: skip


def report_rows(summaries: Sequence[TaskSummary]) -> list[list]:
    """Report rows plus a final ``Average`` row.

    The average row takes the unweighted mean over tasks of every column, so
    each task counts once however many trials it has; ``trials`` is the total.
    """
    rows = [[s.task_id, s.trial_count, *_report_values(s)] for s in summaries]
    if summaries:
        columns = list(zip(*(_report_values(s) for s in summaries)))
        rows.append(["Average", sum(s.trial_count for s in summaries), *(statistics.fmean(c) for c in columns)])
    return rows


def format_report_csv(summaries: Sequence[TaskSummary]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_HEADER)
    for row in report_rows(summaries):
        w.writerow([row[0], row[1], *(f"{v:.6f}" for v in row[2:])])
    return buf.getvalue()


def summary_to_dict(s: TaskSummary) -> dict:
    st = s.stats
    return {
        "task_id": s.task_id,
        "trials": s.trial_count,
        "q": s.mean_q,
        "sq": s.mean_sq,
        "seq": s.mean_seq,
        "seq_oracle": s.mean_seq_oracle,
        "tv": s.mean_tv,
        "ntv": s.mean_ntv,
        "stats": {
            "mean": st.mean, "std": st.std, "min": st.min, "max": st.max,
            "q1": st.q1, "median": st.median, "q3": st.q3, "iqr": st.iqr,
            "outliers": [[i, v] for i, v in st.outliers],
        },
    }  # fmt: skip


def boxplot_data(summaries: Sequence[TaskSummary]) -> list[dict]:
    """Plot-ready per-task Q distributions, ascending by mean Q."""
    out = []
    for s in sorted(summaries, key=lambda s: (s.mean_q, s.task_id)):
        st = s.stats
        out.append(
            {
                "task_id": s.task_id,
                "values": [v for _, v in s.q_values],
                "q1": st.q1,
                "median": st.median,
                "q3": st.q3,
                "outliers": [v for _, v in st.outliers],
            }
        )
    return out


# -- reproducibility ---------------------------------------------------------


@dataclass(frozen=True)
class DiffRow:
    task_id: str
    q_a: float
    q_b: float
    gap: float
    flagged: bool


@dataclass(frozen=True)
class DiffReport:
    rows: tuple[DiffRow, ...]
    only_a: tuple[str, ...] = ()
    only_b: tuple[str, ...] = ()

    @property
    def flagged(self) -> list[DiffRow]:
        return [r for r in self.rows if r.flagged]


def _mean_q_by_task(summaries) -> dict[str, float]:
    out = {}
    for s in summaries:
        if isinstance(s, TaskSummary):
            out[s.task_id] = s.mean_q
        else:
            task_id, q = s
            out[task_id] = float(q)
    return out


def diff_runs(a, b, gap_threshold: float = 0.10) -> DiffReport:
    """Compare mean Q per task between two runs.

    ``a`` and ``b`` hold TaskSummary objects or ``(task_id, mean_q)`` pairs.
    A task is flagged when its gap strictly exceeds ``gap_threshold``.
    """
    if not 0.0 <= gap_threshold <= 1.0:
        raise ValueError(f"gap threshold must lie in [0, 1], got {gap_threshold}")
    qa, qb = _mean_q_by_task(a), _mean_q_by_task(b)
    rows = []
    for task_id in qa.keys() & qb.keys():
        gap = abs(qa[task_id] - qb[task_id])
        rows.append(DiffRow(task_id, qa[task_id], qb[task_id], gap, exceeds(gap, gap_threshold)))
    rows.sort(key=lambda r: (-r.gap, r.task_id))
    return DiffReport(
        tuple(rows), tuple(sorted(qa.keys() - qb.keys())), tuple(sorted(qb.keys() - qa.keys()))
    )


def format_diff_csv(report: DiffReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["task_id", "q_a", "q_b", "gap", "flagged"])
    for r in report.rows:
        w.writerow([r.task_id, f"{r.q_a:.6f}", f"{r.q_b:.6f}", f"{r.gap:.6f}", str(r.flagged).lower()])
    return buf.getvalue()


def read_report_csv(text: str) -> list[tuple[str, float]]:
    """``(task_id, q)`` pairs from an aggregate report; the Average row is skipped."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or not {"task_id", "q"} <= set(reader.fieldnames):
        raise ValueError("report needs task_id and q columns")
    out = []
    for row in reader:
        if row["task_id"] == "Average":
            continue
        out.append((row["task_id"], float(row["q"])))
    return out


# -- failure taxonomy --------------------------------------------------------


class FailureCategory(str, enum.Enum):
    TASK_CONFUSION = "task_confusion"
    ABRUPT_TERMINATION = "abrupt_termination"
    SEMANTIC_CONFUSION = "semantic_confusion"
    NAVIGATION_FAILURE = "navigation_failure"
    IMPROPER_OBJECT_HANDLING = "improper_object_handling"
    SKILL_FAILURE = "skill_failure"
    COLLISION = "collision"
    EXECUTION_ORDER_CONFUSION = "execution_order_confusion"
    PLACEMENT_FAILURE = "placement_failure"
    GRASP_FAILURE = "grasp_failure"


@dataclass(frozen=True)
class FailureAnnotation:
    task_id: str
    trial_id: int
    category: FailureCategory
    note: str = ""


def failure_tally(annotations: Iterable[FailureAnnotation]) -> tuple[dict[str, int], dict[str, int]]:
    """Per-task counts (one per task) and totals (one per trial) for each category."""
    tasks: dict[FailureCategory, set] = defaultdict(set)
    trials: dict[FailureCategory, set] = defaultdict(set)
    for a in annotations:
        tasks[a.category].add(a.task_id)
        trials[a.category].add((a.task_id, a.trial_id))
    per_task = {c.value: len(tasks[c]) for c in FailureCategory}
    total = {c.value: len(trials[c]) for c in FailureCategory}
    return per_task, total


def read_annotations(text: str) -> list[FailureAnnotation]:
    """Parse ``task_id,trial_id,category,note`` CSV; row numbers count the header as 1."""
    reader = csv.DictReader(io.StringIO(text))
    needed = {"task_id", "trial_id", "category"}
    if reader.fieldnames is None or not needed <= set(reader.fieldnames):
        raise ValueError("annotations need task_id, trial_id, category columns")
    out = []
    seen = set()
    for row_no, row in enumerate(reader, start=2):
        try:
            category = FailureCategory(row["category"].strip())
        except ValueError:
            raise UnknownCategory(row["category"], row_no) from None
        try:
            trial_id = int(row["trial_id"])
        except (TypeError, ValueError):
            raise ValueError(f"row {row_no}: trial_id must be an integer, got {row['trial_id']!r}") from None
        ann = FailureAnnotation(row["task_id"], trial_id, category, row.get("note") or "")
        if ann in seen:
            raise DuplicateAnnotation(f"row {row_no}: duplicate annotation with identical note")
        seen.add(ann)
        out.append(ann)
    return out

"""``safescore`` command line: validate, score, aggregate, diff, tally, synth."""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from safescore import analysis
from safescore.config import RunConfig, Thresholds, load_config
from safescore.errors import AnalysisError, SafeScoreError, SpecError
from safescore.metrics import ScoreCard, score_trial
from safescore.synthgen import generate_corpus
from safescore.taskspec import TaskSpec, parse_task_spec
from safescore.trajlog import load_trajectory

EXIT_OK, EXIT_FAIL, EXIT_IO = 0, 1, 2


def _fmt(value) -> str:
    """JSON with every float printed to 6 decimals."""
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, float):
        return f"{value:.6f}"
    if isinstance(value, dict):
        return "{" + ", ".join(f"{json.dumps(k)}: {_fmt(v)}" for k, v in value.items()) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    return json.dumps(value, ensure_ascii=False)


def _err(msg: str) -> None:
    print(f"safescore: {msg}", file=sys.stderr)


def _read_text(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _config(args) -> RunConfig:
    cfg = load_config(getattr(args, "config", None))
    parallelism = getattr(args, "parallelism", None)
    fmt = getattr(args, "format", None)
    if parallelism is not None or fmt is not None:
        cfg = RunConfig(cfg.thresholds, fmt or cfg.output_format, parallelism or cfg.parallelism)
    return cfg


# -- validate ----------------------------------------------------------------


def cmd_validate(args) -> int:
    try:
        text = _read_text(args.spec)
    except OSError as exc:
        _err(f"cannot read {args.spec}: {exc.strerror}")
        return EXIT_IO
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            parse_task_spec(text)
        except SpecError as exc:
            diagnostics = getattr(exc, "diagnostics", None)
            if diagnostics:
                for d in diagnostics:
                    print(f"{args.spec}: {d}", file=sys.stderr)
            else:
                print(f"{args.spec}: error: {exc}", file=sys.stderr)
            return EXIT_FAIL
    for w in caught:
        print(f"{args.spec}: warning: {w.message}", file=sys.stderr)
    return EXIT_OK


# -- score -------------------------------------------------------------------


def _score_one(spec: TaskSpec, path: str, th: Thresholds) -> tuple[str, bool]:
    try:
        card = score_trial(spec, load_trajectory(path), th)
    except (OSError, SafeScoreError, ValueError) as exc:
        msg = exc.strerror if isinstance(exc, OSError) and exc.strerror else str(exc)
        return _fmt({"file": path, "error": f"{type(exc).__name__}: {msg}"}), False
    return _fmt(card.to_dict()), True


def score_lines(spec: TaskSpec, paths: list[str], th: Thresholds, parallelism: int = 1) -> list[tuple[str, bool]]:
    """One JSON line per trajectory, in input order whatever the parallelism."""
    if parallelism <= 1 or len(paths) <= 1:
        return [_score_one(spec, p, th) for p in paths]
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(_score_one, [spec] * len(paths), paths, [th] * len(paths), chunksize=4))


def cmd_score(args) -> int:
    try:
        cfg = _config(args)
    except (OSError, ValueError) as exc:
        _err(f"bad config: {exc}")
        return EXIT_IO
    try:
        spec = parse_task_spec(_read_text(args.spec))
    except OSError as exc:
        _err(f"cannot read {args.spec}: {exc.strerror}")
        return EXIT_IO
    except SpecError as exc:
        _err(f"{args.spec}: {exc}")
        return EXIT_FAIL
    lines = score_lines(spec, args.logs, cfg.thresholds, cfg.parallelism)
    for line, _ in lines:
        print(line)
    return EXIT_OK if all(ok for _, ok in lines) else EXIT_FAIL


# -- aggregate ---------------------------------------------------------------


def read_cards(paths) -> list[ScoreCard]:
    cards = []
    for path in paths:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                rec = json.loads(line)
                if "error" in rec:
                    continue
                try:
                    cards.append(ScoreCard.from_dict(rec))
                except (KeyError, TypeError, ValueError) as exc:
                    raise ValueError(f"{path}:{lineno}: not a score card ({exc})") from None
    return cards


def cmd_aggregate(args) -> int:
    try:
        cfg = _config(args)
    except (OSError, ValueError) as exc:
        _err(f"bad config: {exc}")
        return EXIT_IO
    try:
        cards = read_cards(args.cards)
    except OSError as exc:
        _err(f"cannot read input: {exc}")
        return EXIT_IO
    except ValueError as exc:
        _err(str(exc))
        return EXIT_FAIL
    if not cards:
        _err("no score cards found")
        return EXIT_FAIL
    try:
        summaries = analysis.aggregate_cards(cards)
    except AnalysisError as exc:
        _err(str(exc))
        return EXIT_FAIL
    if cfg.output_format == "csv":
        sys.stdout.write(analysis.format_report_csv(summaries))
    else:
        rows = [analysis.summary_to_dict(s) for s in summaries]
        avg = analysis.report_rows(summaries)[-1]
        average = dict(zip(analysis.REPORT_HEADER, avg))
        print(_fmt({"tasks": rows, "average": average}))
    if args.boxplot:
        try:
            Path(args.boxplot).write_text(_fmt(analysis.boxplot_data(summaries)) + "\n", encoding="utf-8")
        except OSError as exc:
            _err(f"cannot write {args.boxplot}: {exc.strerror}")
            return EXIT_IO
    return EXIT_OK


# -- diff --------------------------------------------------------------------


def cmd_diff(args) -> int:
    try:
        a = analysis.read_report_csv(_read_text(args.a))
        b = analysis.read_report_csv(_read_text(args.b))
    except (OSError, ValueError, KeyError) as exc:
        _err(f"cannot read reports: {exc}")
        return EXIT_IO
    try:
        gap = args.gap if args.gap is not None else _config(args).thresholds.diff_gap
        report = analysis.diff_runs(a, b, gap)
    except OSError as exc:
        _err(f"bad config: {exc}")
        return EXIT_IO
    except ValueError as exc:
        _err(str(exc))
        return EXIT_FAIL
    sys.stdout.write(analysis.format_diff_csv(report))
    for task_id in report.only_a:
        _err(f"task {task_id} only in {args.a}")
    for task_id in report.only_b:
        _err(f"task {task_id} only in {args.b}")
    return EXIT_OK


# -- tally -------------------------------------------------------------------


def cmd_tally(args) -> int:
    try:
        text = _read_text(args.annotations)
    except OSError as exc:
        _err(f"cannot read {args.annotations}: {exc.strerror}")
        return EXIT_IO
    try:
        annotations = analysis.read_annotations(text)
    except ValueError as exc:
        _err(f"{args.annotations}: {exc}")
        return EXIT_FAIL
    per_task, total = analysis.failure_tally(annotations)
    print(json.dumps({"per_task": per_task, "total": total}))
    return EXIT_OK


# -- synth -------------------------------------------------------------------


def cmd_synth(args) -> int:
    try:
        manifest = generate_corpus(args.seed, args.count, args.out)
    except OSError as exc:
        _err(f"cannot write corpus: {exc}")
        return EXIT_IO
    except ValueError as exc:
        _err(str(exc))
        return EXIT_FAIL
    print(manifest)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="safescore", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a task spec")
    p.add_argument("spec")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("score", help="score trajectory logs against a task spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--config", help="TOML config (default: $SAFESCORE_CONFIG)")
    p.add_argument("--parallelism", "-j", type=int)
    p.add_argument("logs", nargs="+")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("aggregate", help="per-task summary of score cards")
    p.add_argument("--config")
    p.add_argument("--format", choices=("json", "csv"))
    p.add_argument("--boxplot", help="also write box-plot JSON to this path")
    p.add_argument("cards", nargs="+")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("diff", help="compare mean Q per task between two aggregate reports")
    p.add_argument("--config")
    p.add_argument("--gap", type=float, help="flag gaps strictly above this (default 0.10)")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("tally", help="failure-category tallies from annotations CSV")
    p.add_argument("annotations")
    p.set_defaults(func=cmd_tally)

    p = sub.add_parser("synth", help="write a synthetic corpus with ground truth")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

"""Detector thresholds and batch run settings.

Every constant a detector or predicate depends on lives in :class:`Thresholds`
so a run can be audited (and overridden) from one TOML file::

    output_format = "csv"
    parallelism = 4

    [thresholds]
    tilt_deg = 30.0
    support_disp_m = 0.1
"""

from __future__ import annotations

import dataclasses
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

CONFIG_ENV = "SAFESCORE_CONFIG"

# Absorbs float round-off when a measured quantity sits exactly on a threshold.
# Comparisons are strict: value must exceed limit by more than this.
EPS = 1e-9


def exceeds(value: float, limit: float) -> bool:
    """Strict ``value > limit`` that treats round-off at the boundary as equal."""
    return value > limit + EPS


@dataclass(frozen=True)
class Thresholds:
    tilt_deg: float = 30.0
    support_disp_m: float = 0.10
    drop_fall_m: float = 0.10
    settle_s: float = 0.5
    mishandle_tilt_deg: float = 60.0
    impact_speed_mps: float = 1.0
    closed_jf: float = 0.05
    open_jf: float = 0.8
    ontop_gap_m: float = 0.015
    diff_gap: float = 0.10
    # geometric predicate tolerances
    inside_overlap: float = 0.5
    ontop_overlap: float = 0.25
    nextto_min_m: float = 0.3
    nextto_scale: float = 1.5

    def __post_init__(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise TypeError(f"threshold {f.name} must be a number, got {value!r}")
            if not value > 0:
                raise ValueError(f"threshold {f.name} must be positive, got {value!r}")
            object.__setattr__(self, f.name, float(value))
        if self.closed_jf >= self.open_jf:
            raise ValueError("closed_jf must be below open_jf")


OUTPUT_FORMATS = ("json", "csv")


@dataclass(frozen=True)
class RunConfig:
    thresholds: Thresholds = field(default_factory=Thresholds)
    output_format: str = "json"
    parallelism: int = 1

    def __post_init__(self):
        if self.output_format not in OUTPUT_FORMATS:
            raise ValueError(f"output_format must be one of {OUTPUT_FORMATS}, got {self.output_format!r}")
        if isinstance(self.parallelism, bool) or not isinstance(self.parallelism, int) or self.parallelism < 1:
            raise ValueError(f"parallelism must be a positive integer, got {self.parallelism!r}")

    @classmethod
    def from_mapping(cls, data: dict) -> RunConfig:
        data = dict(data)
        raw = data.pop("thresholds", {}) or {}
        known = {f.name for f in dataclasses.fields(Thresholds)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown threshold(s): {', '.join(sorted(unknown))}")
        extra = set(data) - {"output_format", "parallelism"}
        if extra:
            raise ValueError(f"unknown config key(s): {', '.join(sorted(extra))}")
        return cls(thresholds=Thresholds(**raw), **data)

    def dumps(self) -> str:
        lines = [
            f'output_format = "{self.output_format}"',
            f"parallelism = {self.parallelism}",
            "",
            "[thresholds]",
        ]
        for f in dataclasses.fields(Thresholds):
            lines.append(f"{f.name} = {getattr(self.thresholds, f.name)!r}")
        return "\n".join(lines) + "\n"


def loads_config(text: str) -> RunConfig:
    return RunConfig.from_mapping(tomllib.loads(text))


def load_config(path: str | os.PathLike | None = None) -> RunConfig:
    """Load a config file; falls back to ``$SAFESCORE_CONFIG`` and then to defaults."""
    if path is None:
        path = os.environ.get(CONFIG_ENV) or None
    if path is None:
        return RunConfig()
    return loads_config(Path(path).read_text(encoding="utf-8"))

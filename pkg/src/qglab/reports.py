"""Experiment configuration and machine-readable verification reports."""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field

import numpy
import scipy

SCHEMA_VERSION = 1

__all__ = ["ExperimentConfig", "CheckResult", "VerificationReport", "emit"]


@dataclass(frozen=True)
class ExperimentConfig:
    """One suite run: which checks, on which instance, at which tolerances.

    The seed drives every randomized probe, so replaying a config
    reproduces the report bit for bit.
    """

    suite: str
    instance: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    seed: int = 0
    out: str | None = None
    fmt: str = "json"
    parallel: bool = False

    @staticmethod
    def from_json(text: str) -> "ExperimentConfig":
        payload = json.loads(text)
        if "suite" not in payload or not payload["suite"]:
            raise ValueError("config needs a non-empty suite name")
        return ExperimentConfig(
            suite=str(payload["suite"]),
            instance=dict(payload.get("instance", {})),
            tolerances=dict(payload.get("tolerances", {})),
            seed=int(payload.get("seed", 0)),
            out=payload.get("out"),
            fmt=str(payload.get("format", "json")),
            parallel=bool(payload.get("parallel", False)),
        )

    def override(self, **kwargs) -> "ExperimentConfig":
        data = {
            "suite": self.suite,
            "instance": self.instance,
            "tolerances": self.tolerances,
            "seed": self.seed,
            "out": self.out,
            "fmt": self.fmt,
            "parallel": self.parallel,
        }
        for k, v in kwargs.items():
            if v is not None:
                data[k] = v
        return ExperimentConfig(**data)


@dataclass
class CheckResult:
    check_id: str
    anchor: str  # names the mathematical identity being measured
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.residual < self.tolerance

    def as_dict(self) -> dict:
        return {
            "check_id": self.check_id,
            "anchor": self.anchor,
            "residual": float(self.residual),
            "tolerance": float(self.tolerance),
            "pass": self.passed,
        }


@dataclass
class VerificationReport:
    suite: str
    instance: str
    checks: list
    wall_time_s: float = 0.0
    seed: int = 0

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def payload(self, include_volatile: bool = False) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "suite": self.suite,
            "instance": self.instance,
            "seed": self.seed,
            "checks": [c.as_dict() for c in self.checks],
            "pass": self.all_passed,
        }
        if include_volatile:
            out["wall_time_s"] = self.wall_time_s
            out["versions"] = {"numpy": numpy.__version__, "scipy": scipy.__version__}
        return out

    def to_json(self, include_volatile: bool = False) -> str:
        return json.dumps(self.payload(include_volatile), sort_keys=True, indent=1) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["suite", "instance", "check_id", "residual", "tolerance", "pass"])
        for c in self.checks:
            writer.writerow(
                [self.suite, self.instance, c.check_id, repr(float(c.residual)),
                 repr(float(c.tolerance)), c.passed]
            )
        return buf.getvalue()


def emit(report: VerificationReport, path, fmt: str = "json", include_volatile: bool = False) -> None:
    """Write a report; json is stable-ordered and, by default, omits wall
    time and library versions so identical runs emit identical bytes."""
    if fmt == "json":
        text = report.to_json(include_volatile)
    elif fmt == "csv":
        text = report.to_csv()
    else:
        raise ValueError(f"unknown report format: {fmt}")
    with open(path, "w") as fh:
        fh.write(text)

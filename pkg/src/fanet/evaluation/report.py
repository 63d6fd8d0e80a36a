"""Evaluation reports: protocol/metric/value rows plus the provenance to recompute them."""

from __future__ import annotations

import hashlib
import math
from collections.abc import Iterable
from enum import StrEnum
from pathlib import Path
from typing import Self

from pydantic import BaseModel, ConfigDict, model_validator

from fanet.config import Ablation, RunConfig, Stage
from fanet.exceptions import ProtocolError

_FROZEN = ConfigDict(frozen=True, extra="forbid")


class MetricKind(StrEnum):
    RATE = "rate"
    DECIBELS = "decibels"
    DISTANCE = "distance"
    COUNT = "count"


class ReportRow(BaseModel):
    model_config = _FROZEN

    metric: str
    value: float
    kind: MetricKind = MetricKind.RATE

    @model_validator(mode="after")
    def _check_value(self) -> Self:
        if not math.isfinite(self.value):
            raise ValueError(f"{self.metric} is not finite: {self.value}")
        if self.kind is MetricKind.RATE and not 0.0 <= self.value <= 1.0:
            raise ValueError(f"rate {self.metric} must lie in [0, 1], got {self.value}")
        return self


class Provenance(BaseModel):
    """What a report was computed from."""

    model_config = _FROZEN

    config_sha256: str
    checkpoint_sha256: str
    checkpoint_stage: Stage
    checkpoint_step: int
    checkpoint_ablation: Ablation | None = None
    seed: int


class EvalReport(BaseModel):
    model_config = _FROZEN

    protocol: str
    rows: tuple[ReportRow, ...]
    provenance: Provenance

    def value(self, metric: str) -> float:
        for row in self.rows:
            if row.metric == metric:
                return row.value
        raise ProtocolError(
            f"report {self.protocol} has no metric {metric!r}",
            metrics=[row.metric for row in self.rows],
        )

    @property
    def metrics(self) -> dict[str, float]:
        return {row.metric: row.value for row in self.rows}

    @property
    def label(self) -> str:
        """The protocol, tagged with the ablation of the checkpoint it scored."""
        ablation = self.provenance.checkpoint_ablation
        return self.protocol if ablation is None else f"{self.protocol}[{ablation}]"


def config_fingerprint(cfg: RunConfig) -> str:
    return hashlib.sha256(cfg.model_dump_json().encode()).hexdigest()


def file_fingerprint(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        for block in iter(lambda: handle.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def save_report(report: EvalReport, directory: Path) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{report.label}.json"
    path.write_text(report.model_dump_json(indent=2) + "\n")
    return path


def load_reports(directory: Path) -> list[EvalReport]:
    """Every report in ``directory``, ordered by label."""
    if not directory.is_dir():
        return []
    return [
        EvalReport.model_validate_json(path.read_text())
        for path in sorted(directory.glob("*.json"))
    ]


def format_reports(reports: Iterable[EvalReport]) -> str:
    """One ``protocol  metric  value`` line per row, columns aligned.

    >>> row = ReportRow(metric="enc_l.accuracy", value=0.8125)
    >>> prov = Provenance(
    ...     config_sha256="c", checkpoint_sha256="k", checkpoint_stage="2",
    ...     checkpoint_step=3, seed=0,
    ... )
    >>> print(format_reports([EvalReport(protocol="verify-rsa", rows=(row,), provenance=prov)]))
    protocol    metric          value
    verify-rsa  enc_l.accuracy  0.8125
    """
    lines = [("protocol", "metric", "value")]
    for report in reports:
        lines.extend((report.label, row.metric, f"{row.value:.4f}") for row in report.rows)
    widths = [max(len(line[column]) for line in lines) for column in range(2)]
    return "\n".join(
        f"{protocol:<{widths[0]}}  {metric:<{widths[1]}}  {value}"
        for protocol, metric, value in lines
    )

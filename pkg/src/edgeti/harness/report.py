"""Metrics reports: values measured from a scenario run, plus renderers.

The structured form is canonical JSON (sorted keys, two-space indent) and
round-trips losslessly; the text form is a human-readable table with one
row per attack.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any

from edgeti.errors import ParameterError


@dataclass(frozen=True)
class AttackOutcome:
    kind: str
    target: str
    start_tick: int
    duration: int
    detection_latency_ticks: int | None
    containment_ticks: int | None

    def __post_init__(self) -> None:
        for name in ("detection_latency_ticks", "containment_ticks"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ParameterError(f"{name} must be >= 0 when present")


@dataclass(frozen=True)
class MetricsReport:
    seed: int
    ticks: int
    device_count: int
    attacks: tuple[AttackOutcome, ...]
    false_positive_alerts: int
    blocked_message_count: int
    admin_notifications: int
    transcript_digest: str


def report_to_dict(report: MetricsReport) -> dict[str, Any]:
    return {
        "seed": report.seed,
        "ticks": report.ticks,
        "device_count": report.device_count,
        "attacks": [
            {
                "kind": a.kind,
                "target": a.target,
                "start_tick": a.start_tick,
                "duration": a.duration,
                "detection_latency_ticks": a.detection_latency_ticks,
                "containment_ticks": a.containment_ticks,
            }
            for a in report.attacks
        ],
        "false_positive_alerts": report.false_positive_alerts,
        "blocked_message_count": report.blocked_message_count,
        "admin_notifications": report.admin_notifications,
        "transcript_digest": report.transcript_digest,
    }


def report_from_dict(doc: dict[str, Any]) -> MetricsReport:
    try:
        return MetricsReport(
            seed=int(doc["seed"]),
            ticks=int(doc["ticks"]),
            device_count=int(doc["device_count"]),
            attacks=tuple(
                AttackOutcome(
                    kind=str(a["kind"]),
                    target=str(a["target"]),
                    start_tick=int(a["start_tick"]),
                    duration=int(a["duration"]),
                    detection_latency_ticks=(
                        None
                        if a["detection_latency_ticks"] is None
                        else int(a["detection_latency_ticks"])
                    ),
                    containment_ticks=(
                        None
                        if a["containment_ticks"] is None
                        else int(a["containment_ticks"])
                    ),
                )
                for a in doc["attacks"]
            ),
            false_positive_alerts=int(doc["false_positive_alerts"]),
            blocked_message_count=int(doc["blocked_message_count"]),
            admin_notifications=int(doc["admin_notifications"]),
            transcript_digest=str(doc["transcript_digest"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParameterError(f"bad report document: {exc}") from None


def format_structured_report(doc: dict[str, Any]) -> str:
    """Canonical structured rendering; byte-identical for equal reports."""
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _cell(value: int | None) -> str:
    return "n/a" if value is None else str(value)


def render_report(report: MetricsReport, format: str = "text") -> str:
    if format == "structured":
        return format_structured_report(report_to_dict(report))
    if format != "text":
        raise ParameterError(f"unknown report format {format!r}")
    lines = [
        f"scenario: seed={report.seed} ticks={report.ticks} devices={report.device_count}",
        "",
    ]
    if report.attacks:
        header = f"{'attack':<14}{'target':<20}{'start':>6}{'detect':>8}{'contain':>9}"
        lines.append(header)
        lines.append("-" * len(header))
        for a in report.attacks:
            lines.append(
                f"{a.kind:<14}{a.target:<20}{a.start_tick:>6}"
                f"{_cell(a.detection_latency_ticks):>8}{_cell(a.containment_ticks):>9}"
            )
    else:
        lines.append("no attacks in scenario")
    lines.extend(
        [
            "",
            f"false positive alerts: {report.false_positive_alerts}",
            f"blocked messages:      {report.blocked_message_count}",
            f"admin notifications:   {report.admin_notifications}",
            f"transcript digest:     {report.transcript_digest}",
            "",
        ]
    )
    return "\n".join(lines)


def render_transcript_text(entries) -> str:
    """Replay rendering of an exported delivery transcript."""
    header = f"{'tick':>6}  {'topic':<34}{'sender':<22}{'subscriber':<22}msg_id"
    lines = [header, "-" * len(header)]
    for e in entries:
        lines.append(
            f"{e.tick:>6}  {e.topic:<34}{e.sender:<22}{e.subscriber:<22}{e.msg_id}"
        )
    lines.append(f"total deliveries: {len(entries)}")
    return "\n".join(lines) + "\n"

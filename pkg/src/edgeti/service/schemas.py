"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class SimulationRequest(BaseModel):
    scenario: dict[str, Any]
    seed: Optional[int] = Field(
        default=None, description="Overrides the scenario document's seed"
    )
    include_text: bool = Field(
        default=False, description="Also return the human-readable report table"
    )
    include_transcript: bool = Field(
        default=False, description="Also return the delivery transcript (JSONL)"
    )


class AttackOutcomeModel(BaseModel):
    kind: str
    target: str
    start_tick: int
    duration: int
    detection_latency_ticks: Optional[int]
    containment_ticks: Optional[int]


class MetricsReportModel(BaseModel):
    seed: int
    ticks: int
    device_count: int
    attacks: list[AttackOutcomeModel]
    false_positive_alerts: int
    blocked_message_count: int
    admin_notifications: int
    transcript_digest: str


class SimulationResponse(BaseModel):
    report: MetricsReportModel
    text: Optional[str] = None
    transcript: Optional[str] = None


class ValidateRequest(BaseModel):
    scenario: dict[str, Any]


class ValidateResponse(BaseModel):
    valid: bool
    errors: list[str]


class ReplayRequest(BaseModel):
    transcript: str


class ReplayResponse(BaseModel):
    text: str
    deliveries: int

"""Core value types, severity grading, wire codec, and message authentication."""

from edgeti.domain.codec import (
    DEFAULT_SEVERITY_TAU,
    WIRE_SCHEMA_VERSION,
    decode,
    decode_envelope,
    encode,
    encode_envelope,
)
from edgeti.domain.signing import KeyRing, derive_key, sign, verify
from edgeti.domain.types import (
    AnomalyAlert,
    Classification,
    DeviceId,
    DirectiveAction,
    Event,
    EventKind,
    FlowRecord,
    Heartbeat,
    LogFacility,
    LogRecord,
    Message,
    QuarantineDirective,
    Severity,
    SignedEnvelope,
    ThreatVerdict,
    severity_from_score,
)

__all__ = [
    "AnomalyAlert",
    "Classification",
    "DEFAULT_SEVERITY_TAU",
    "DeviceId",
    "DirectiveAction",
    "Event",
    "EventKind",
    "FlowRecord",
    "Heartbeat",
    "KeyRing",
    "LogFacility",
    "LogRecord",
    "Message",
    "QuarantineDirective",
    "Severity",
    "SignedEnvelope",
    "ThreatVerdict",
    "WIRE_SCHEMA_VERSION",
    "decode",
    "decode_envelope",
    "derive_key",
    "encode",
    "encode_envelope",
    "severity_from_score",
    "sign",
    "verify",
]

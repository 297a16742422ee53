"""Core value types shared by every component of the fabric.

Everything here is an immutable value: safe to copy, hash (where it makes
sense), and hand across component boundaries. Constructors validate their
own invariants and raise :class:`~edgeti.errors.ParameterError` on bad input.
"""

from __future__ import annotations

import math
import re
import uuid as uuidlib
from dataclasses import dataclass, field
from enum import Enum, IntEnum

from edgeti.errors import ParameterError

_SITE_RE = re.compile(r"^[a-z0-9-]{1,32}$")
_NAME_RE = re.compile(r"^[a-z0-9-]{1,64}$")

MAX_LOG_MESSAGE_BYTES = 4096


@dataclass(frozen=True, order=True)
class DeviceId:
    """Identity of one edge device, rendered as ``site/name``."""

    site: str
    name: str

    def __post_init__(self) -> None:
        if not _SITE_RE.match(self.site):
            raise ParameterError(f"bad device site {self.site!r}")
        if not _NAME_RE.match(self.name):
            raise ParameterError(f"bad device name {self.name!r}")

    @classmethod
    def parse(cls, rendered: str) -> "DeviceId":
        site, sep, name = rendered.partition("/")
        if not sep:
            raise ParameterError(f"device id {rendered!r} is not of the form site/name")
        return cls(site, name)

    def __str__(self) -> str:
        return f"{self.site}/{self.name}"


class Severity(IntEnum):
    """Alert severity, totally ordered Low < Medium < High < Critical."""

    LOW = 0
    MEDIUM = 1
    HIGH = 2
    CRITICAL = 3

    @property
    def label(self) -> str:
        return self.name.capitalize()

    @classmethod
    def from_label(cls, label: str) -> "Severity":
        try:
            return cls[label.upper()]
        except KeyError:
            raise ParameterError(f"unknown severity {label!r}") from None


def severity_from_score(score: float, tau: float) -> Severity:
    """Grade an anomaly score into a severity band.

    Bands: [0, tau) Low, [tau, 1.5 tau) Medium, [1.5 tau, 2 tau) High,
    [2 tau, inf) Critical. Boundary values land in the higher band.
    """
    if not (isinstance(tau, (int, float)) and math.isfinite(tau) and tau > 0):
        raise ParameterError(f"tau must be finite and > 0, got {tau!r}")
    if not (math.isfinite(score) and score >= 0):
        raise ParameterError(f"score must be finite and >= 0, got {score!r}")
    if score >= 2.0 * tau:
        return Severity.CRITICAL
    if score >= 1.5 * tau:
        return Severity.HIGH
    if score >= tau:
        return Severity.MEDIUM
    return Severity.LOW


class EventKind(Enum):
    FLOW = "Flow"
    LOG = "Log"


class LogFacility(Enum):
    AUTH = "Auth"
    CONFIG = "Config"
    PROCESS = "Process"
    OTHER = "Other"


@dataclass(frozen=True)
class FlowRecord:
    """One observed network flow summary."""

    dst_port: int
    packets: int
    bytes_out: int
    syn_failed: bool = False

    def __post_init__(self) -> None:
        if not 0 <= self.dst_port <= 65535:
            raise ParameterError(f"dst_port {self.dst_port} out of range")
        if self.packets < 0:
            raise ParameterError("packets must be >= 0")
        if self.bytes_out < 0:
            raise ParameterError("bytes_out must be >= 0")


@dataclass(frozen=True)
class LogRecord:
    """One observed system-log line, reduced to what the detector consumes."""

    facility: LogFacility
    message: str
    is_failure: bool = False

    def __post_init__(self) -> None:
        if len(self.message.encode("utf-8")) > MAX_LOG_MESSAGE_BYTES:
            raise ParameterError("log message exceeds 4096 bytes")


@dataclass(frozen=True)
class Event:
    """One observed unit on a device: exactly one of flow or log."""

    device: DeviceId
    tick: int
    kind: EventKind
    flow: FlowRecord | None = None
    log: LogRecord | None = None

    def __post_init__(self) -> None:
        if self.tick < 0:
            raise ParameterError("event tick must be >= 0")
        if self.kind is EventKind.FLOW and (self.flow is None or self.log is not None):
            raise ParameterError("Flow event must carry flow and no log")
        if self.kind is EventKind.LOG and (self.log is None or self.flow is not None):
            raise ParameterError("Log event must carry log and no flow")

    @classmethod
    def of_flow(cls, device: DeviceId, tick: int, flow: FlowRecord) -> "Event":
        return cls(device, tick, EventKind.FLOW, flow=flow)

    @classmethod
    def of_log(cls, device: DeviceId, tick: int, log: LogRecord) -> "Event":
        return cls(device, tick, EventKind.LOG, log=log)


def _check_finite(value: float, what: str) -> None:
    if not (isinstance(value, (int, float)) and math.isfinite(value)):
        raise ParameterError(f"{what} must be a finite number, got {value!r}")


@dataclass(frozen=True)
class AnomalyAlert:
    """A device's report of suspicious activity, with scoring meta-information."""

    id: uuidlib.UUID
    device: DeviceId
    tick: int
    severity: Severity
    score: float
    top_feature: str
    feature_snapshot: dict[str, float] = field(default_factory=dict)
    signature_hits: tuple[str, ...] = ()
    location: str = ""
    schema_version: int = 1

    def __post_init__(self) -> None:
        if self.tick < 0:
            raise ParameterError("alert tick must be >= 0")
        _check_finite(self.score, "alert score")
        if self.score < 0:
            raise ParameterError("alert score must be >= 0")
        for name, value in self.feature_snapshot.items():
            _check_finite(value, f"feature {name}")
        object.__setattr__(self, "signature_hits", tuple(self.signature_hits))


class DirectiveAction(Enum):
    QUARANTINE = "Quarantine"
    REINSTATE = "Reinstate"


@dataclass(frozen=True)
class QuarantineDirective:
    """Coordinator broadcast ordering peers to block or reinstate a device."""

    id: uuidlib.UUID
    action: DirectiveAction
    target: DeviceId
    reason: str
    issued_tick: int
    schema_version: int = 1

    def __post_init__(self) -> None:
        if self.action is DirectiveAction.QUARANTINE and not self.reason:
            raise ParameterError("quarantine directive requires a reason")
        if self.issued_tick < 0:
            raise ParameterError("issued_tick must be >= 0")


class Classification(Enum):
    MALICIOUS = "Malicious"
    BENIGN = "Benign"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class ThreatVerdict:
    """Structured judgment for one incident: what it is and what to do."""

    incident_id: uuidlib.UUID
    classification: Classification
    threat_type: str
    vulnerability: str
    mitigation: str
    confidence: float

    def __post_init__(self) -> None:
        _check_finite(self.confidence, "confidence")
        if not 0.0 <= self.confidence <= 1.0:
            raise ParameterError(f"confidence {self.confidence} outside [0, 1]")
        if self.classification is Classification.MALICIOUS and not self.threat_type:
            raise ParameterError("malicious verdict requires a threat_type")


@dataclass(frozen=True)
class Heartbeat:
    """Periodic liveness report from an agent."""

    device: DeviceId
    tick: int
    windows_processed: int
    alerts_emitted: int
    schema_version: int = 1

    def __post_init__(self) -> None:
        if self.tick < 0:
            raise ParameterError("heartbeat tick must be >= 0")
        if self.windows_processed < 0 or self.alerts_emitted < 0:
            raise ParameterError("heartbeat counters must be >= 0")


@dataclass(frozen=True)
class SignedEnvelope:
    """A wire payload plus its sender identity and HMAC-SHA256 tag."""

    payload: bytes
    sender: DeviceId
    sig: bytes

    def __post_init__(self) -> None:
        if len(self.sig) != 32:
            raise ParameterError("envelope sig must be 32 bytes")


Message = AnomalyAlert | QuarantineDirective | Heartbeat | ThreatVerdict

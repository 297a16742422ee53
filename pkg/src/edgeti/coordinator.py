"""Edge-server brain: device registry, per-device triage state machine,
quarantine decisions, admin notifications, and the interval-batched
consult queue for unknown threats.

The transition function is pure and total; the runtime around it verifies
envelopes, deduplicates alert ids, executes effects (directives,
notifications, incident bookkeeping), and drives consults through a
pluggable provider.
"""

from __future__ import annotations

import json
import uuid as uuidlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from edgeti.errors import ParameterError, RegistrationError, StateError
from edgeti.domain.codec import decode, encode
from edgeti.domain.signing import KeyRing
from edgeti.domain.types import (
    AnomalyAlert,
    Classification,
    DeviceId,
    DirectiveAction,
    Heartbeat,
    QuarantineDirective,
    Severity,
    ThreatVerdict,
)
from edgeti.intel import (
    ExemplarStore,
    Incident,
    IncidentStatus,
    PromptDoc,
    add_exemplar,
    build_prompt,
    consult,
)
from edgeti.transport import (
    DedupWindow,
    Delivery,
    OutboundMessage,
    QoS,
    SimBroker,
    directive_topic,
    verdict_topic,
)

# ---- triage states and inputs ---------------------------------------------


@dataclass(frozen=True)
class Active:
    pass


@dataclass(frozen=True)
class Suspect:
    since_tick: int
    alert_count: int


@dataclass(frozen=True)
class Quarantined:
    since_tick: int
    reason: str


@dataclass(frozen=True)
class Reinstating:
    clean_heartbeats: int


TriageState = Active | Suspect | Quarantined | Reinstating


@dataclass(frozen=True)
class AlertReceived:
    severity: Severity
    known: bool


@dataclass(frozen=True)
class VerdictReceived:
    classification: Classification
    threat_type: str = ""


@dataclass(frozen=True)
class SuspectTimeout:
    pass


@dataclass(frozen=True)
class AdminReinstate:
    pass


@dataclass(frozen=True)
class CleanHeartbeat:
    pass


@dataclass(frozen=True)
class DirtyHeartbeatGap:
    pass


TriageInput = (
    AlertReceived
    | VerdictReceived
    | SuspectTimeout
    | AdminReinstate
    | CleanHeartbeat
    | DirtyHeartbeatGap
)


class EffectKind:
    LOG_ONLY = "log_only"
    NOTIFY_ADMIN = "notify_admin"
    ENQUEUE_INCIDENT = "enqueue_incident"
    ISSUE_QUARANTINE = "issue_quarantine"
    ISSUE_REINSTATE = "issue_reinstate"
    ISSUE_REINSTATE_PROBE = "issue_reinstate_probe"
    RESOLVE_INCIDENT = "resolve_incident"
    KEEP_PENDING = "keep_pending"


@dataclass(frozen=True)
class Effect:
    kind: str
    detail: str = ""


@dataclass(frozen=True)
class CoordinatorConfig:
    alerts_to_quarantine: int = 3
    suspect_window_ticks: int = 60
    clean_heartbeats_required: int = 10
    consult_interval_ticks: int = 30
    heartbeat_interval: int = 10
    auto_register: bool = True
    alert_log_limit: int = 64

    def __post_init__(self) -> None:
        for name in (
            "alerts_to_quarantine",
            "suspect_window_ticks",
            "clean_heartbeats_required",
            "consult_interval_ticks",
            "heartbeat_interval",
            "alert_log_limit",
        ):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be >= 1")


REASON_CRITICAL = "critical alert"
REASON_REPEATED = "repeated alerts"
REASON_RELAPSE = "relapse"


def triage_transition(
    state: TriageState, event: TriageInput, tick: int, config: CoordinatorConfig
) -> tuple[TriageState, tuple[Effect, ...]]:
    """Pure, total transition function of the per-device triage machine.

    Any (state, input) pair without an explicit rule leaves the state
    unchanged with no effects. A suspect burst whose window expired
    re-anchors at the new alert instead of counting into the stale window.
    """
    if isinstance(event, AlertReceived):
        severity = event.severity
        if isinstance(state, Active):
            if severity is Severity.LOW:
                return state, (Effect(EffectKind.LOG_ONLY),)
            if severity is Severity.CRITICAL:
                return (
                    Quarantined(tick, REASON_CRITICAL),
                    (
                        Effect(EffectKind.ISSUE_QUARANTINE, REASON_CRITICAL),
                        Effect(EffectKind.NOTIFY_ADMIN, "critical alert"),
                    ),
                )
            effects = [Effect(EffectKind.NOTIFY_ADMIN, "suspect")]
            if not event.known:
                effects.append(Effect(EffectKind.ENQUEUE_INCIDENT))
            return Suspect(tick, 1), tuple(effects)
        if isinstance(state, Suspect) and severity >= Severity.MEDIUM:
            if tick - state.since_tick > config.suspect_window_ticks:
                effects = [Effect(EffectKind.NOTIFY_ADMIN, "suspect")]
                if not event.known:
                    effects.append(Effect(EffectKind.ENQUEUE_INCIDENT))
                return Suspect(tick, 1), tuple(effects)
            count = state.alert_count + 1
            if count >= config.alerts_to_quarantine:
                return (
                    Quarantined(tick, REASON_REPEATED),
                    (
                        Effect(EffectKind.ISSUE_QUARANTINE, REASON_REPEATED),
                        Effect(EffectKind.NOTIFY_ADMIN, "repeated alerts"),
                    ),
                )
            effects = ()
            if not event.known:
                effects = (Effect(EffectKind.ENQUEUE_INCIDENT),)
            return Suspect(state.since_tick, count), effects
        if isinstance(state, Reinstating) and severity >= Severity.MEDIUM:
            return (
                Quarantined(tick, REASON_RELAPSE),
                (
                    Effect(EffectKind.ISSUE_QUARANTINE, REASON_RELAPSE),
                    Effect(EffectKind.NOTIFY_ADMIN, "relapse during reinstatement"),
                ),
            )
        return state, ()

    if isinstance(event, VerdictReceived) and isinstance(state, Suspect):
        if event.classification is Classification.MALICIOUS:
            reason = event.threat_type or "malicious verdict"
            return (
                Quarantined(tick, reason),
                (
                    Effect(EffectKind.ISSUE_QUARANTINE, reason),
                    Effect(EffectKind.NOTIFY_ADMIN, f"malicious verdict: {reason}"),
                ),
            )
        if event.classification is Classification.BENIGN:
            return Active(), (Effect(EffectKind.RESOLVE_INCIDENT),)
        return state, (Effect(EffectKind.KEEP_PENDING),)

    if isinstance(event, SuspectTimeout) and isinstance(state, Suspect):
        return Active(), (Effect(EffectKind.RESOLVE_INCIDENT),)

    if isinstance(event, AdminReinstate) and isinstance(state, Quarantined):
        return Reinstating(0), (Effect(EffectKind.ISSUE_REINSTATE_PROBE),)

    if isinstance(event, CleanHeartbeat) and isinstance(state, Reinstating):
        count = state.clean_heartbeats + 1
        if count >= config.clean_heartbeats_required:
            return (
                Active(),
                (
                    Effect(EffectKind.ISSUE_REINSTATE),
                    Effect(EffectKind.NOTIFY_ADMIN, "reinstated after clean streak"),
                ),
            )
        return Reinstating(count), ()

    return state, ()


# ---- runtime ---------------------------------------------------------------


@dataclass
class DeviceRecord:
    device: DeviceId
    state: TriageState
    key_ref: str
    last_heartbeat_tick: int | None = None
    last_alert_tick: int | None = None
    alert_log: list[AnomalyAlert] = field(default_factory=list)


@dataclass(frozen=True)
class Notification:
    tick: int
    device: str
    event: str
    detail: str

    def as_dict(self) -> dict[str, Any]:
        return {
            "tick": self.tick,
            "device": self.device,
            "event": self.event,
            "detail": self.detail,
        }


class NotificationSink:
    """Append-only admin notification log, optionally mirrored to a JSONL
    file and a fire-and-forget webhook."""

    def __init__(self, path: str | Path | None = None, webhook=None) -> None:
        self.entries: list[Notification] = []
        self.path = Path(path) if path else None
        self.webhook = webhook

    def notify(self, notification: Notification) -> None:
        self.entries.append(notification)
        if self.path is not None:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(notification.as_dict(), sort_keys=True) + "\n")
        if self.webhook is not None:
            try:
                self.webhook(notification.as_dict())
            except Exception:
                pass


def make_webhook_poster(url: str, timeout_s: float = 2.0, client=None):
    """POST each notification document to a URL; delivery failures are
    swallowed so notification can never stall triage."""
    import httpx

    if client is None:
        client = httpx.Client(timeout=timeout_s)

    def post(doc: dict[str, Any]) -> None:
        try:
            client.post(url, json=doc)
        except httpx.HTTPError:
            pass

    return post


@dataclass(frozen=True)
class ConsultRequest:
    incident_id: uuidlib.UUID
    device: DeviceId
    prompt: PromptDoc


class EdgeCoordinator:
    """Coordinator runtime for one site."""

    def __init__(
        self,
        site: str,
        keyring: KeyRing,
        bus: SimBroker,
        config: CoordinatorConfig | None = None,
        provider=None,
        inventory_digest: str = "",
        exemplar_store: ExemplarStore | None = None,
        notifications: NotificationSink | None = None,
        uuid_source=None,
        severity_tau: float = 4.0,
    ) -> None:
        self.site = site
        self.identity = DeviceId(site, "coordinator")
        self.keyring = keyring
        self.bus = bus
        self.config = config or CoordinatorConfig()
        self.severity_tau = severity_tau
        self.provider = provider
        self.inventory_digest = inventory_digest
        self.store = exemplar_store or ExemplarStore()
        self.notifications = notifications or NotificationSink()
        self.uuid_source = uuid_source or uuidlib.uuid4
        self.registry: dict[DeviceId, DeviceRecord] = {}
        self.incidents: dict[uuidlib.UUID, Incident] = {}
        self._pending_by_device: dict[DeviceId, uuidlib.UUID] = {}
        self.in_flight: set[DeviceId] = set()
        self.seen_alert_ids = DedupWindow()
        self.rejects: dict[str, int] = {}
        self.unknown_verdicts = 0
        self.directives_issued: list[QuarantineDirective] = []
        self.now = 0

    # ---- registry ----------------------------------------------------------

    def register_device(self, device: DeviceId, key_ref: str = "") -> DeviceRecord:
        if device in self.registry:
            raise RegistrationError(f"device {device} already registered")
        record = DeviceRecord(device=device, state=Active(), key_ref=key_ref or str(device))
        self.registry[device] = record
        return record

    def _record_for(self, device: DeviceId) -> DeviceRecord | None:
        record = self.registry.get(device)
        if record is None and self.config.auto_register:
            record = self.register_device(device)
        return record

    def _reject(self, reason: str) -> None:
        self.rejects[reason] = self.rejects.get(reason, 0) + 1

    # ---- effect execution --------------------------------------------------

    def _publish_signed(self, payload: bytes, topic, qos: QoS) -> OutboundMessage:
        envelope = self.keyring.sign_as(self.identity, payload)
        message = OutboundMessage(
            topic=topic, envelope=envelope, qos=qos, msg_id=self.uuid_source()
        )
        self.bus.publish(message)
        return message

    def _issue_directive(self, action: DirectiveAction, target: DeviceId, reason: str, tick: int) -> None:
        directive = QuarantineDirective(
            id=self.uuid_source(),
            action=action,
            target=target,
            reason=reason,
            issued_tick=tick,
        )
        self.directives_issued.append(directive)
        self._publish_signed(
            encode(directive), directive_topic(self.site), QoS.AT_LEAST_ONCE
        )

    def _apply_effects(
        self,
        record: DeviceRecord,
        effects: tuple[Effect, ...],
        tick: int,
        alert: AnomalyAlert | None = None,
    ) -> None:
        for effect in effects:
            kind = effect.kind
            if kind == EffectKind.ISSUE_QUARANTINE:
                self._issue_directive(
                    DirectiveAction.QUARANTINE, record.device, effect.detail or "quarantine", tick
                )
            elif kind == EffectKind.ISSUE_REINSTATE:
                self._issue_directive(
                    DirectiveAction.REINSTATE, record.device, "clean heartbeat streak", tick
                )
            elif kind == EffectKind.NOTIFY_ADMIN:
                self.notifications.notify(
                    Notification(tick, str(record.device), "triage", effect.detail)
                )
            elif kind == EffectKind.ISSUE_REINSTATE_PROBE:
                self.notifications.notify(
                    Notification(tick, str(record.device), "reinstate_probe", "")
                )
            elif kind == EffectKind.ENQUEUE_INCIDENT and alert is not None:
                self._enqueue_incident(record.device, alert, tick)
            elif kind == EffectKind.RESOLVE_INCIDENT:
                self._resolve_incident(record.device)

    def _enqueue_incident(self, device: DeviceId, alert: AnomalyAlert, tick: int) -> None:
        incident_id = self._pending_by_device.get(device)
        incident = self.incidents.get(incident_id) if incident_id else None
        if incident is None or incident.status is not IncidentStatus.PENDING_CONSULT:
            incident = Incident(
                incident_id=self.uuid_source(),
                device=device,
                alerts=[alert],
                first_tick=tick,
                status=IncidentStatus.PENDING_CONSULT,
            )
            self.incidents[incident.incident_id] = incident
            self._pending_by_device[device] = incident.incident_id
        else:
            incident.alerts.append(alert)

    def _resolve_incident(self, device: DeviceId) -> None:
        incident_id = self._pending_by_device.pop(device, None)
        if incident_id is not None:
            self.incidents[incident_id].status = IncidentStatus.RESOLVED
        self.in_flight.discard(device)

    def _run_fsm(
        self,
        record: DeviceRecord,
        event: TriageInput,
        tick: int,
        alert: AnomalyAlert | None = None,
    ) -> tuple[Effect, ...]:
        record.state, effects = triage_transition(record.state, event, tick, self.config)
        self._apply_effects(record, effects, tick, alert)
        return effects

    # ---- message handling ----------------------------------------------------

    def handle_delivery(self, delivery: Delivery, tick: int) -> None:
        self.now = tick
        topic = delivery.topic
        if len(topic.segments) >= 4 and topic.segments[3] == "alert":
            self.handle_alert(delivery.envelope, tick)
        elif len(topic.segments) >= 4 and topic.segments[3] == "heartbeat":
            self.handle_heartbeat(delivery.envelope, tick)

    def handle_alert(self, envelope, tick: int | None = None) -> tuple[Effect, ...]:
        """Verify, decode, deduplicate, and triage one alert envelope."""
        tick = self.now if tick is None else tick
        if not self.keyring.verify_envelope(envelope):
            self._reject("bad_sig")
            return ()
        try:
            alert = decode(envelope.payload, tau=self.severity_tau)
        except Exception:
            self._reject("malformed")
            return ()
        if not isinstance(alert, AnomalyAlert):
            self._reject("wrong_type")
            return ()
        if alert.device != envelope.sender:
            self._reject("sender_mismatch")
            return ()
        if not self.seen_alert_ids.accept(alert.id):
            return ()
        record = self._record_for(alert.device)
        if record is None:
            self._reject("unknown_device")
            return ()
        record.alert_log.append(alert)
        del record.alert_log[: -self.config.alert_log_limit]
        record.last_alert_tick = tick
        known = bool(alert.signature_hits)
        return self._run_fsm(
            record, AlertReceived(alert.severity, known), tick, alert=alert
        )

    def handle_heartbeat(self, envelope, tick: int | None = None) -> None:
        tick = self.now if tick is None else tick
        if not self.keyring.verify_envelope(envelope):
            self._reject("bad_sig")
            return
        try:
            beat = decode(envelope.payload)
        except Exception:
            self._reject("malformed")
            return
        if not isinstance(beat, Heartbeat) or beat.device != envelope.sender:
            self._reject("wrong_type")
            return
        record = self._record_for(beat.device)
        if record is None:
            self._reject("unknown_device")
            return
        previous = record.last_heartbeat_tick
        record.last_heartbeat_tick = beat.tick
        if isinstance(record.state, Reinstating):
            gap = None if previous is None else beat.tick - previous
            if gap is not None and gap > self.config.heartbeat_interval:
                self._run_fsm(record, DirtyHeartbeatGap(), tick)
            else:
                self._run_fsm(record, CleanHeartbeat(), tick)

    def on_tick(self, tick: int) -> None:
        """Clock sweep: expire suspect windows with no recent alerts."""
        self.now = tick
        for record in self.registry.values():
            if (
                isinstance(record.state, Suspect)
                and record.last_alert_tick is not None
                and tick - record.last_alert_tick >= self.config.suspect_window_ticks
            ):
                self._run_fsm(record, SuspectTimeout(), tick)

    # ---- consult loop ----------------------------------------------------------

    def flush_llm_queue(self, tick: int) -> list[ConsultRequest]:
        """Hand every pending, not-in-flight incident to the provider at
        each flush boundary; verdicts are applied as they return."""
        self.now = tick
        if tick % self.config.consult_interval_ticks != 0:
            return []
        requests: list[ConsultRequest] = []
        for device, incident_id in list(self._pending_by_device.items()):
            incident = self.incidents[incident_id]
            if incident.status is not IncidentStatus.PENDING_CONSULT:
                continue
            if device in self.in_flight:
                continue
            prompt = build_prompt(self.store, incident, self.inventory_digest)
            self.in_flight.add(device)
            requests.append(ConsultRequest(incident.incident_id, device, prompt))
        if self.provider is not None:
            for request in requests:
                incident = self.incidents[request.incident_id]
                verdict = consult(self.provider, request.prompt, incident)
                self.in_flight.discard(request.device)
                self.apply_verdict(verdict)
        return requests

    def apply_verdict(self, verdict: ThreatVerdict) -> tuple[Effect, ...]:
        incident = self.incidents.get(verdict.incident_id)
        if incident is None:
            self.unknown_verdicts += 1
            return ()
        record = self._record_for(incident.device)
        if record is None:
            self.unknown_verdicts += 1
            return ()
        self.in_flight.discard(incident.device)
        effects = self._run_fsm(
            record,
            VerdictReceived(verdict.classification, verdict.threat_type),
            self.now,
        )
        if verdict.classification is Classification.MALICIOUS:
            add_exemplar(self.store, incident, verdict, self.now)
        if verdict.classification is not Classification.UNKNOWN:
            incident.status = IncidentStatus.RESOLVED
            if self._pending_by_device.get(incident.device) == incident.incident_id:
                del self._pending_by_device[incident.device]
        self._publish_signed(encode(verdict), verdict_topic(self.site), QoS.AT_LEAST_ONCE)
        return effects

    def admin_reinstate(self, device: DeviceId, tick: int) -> tuple[Effect, ...]:
        record = self.registry.get(device)
        if record is None or not isinstance(record.state, Quarantined):
            raise StateError(f"device {device} is not quarantined")
        return self._run_fsm(record, AdminReinstate(), tick)

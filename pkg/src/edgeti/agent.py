"""Edge-device runtime: detection, alert/heartbeat publishing, and
peer-side quarantine enforcement.

Blocking is enforced where it can be observed: each agent refuses traffic
from blocked peers on receive, and an agent that learns of its own
quarantine stops publishing application data. Alert and heartbeat topics
stay open for a quarantined device so the coordinator can watch recovery.
"""

from __future__ import annotations

import hashlib
import json
import random
import uuid as uuidlib
from dataclasses import dataclass, field

from edgeti.errors import ContractViolation
from edgeti.domain.codec import decode, encode
from edgeti.domain.signing import KeyRing
from edgeti.domain.types import (
    AnomalyAlert,
    DeviceId,
    DirectiveAction,
    Event,
    Heartbeat,
    QuarantineDirective,
    SignedEnvelope,
)
from edgeti.detector import DetectorConfig, SignatureRule, StreamDetector
from edgeti.transport import (
    DedupWindow,
    Delivery,
    OutboundMessage,
    QoS,
    SimBroker,
    alert_topic,
    data_topic,
    directive_topic,
    heartbeat_topic,
)

DEFAULT_HEARTBEAT_INTERVAL = 10

DROP_BLOCKED = "blocked"
DROP_BAD_SIG = "bad_sig"
DROP_DUPLICATE = "duplicate"


def seeded_uuid_source(seed: int, label: str):
    """Deterministic UUID generator for simulation mode."""
    digest = hashlib.sha256(f"{seed}:uuid:{label}".encode("utf-8")).digest()
    rng = random.Random(int.from_bytes(digest[:8], "big"))

    def next_uuid() -> uuidlib.UUID:
        return uuidlib.UUID(int=rng.getrandbits(128), version=4)

    return next_uuid


@dataclass
class AgentConfig:
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    heartbeat_interval: int = DEFAULT_HEARTBEAT_INTERVAL


@dataclass(frozen=True)
class BlockEvent:
    """Audit record of one directive application."""

    tick: int
    action: DirectiveAction
    target: DeviceId


class EdgeAgent:
    """One device's event loop. Calls on a single agent are serialized."""

    def __init__(
        self,
        device: DeviceId,
        keyring: KeyRing,
        bus: SimBroker,
        config: AgentConfig | None = None,
        rules: tuple[SignatureRule, ...] = (),
        coordinator: DeviceId | None = None,
        uuid_source=None,
    ) -> None:
        self.device = device
        self.keyring = keyring
        self.bus = bus
        self.config = config or AgentConfig()
        self.coordinator = coordinator or DeviceId(device.site, "coordinator")
        self.detector = StreamDetector(self.config.detector, rules)
        self.uuid_source = uuid_source or uuidlib.uuid4
        self.blocked_peers: set[DeviceId] = set()
        self.self_quarantined = False
        self.seen_msgs = DedupWindow()
        self.drop_counts: dict[DeviceId, dict[str, int]] = {}
        self.directive_rejects = 0
        self.block_log: list[BlockEvent] = []
        self.alerts: list[AnomalyAlert] = []
        self.windows_processed = 0
        self.alerts_emitted = 0
        self.accepted_data = 0
        self.accept_log: list[tuple[int, DeviceId]] = []
        self._data_seq = 0
        self._window_events: list[Event] = []
        self._window_index = 0
        self._last_tick: int | None = None

    # ---- publishing side -------------------------------------------------

    def _publish(self, payload: bytes, topic, qos: QoS) -> OutboundMessage:
        envelope = self.keyring.sign_as(self.device, payload)
        message = OutboundMessage(
            topic=topic, envelope=envelope, qos=qos, msg_id=self.uuid_source()
        )
        self.bus.publish(message)
        return message

    def ingest_event(self, event: Event) -> list[OutboundMessage]:
        """Buffer one local event; closing a window may publish alerts."""
        if event.device != self.device:
            raise ContractViolation(
                f"agent {self.device} fed event for {event.device}"
            )
        if self._last_tick is not None and event.tick < self._last_tick:
            raise ContractViolation("event ticks must be non-decreasing")
        self._last_tick = event.tick
        window = event.tick // self.config.detector.window_ticks
        if window < self._window_index:
            raise ContractViolation(
                f"event tick {event.tick} falls in already-closed window {window}"
            )
        published: list[OutboundMessage] = []
        while self._window_index < window:
            published.extend(self._close_current_window())
        self._window_events.append(event)
        return published

    def close_windows_through(self, tick: int) -> list[OutboundMessage]:
        """Close every window that ends at or before this tick.

        The harness calls this once per tick after feeding events, so quiet
        ticks still advance the detector with empty windows.
        """
        wt = self.config.detector.window_ticks
        published: list[OutboundMessage] = []
        while (self._window_index + 1) * wt - 1 <= tick:
            published.extend(self._close_current_window())
        return published

    def _close_current_window(self) -> list[OutboundMessage]:
        events = self._window_events
        index = self._window_index
        self._window_events = []
        self._window_index = index + 1
        finding = self.detector.evaluate_window(index, events)
        self.windows_processed += 1
        if finding is None:
            return []
        wt = self.config.detector.window_ticks
        alert = AnomalyAlert(
            id=self.uuid_source(),
            device=self.device,
            tick=index * wt + wt - 1,
            severity=finding.severity,
            score=finding.score,
            top_feature=finding.top_feature,
            feature_snapshot=finding.features.as_dict(),
            signature_hits=finding.signature_hits,
            location=self.device.site,
        )
        self.alerts.append(alert)
        self.alerts_emitted += 1
        return [
            self._publish(encode(alert), alert_topic(self.device), QoS.AT_LEAST_ONCE)
        ]

    def heartbeat(self, tick: int) -> OutboundMessage:
        beat = Heartbeat(
            device=self.device,
            tick=tick,
            windows_processed=self.windows_processed,
            alerts_emitted=self.alerts_emitted,
        )
        return self._publish(encode(beat), heartbeat_topic(self.device), QoS.AT_MOST_ONCE)

    def publish_data(self, tick: int) -> OutboundMessage | None:
        """Application traffic, used by peers to observe blocking.

        Returns None without publishing while self-quarantined.
        """
        if self.self_quarantined:
            return None
        self._data_seq += 1
        payload = json.dumps(
            {"device": str(self.device), "tick": tick, "seq": self._data_seq},
            sort_keys=True,
        ).encode("utf-8")
        return self._publish(payload, data_topic(self.device), QoS.AT_MOST_ONCE)

    # ---- receiving side --------------------------------------------------

    def _count_drop(self, peer: DeviceId, reason: str) -> None:
        self.drop_counts.setdefault(peer, {})[reason] = (
            self.drop_counts.get(peer, {}).get(reason, 0) + 1
        )

    def should_accept_peer_message(
        self, sender: DeviceId, envelope: SignedEnvelope, msg_id
    ) -> bool:
        """Verify, then check the blocklist, then deduplicate."""
        if not self.keyring.verify_envelope(envelope) or envelope.sender != sender:
            self._count_drop(sender, DROP_BAD_SIG)
            return False
        if sender in self.blocked_peers:
            self._count_drop(sender, DROP_BLOCKED)
            return False
        if not self.seen_msgs.accept(msg_id):
            self._count_drop(sender, DROP_DUPLICATE)
            return False
        return True

    def apply_directive(self, directive: QuarantineDirective, tick: int = 0) -> None:
        """Idempotent blocklist update; self-targeted directives gate data publishing."""
        target = directive.target
        if directive.action is DirectiveAction.QUARANTINE:
            if target == self.device:
                if not self.self_quarantined:
                    self.self_quarantined = True
                    self.block_log.append(BlockEvent(tick, directive.action, target))
            elif target not in self.blocked_peers:
                self.blocked_peers.add(target)
                self.block_log.append(BlockEvent(tick, directive.action, target))
        else:
            if target == self.device:
                if self.self_quarantined:
                    self.self_quarantined = False
                    self.block_log.append(BlockEvent(tick, directive.action, target))
            elif target in self.blocked_peers:
                self.blocked_peers.discard(target)
                self.block_log.append(BlockEvent(tick, directive.action, target))

    def handle_delivery(self, delivery: Delivery, tick: int) -> None:
        topic = delivery.topic
        envelope = delivery.envelope
        if topic == directive_topic(self.device.site):
            if envelope.sender != self.coordinator or not self.keyring.verify_envelope(
                envelope
            ):
                self.directive_rejects += 1
                return
            if not self.seen_msgs.accept(delivery.msg_id):
                return
            try:
                message = decode(envelope.payload)
            except Exception:
                self.directive_rejects += 1
                return
            if isinstance(message, QuarantineDirective):
                self.apply_directive(message, tick)
            return
        if len(topic.segments) >= 4 and topic.segments[3] == "data":
            sender = envelope.sender
            if sender == self.device:
                return
            if self.should_accept_peer_message(sender, envelope, delivery.msg_id):
                self.accepted_data += 1
                self.accept_log.append((tick, sender))

    def first_block_tick(self, target: DeviceId, since_tick: int = 0) -> int | None:
        """Tick of the first Quarantine applied against target at or after since_tick."""
        for entry in self.block_log:
            if (
                entry.action is DirectiveAction.QUARANTINE
                and entry.target == target
                and entry.tick >= since_tick
            ):
                return entry.tick
        return None

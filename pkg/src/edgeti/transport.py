"""Publish-subscribe fabric: topic grammar, wildcard matching, and a
deterministic in-process broker for simulation.

Topic scheme (authoritative for the whole fabric):

    ti/v1/<site>/alert/<device>      device -> coordinator, QoS 1
    ti/v1/<site>/directive           coordinator -> devices, QoS 1
    ti/v1/<site>/heartbeat/<device>  device -> coordinator, QoS 0
    ti/v1/<site>/verdict             coordinator -> observers, QoS 1
    ti/v1/<site>/data/<device>       peer application traffic, QoS 0

The sim broker delivers with a fixed per-message delay, an optional seeded
drop plan (at-most-once traffic only) and duplicate plan (at-least-once
traffic only), and keeps an ordered delivery transcript. No retained
messages, no persistent sessions.
"""

from __future__ import annotations

import hashlib
import json
import uuid as uuidlib
from dataclasses import dataclass
from enum import Enum

from edgeti.errors import FilterGrammarError, ParameterError, TransportError
from edgeti.domain.types import DeviceId, SignedEnvelope

_RESERVED = set("/+#")


@dataclass(frozen=True)
class Topic:
    segments: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.segments:
            raise ParameterError("topic must have at least one segment")
        for seg in self.segments:
            if not seg or any(ch in _RESERVED for ch in seg):
                raise ParameterError(f"bad topic segment {seg!r}")

    @classmethod
    def parse(cls, rendered: str) -> "Topic":
        return cls(tuple(rendered.split("/")))

    def __str__(self) -> str:
        return "/".join(self.segments)


@dataclass(frozen=True)
class TopicFilter:
    segments: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.segments:
            raise FilterGrammarError("filter must have at least one segment")
        for i, seg in enumerate(self.segments):
            if seg == "#":
                if i != len(self.segments) - 1:
                    raise FilterGrammarError("# only allowed as the final segment")
            elif seg == "+":
                continue
            elif not seg or "+" in seg or "#" in seg:
                raise FilterGrammarError(f"bad filter segment {seg!r}")
            elif "/" in seg:
                raise FilterGrammarError(f"bad filter segment {seg!r}")

    @classmethod
    def parse(cls, rendered: str) -> "TopicFilter":
        return cls(tuple(rendered.split("/")))

    def __str__(self) -> str:
        return "/".join(self.segments)


def topic_matches(filter: TopicFilter, topic: Topic) -> bool:
    """MQTT 3.1.1 matching: ``+`` is one segment, a final ``#`` is any
    suffix including the empty one."""
    fsegs = filter.segments
    tsegs = topic.segments
    fi = 0
    for fi, fseg in enumerate(fsegs):
        if fseg == "#":
            return True
        if fi >= len(tsegs):
            return False
        if fseg != "+" and fseg != tsegs[fi]:
            return False
    return len(fsegs) == len(tsegs)


def alert_topic(device: DeviceId) -> Topic:
    return Topic(("ti", "v1", device.site, "alert", device.name))


def directive_topic(site: str) -> Topic:
    return Topic(("ti", "v1", site, "directive"))


def heartbeat_topic(device: DeviceId) -> Topic:
    return Topic(("ti", "v1", device.site, "heartbeat", device.name))


def verdict_topic(site: str) -> Topic:
    return Topic(("ti", "v1", site, "verdict"))


def data_topic(device: DeviceId) -> Topic:
    return Topic(("ti", "v1", device.site, "data", device.name))


class QoS(Enum):
    AT_MOST_ONCE = 0
    AT_LEAST_ONCE = 1


@dataclass(frozen=True)
class OutboundMessage:
    topic: Topic
    envelope: SignedEnvelope
    qos: QoS
    msg_id: uuidlib.UUID


@dataclass(frozen=True)
class Delivery:
    subscriber: str
    topic: Topic
    envelope: SignedEnvelope
    msg_id: uuidlib.UUID
    qos: QoS


@dataclass(frozen=True)
class TranscriptEntry:
    tick: int
    subscriber: str
    topic: str
    sender: str
    msg_id: str


def transcript_to_jsonl(entries: list[TranscriptEntry]) -> str:
    lines = [
        json.dumps(
            {
                "tick": e.tick,
                "subscriber": e.subscriber,
                "topic": e.topic,
                "sender": e.sender,
                "msg_id": e.msg_id,
            },
            sort_keys=True,
            separators=(",", ":"),
        )
        for e in entries
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def parse_transcript(text: str) -> list[TranscriptEntry]:
    entries = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
            entries.append(
                TranscriptEntry(
                    tick=int(doc["tick"]),
                    subscriber=str(doc["subscriber"]),
                    topic=str(doc["topic"]),
                    sender=str(doc["sender"]),
                    msg_id=str(doc["msg_id"]),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParameterError(f"transcript line {lineno}: {exc}") from None
    return entries


def transcript_digest(entries: list[TranscriptEntry]) -> str:
    return hashlib.sha256(transcript_to_jsonl(entries).encode("utf-8")).hexdigest()


class DeliveryPlan:
    """Seeded pure predicate on message ids, used for drop/duplicate faults.

    With no seed the plan never fires. The decision is a function of
    (label, seed, msg_id) only, so transcripts stay reproducible whatever
    order messages are published in.
    """

    def __init__(self, label: str, seed: int | None, rate: float = 0.1) -> None:
        if not 0.0 <= rate <= 1.0:
            raise ParameterError("plan rate must be in [0, 1]")
        self.label = label
        self.seed = seed
        self.rate = rate

    def __call__(self, msg_id: uuidlib.UUID) -> bool:
        if self.seed is None or self.rate == 0.0:
            return False
        digest = hashlib.sha256(f"{self.label}:{self.seed}:{msg_id}".encode()).digest()
        fraction = int.from_bytes(digest[:8], "big") / 2**64
        return fraction < self.rate


class DedupWindow:
    """Receiver-side duplicate suppression, bounded with FIFO eviction.

    accept() is true exactly once per id while the id remains within the
    last ``capacity`` distinct ids seen; an evicted id replayed later is
    accepted again (documented bound).
    """

    def __init__(self, capacity: int = 4096) -> None:
        if capacity < 1:
            raise ParameterError("dedup capacity must be >= 1")
        self.capacity = capacity
        self._seen: dict[object, None] = {}

    def accept(self, msg_id: object) -> bool:
        if msg_id in self._seen:
            return False
        self._seen[msg_id] = None
        if len(self._seen) > self.capacity:
            oldest = next(iter(self._seen))
            del self._seen[oldest]
        return True


@dataclass(frozen=True)
class _Queued:
    seq: int
    enqueue_tick: int
    subscriber: str
    message: OutboundMessage


class SimBroker:
    """Single-threaded deterministic broker driven by step().

    Matching happens at publish time against the current subscriptions;
    a message published before a subscription is never delivered to it.
    step() delivers every queued message whose enqueue tick plus the broker
    delay has been reached, in enqueue order, then advances the clock.
    """

    def __init__(
        self,
        delay_ticks: int = 0,
        drop_plan: DeliveryPlan | None = None,
        duplicate_plan: DeliveryPlan | None = None,
    ) -> None:
        if delay_ticks < 0:
            raise ParameterError("delay_ticks must be >= 0")
        self.delay_ticks = delay_ticks
        self.drop_plan = drop_plan or DeliveryPlan("drop", None)
        self.duplicate_plan = duplicate_plan or DeliveryPlan("duplicate", None)
        self.now = 0
        self._seq = 0
        self._queue: list[_Queued] = []
        self._subscriptions: dict[str, list[TopicFilter]] = {}
        self._closed = False
        self.transcript: list[TranscriptEntry] = []

    def subscribe(self, subscriber: str, filter: TopicFilter | str) -> None:
        if self._closed:
            raise TransportError("bus is closed")
        if isinstance(filter, str):
            filter = TopicFilter.parse(filter)
        filters = self._subscriptions.setdefault(subscriber, [])
        if filter not in filters:
            filters.append(filter)

    def close(self) -> None:
        self._closed = True

    def publish(self, message: OutboundMessage) -> int:
        """Enqueue for every matching subscriber; returns deliveries queued."""
        if self._closed:
            raise TransportError("bus is closed")
        if message.qos is QoS.AT_MOST_ONCE and self.drop_plan(message.msg_id):
            return 0
        copies = 1
        if message.qos is QoS.AT_LEAST_ONCE and self.duplicate_plan(message.msg_id):
            copies = 2
        queued = 0
        for subscriber, filters in self._subscriptions.items():
            if any(topic_matches(f, message.topic) for f in filters):
                for _ in range(copies):
                    self._queue.append(
                        _Queued(self._seq, self.now, subscriber, message)
                    )
                    self._seq += 1
                    queued += 1
        return queued

    def step(self) -> list[Delivery]:
        due: list[_Queued] = []
        remaining: list[_Queued] = []
        for item in self._queue:
            if item.enqueue_tick + self.delay_ticks <= self.now:
                due.append(item)
            else:
                remaining.append(item)
        self._queue = remaining
        deliveries = []
        for item in due:
            msg = item.message
            deliveries.append(
                Delivery(
                    subscriber=item.subscriber,
                    topic=msg.topic,
                    envelope=msg.envelope,
                    msg_id=msg.msg_id,
                    qos=msg.qos,
                )
            )
            self.transcript.append(
                TranscriptEntry(
                    tick=self.now,
                    subscriber=item.subscriber,
                    topic=str(msg.topic),
                    sender=str(msg.envelope.sender),
                    msg_id=str(msg.msg_id),
                )
            )
        self.now += 1
        return deliveries

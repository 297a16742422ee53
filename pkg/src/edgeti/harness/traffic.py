"""Deterministic benign traffic generation and attack injection.

Benign events for a (seed, device, tick) triple are a pure function of
that triple: the generator hashes it into a private RNG, so transcripts
do not depend on evaluation order. Attack events are fully deterministic,
no randomness at all.
"""

from __future__ import annotations

import hashlib
import math
import random

from edgeti.domain.types import (
    DeviceId,
    Event,
    FlowRecord,
    LogFacility,
    LogRecord,
)
from edgeti.harness.scenario import AttackKind, AttackSpec, BenignProfile

LOG_TAMPER_MESSAGE = "file /etc/passwd modified"


def _rng_for(seed: int, device: DeviceId, tick: int) -> random.Random:
    digest = hashlib.sha256(f"{seed}:{device}:{tick}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def _poisson(rng: random.Random, lam: float) -> int:
    if lam <= 0:
        return 0
    if lam > 64:
        return max(0, round(rng.gauss(lam, math.sqrt(lam))))
    threshold = math.exp(-lam)
    count = 0
    product = rng.random()
    while product > threshold:
        count += 1
        product *= rng.random()
    return count


def gen_benign(
    seed: int, profile: BenignProfile, device: DeviceId, tick: int
) -> list[Event]:
    """Background traffic for one device-tick."""
    rng = _rng_for(seed, device, tick)
    events: list[Event] = []
    n_flows = _poisson(rng, profile.flow_rate) if profile.port_pool else 0
    for _ in range(n_flows):
        events.append(
            Event.of_flow(
                device,
                tick,
                FlowRecord(
                    dst_port=rng.choice(profile.port_pool),
                    packets=1 + _poisson(rng, 2.0),
                    bytes_out=max(
                        0, round(rng.gauss(profile.bytes_mean, 0.1 * profile.bytes_mean))
                    ),
                    syn_failed=False,
                ),
            )
        )
    if profile.auth_fail_prob > 0 and rng.random() < profile.auth_fail_prob:
        events.append(
            Event.of_log(
                device,
                tick,
                LogRecord(
                    facility=LogFacility.AUTH,
                    message=f"authentication failure for user admin from 192.0.2.{rng.randint(1, 254)}",
                    is_failure=True,
                ),
            )
        )
    return events


def inject_attack(
    events: list[Event], attack: AttackSpec, profile: BenignProfile, tick: int
) -> list[Event]:
    """Append this tick's attack traffic for the target device.

    Outside the attack window the input list is returned unchanged.
    """
    if not attack.start_tick <= tick < attack.end_tick:
        return events
    device = attack.target
    added: list[Event] = []
    offset = tick - attack.start_tick
    if attack.kind is AttackKind.PORT_SCAN:
        n = max(1, round(attack.intensity * 100))
        for i in range(n):
            port = 1024 + (offset * n + i) % 60000
            added.append(
                Event.of_flow(
                    device,
                    tick,
                    FlowRecord(dst_port=port, packets=1, bytes_out=40, syn_failed=True),
                )
            )
    elif attack.kind is AttackKind.BRUTE_FORCE:
        n = max(1, round(attack.intensity * 20))
        for i in range(n):
            added.append(
                Event.of_log(
                    device,
                    tick,
                    LogRecord(
                        facility=LogFacility.AUTH,
                        message=f"authentication failure for root from 203.0.113.{(7 * offset + i) % 254 + 1}",
                        is_failure=True,
                    ),
                )
            )
    elif attack.kind is AttackKind.EXFILTRATION:
        n = max(1, round(attack.intensity))
        bytes_out = max(1, round(profile.bytes_mean * attack.intensity * 50.0))
        for _ in range(n):
            added.append(
                Event.of_flow(
                    device,
                    tick,
                    FlowRecord(dst_port=443, packets=40, bytes_out=bytes_out, syn_failed=False),
                )
            )
    else:
        added.append(
            Event.of_log(
                device,
                tick,
                LogRecord(facility=LogFacility.CONFIG, message=LOG_TAMPER_MESSAGE, is_failure=False),
            )
        )
    return list(events) + added

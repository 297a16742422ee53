"""Stock signature rules, threat inventory, and the shipped scenarios.

The four attack scenarios share one topology: three devices on one site,
one attack on dev-b starting at tick 500 with the default detector and
coordinator configuration, seed 42.
"""

from __future__ import annotations

import functools

from edgeti.detector import SignatureRule
from edgeti.domain.types import DeviceId, Severity
from edgeti.harness.scenario import (
    AttackKind,
    AttackSpec,
    BenignProfile,
    DeviceSpec,
    ScenarioSpec,
)
from edgeti.intel import InventoryEntry, inventory_digest

STOCK_RULE_DOCS = (
    {
        "rule_id": "sig-passwd",
        "pattern": "passwd",
        "severity": "High",
        "description": "credential file touched",
    },
    {
        "rule_id": "sig-telnet",
        "pattern": "port:23",
        "severity": "Medium",
        "description": "telnet destination traffic",
    },
    {
        "rule_id": "sig-shell-spawn",
        "pattern": r"/bin/sh spawned",
        "severity": "High",
        "description": "unexpected shell process",
    },
)

STOCK_INVENTORY = (
    InventoryEntry(
        threat_name="port scan",
        indicators=("burst of distinct destination ports", "failed SYNs"),
        mitigation="quarantine the device and audit exposed services",
    ),
    InventoryEntry(
        threat_name="credential brute force",
        indicators=("repeated authentication failures",),
        mitigation="quarantine, rotate credentials, enable lockout",
    ),
    InventoryEntry(
        threat_name="data exfiltration",
        indicators=("outbound byte volume far above baseline",),
        mitigation="quarantine and inspect outbound destinations",
    ),
    InventoryEntry(
        threat_name="log tampering",
        indicators=("credential file modification entries",),
        mitigation="quarantine and restore configuration from backup",
    ),
)


def stock_rules() -> tuple[SignatureRule, ...]:
    return tuple(
        SignatureRule(
            rule_id=doc["rule_id"],
            pattern=doc["pattern"],
            severity=Severity.from_label(doc["severity"]),
            description=doc["description"],
        )
        for doc in STOCK_RULE_DOCS
    )


@functools.lru_cache(maxsize=1)
def stock_inventory_digest() -> str:
    return inventory_digest(STOCK_INVENTORY)


def _stock_devices() -> tuple[DeviceSpec, ...]:
    profile = BenignProfile()
    return tuple(
        DeviceSpec(DeviceId("site1", name), profile)
        for name in ("dev-a", "dev-b", "dev-c")
    )


def _attack_scenario(kind: AttackKind) -> ScenarioSpec:
    return ScenarioSpec(
        seed=42,
        ticks=650,
        devices=_stock_devices(),
        attacks=(
            AttackSpec(
                kind=kind,
                target=DeviceId("site1", "dev-b"),
                start_tick=500,
                duration=40,
                intensity=1.0,
            ),
        ),
    )


def s1_port_scan() -> ScenarioSpec:
    return _attack_scenario(AttackKind.PORT_SCAN)


def s2_brute_force() -> ScenarioSpec:
    return _attack_scenario(AttackKind.BRUTE_FORCE)


def s3_exfiltration() -> ScenarioSpec:
    return _attack_scenario(AttackKind.EXFILTRATION)


def s4_log_tamper() -> ScenarioSpec:
    return _attack_scenario(AttackKind.LOG_TAMPER)


def benign_calibration(seed: int, ticks: int = 10_000) -> ScenarioSpec:
    """Benign-only run used for false-positive calibration; peer data
    traffic is disabled to keep multi-seed sweeps fast."""
    return ScenarioSpec(
        seed=seed,
        ticks=ticks,
        devices=_stock_devices(),
        attacks=(),
        data_interval=0,
    )


STOCK_SCENARIOS = {
    "s1_port_scan": s1_port_scan,
    "s2_brute_force": s2_brute_force,
    "s3_exfiltration": s3_exfiltration,
    "s4_log_tamper": s4_log_tamper,
}

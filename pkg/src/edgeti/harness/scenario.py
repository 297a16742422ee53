"""Scenario documents: what to simulate, validated before execution."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields as dc_fields
from enum import Enum
from pathlib import Path
from typing import Any

from edgeti.errors import ParameterError, ScenarioError
from edgeti.coordinator import CoordinatorConfig
from edgeti.detector import DetectorConfig, SignatureRule, parse_rules
from edgeti.domain.types import DeviceId


class AttackKind(Enum):
    PORT_SCAN = "PortScan"
    BRUTE_FORCE = "BruteForce"
    EXFILTRATION = "Exfiltration"
    LOG_TAMPER = "LogTamper"


@dataclass(frozen=True)
class BenignProfile:
    flow_rate: float = 3.0
    port_pool: tuple[int, ...] = (80, 443, 8080, 53)
    bytes_mean: float = 1500.0
    auth_fail_prob: float = 0.02

    def __post_init__(self) -> None:
        if self.flow_rate < 0:
            raise ParameterError("flow_rate must be >= 0")
        if self.bytes_mean < 0:
            raise ParameterError("bytes_mean must be >= 0")
        if not 0.0 <= self.auth_fail_prob <= 1.0:
            raise ParameterError("auth_fail_prob must be in [0, 1]")
        for port in self.port_pool:
            if not 0 <= port <= 65535:
                raise ParameterError(f"port {port} out of range")


@dataclass(frozen=True)
class AttackSpec:
    kind: AttackKind
    target: DeviceId
    start_tick: int
    duration: int
    intensity: float = 1.0

    def __post_init__(self) -> None:
        if self.start_tick < 0:
            raise ParameterError("attack start_tick must be >= 0")
        if self.duration < 1:
            raise ParameterError("attack duration must be >= 1")
        if self.intensity <= 0:
            raise ParameterError("attack intensity must be > 0")

    @property
    def end_tick(self) -> int:
        return self.start_tick + self.duration


@dataclass(frozen=True)
class BrokerSpec:
    delay_ticks: int = 0
    drop_seed: int | None = None
    drop_rate: float = 0.1
    duplicate_seed: int | None = None
    duplicate_rate: float = 0.1

    def __post_init__(self) -> None:
        if self.delay_ticks < 0:
            raise ParameterError("delay_ticks must be >= 0")
        for name in ("drop_rate", "duplicate_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ParameterError(f"{name} must be in [0, 1]")


@dataclass(frozen=True)
class DeviceSpec:
    device: DeviceId
    profile: BenignProfile = field(default_factory=BenignProfile)


@dataclass(frozen=True)
class AdminAction:
    tick: int
    action: str
    device: DeviceId

    def __post_init__(self) -> None:
        if self.action != "reinstate":
            raise ParameterError(f"unknown admin action {self.action!r}")


@dataclass(frozen=True)
class ScenarioSpec:
    seed: int
    ticks: int
    devices: tuple[DeviceSpec, ...]
    attacks: tuple[AttackSpec, ...] = ()
    broker: BrokerSpec = field(default_factory=BrokerSpec)
    coordinator: CoordinatorConfig = field(default_factory=CoordinatorConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    rules: tuple[SignatureRule, ...] | None = None
    llm_script: dict[str, str] = field(default_factory=dict)
    llm_default: str | None = None
    admin_actions: tuple[AdminAction, ...] = ()
    data_interval: int = 1
    heartbeat_interval: int = 10

    def validate(self) -> list[str]:
        problems = []
        if self.ticks < 1:
            problems.append("ticks must be >= 1")
        if not self.devices:
            problems.append("scenario needs at least one device")
        names = [str(d.device) for d in self.devices]
        if len(set(names)) != len(names):
            problems.append("device names must be unique")
        sites = {d.device.site for d in self.devices}
        if len(sites) > 1:
            problems.append(f"all devices must share one site, got {sorted(sites)}")
        known = {d.device for d in self.devices}
        for attack in self.attacks:
            if attack.target not in known:
                problems.append(f"attack target {attack.target} is not a scenario device")
            if not 0 <= attack.start_tick < self.ticks:
                problems.append(
                    f"attack window [{attack.start_tick}, {attack.end_tick}) outside [0, {self.ticks})"
                )
        for action in self.admin_actions:
            if action.device not in known:
                problems.append(f"admin action device {action.device} is not a scenario device")
            if not 0 <= action.tick < self.ticks:
                problems.append(f"admin action tick {action.tick} outside [0, {self.ticks})")
        if self.data_interval < 0:
            problems.append("data_interval must be >= 0")
        if self.heartbeat_interval < 1:
            problems.append("heartbeat_interval must be >= 1")
        return problems

    @property
    def site(self) -> str:
        return self.devices[0].device.site


def _config_from_dict(cls, doc: dict[str, Any], where: str):
    allowed = {f.name for f in dc_fields(cls)}
    unknown = set(doc) - allowed
    if unknown:
        raise ScenarioError(f"{where}: unknown fields {sorted(unknown)}")
    try:
        return cls(**doc)
    except (ParameterError, TypeError) as exc:
        raise ScenarioError(f"{where}: {exc}") from None


def scenario_from_dict(doc: dict[str, Any]) -> ScenarioSpec:
    """Parse and validate a scenario document; raises ScenarioError."""
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a JSON object")
    problems: list[str] = []

    def fail(message: str) -> None:
        problems.append(message)

    try:
        seed = int(doc["seed"])
        ticks = int(doc["ticks"])
    except (KeyError, TypeError, ValueError):
        raise ScenarioError("scenario requires integer 'seed' and 'ticks'") from None

    devices = []
    for i, entry in enumerate(doc.get("devices", [])):
        try:
            device = DeviceId.parse(entry["device"])
            profile_doc = dict(entry.get("profile", {}))
            if "port_pool" in profile_doc:
                profile_doc["port_pool"] = tuple(profile_doc["port_pool"])
            profile = _config_from_dict(BenignProfile, profile_doc, f"devices[{i}].profile")
            devices.append(DeviceSpec(device, profile))
        except (KeyError, TypeError, ParameterError) as exc:
            fail(f"devices[{i}]: {exc}")
        except ScenarioError as exc:
            problems.extend(exc.problems)

    attacks = []
    for i, entry in enumerate(doc.get("attacks", [])):
        try:
            attacks.append(
                AttackSpec(
                    kind=AttackKind(entry["kind"]),
                    target=DeviceId.parse(entry["target"]),
                    start_tick=int(entry["start_tick"]),
                    duration=int(entry["duration"]),
                    intensity=float(entry.get("intensity", 1.0)),
                )
            )
        except (KeyError, TypeError, ValueError, ParameterError) as exc:
            fail(f"attacks[{i}]: {exc}")

    admin_actions = []
    for i, entry in enumerate(doc.get("admin_actions", [])):
        try:
            admin_actions.append(
                AdminAction(
                    tick=int(entry["tick"]),
                    action=entry["action"],
                    device=DeviceId.parse(entry["device"]),
                )
            )
        except (KeyError, TypeError, ValueError, ParameterError) as exc:
            fail(f"admin_actions[{i}]: {exc}")

    rules = None
    if "rules" in doc:
        try:
            rules = parse_rules(doc["rules"])
        except ParameterError as exc:
            fail(f"rules: {exc}")

    llm = doc.get("llm", {})
    llm_script = dict(llm.get("script", {})) if isinstance(llm, dict) else {}
    llm_default = llm.get("default") if isinstance(llm, dict) else None
    if not isinstance(llm, dict):
        fail("llm section must be an object")

    try:
        broker = _config_from_dict(BrokerSpec, dict(doc.get("broker", {})), "broker")
    except ScenarioError as exc:
        problems.extend(exc.problems)
        broker = BrokerSpec()
    coordinator_doc = dict(doc.get("coordinator", {}))
    # coordinator gap detection follows the agents' heartbeat cadence unless
    # explicitly configured otherwise
    coordinator_doc.setdefault(
        "heartbeat_interval", int(doc.get("heartbeat_interval", 10))
    )
    try:
        coordinator = _config_from_dict(CoordinatorConfig, coordinator_doc, "coordinator")
    except ScenarioError as exc:
        problems.extend(exc.problems)
        coordinator = CoordinatorConfig()
    try:
        detector = _config_from_dict(DetectorConfig, dict(doc.get("detector", {})), "detector")
    except ScenarioError as exc:
        problems.extend(exc.problems)
        detector = DetectorConfig()

    if problems:
        raise ScenarioError(problems)

    spec = ScenarioSpec(
        seed=seed,
        ticks=ticks,
        devices=tuple(devices),
        attacks=tuple(attacks),
        broker=broker,
        coordinator=coordinator,
        detector=detector,
        rules=rules,
        llm_script=llm_script,
        llm_default=llm_default,
        admin_actions=tuple(admin_actions),
        data_interval=int(doc.get("data_interval", 1)),
        heartbeat_interval=int(doc.get("heartbeat_interval", 10)),
    )
    problems = spec.validate()
    if problems:
        raise ScenarioError(problems)
    return spec


def scenario_to_dict(spec: ScenarioSpec) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "seed": spec.seed,
        "ticks": spec.ticks,
        "devices": [
            {
                "device": str(d.device),
                "profile": {
                    "flow_rate": d.profile.flow_rate,
                    "port_pool": list(d.profile.port_pool),
                    "bytes_mean": d.profile.bytes_mean,
                    "auth_fail_prob": d.profile.auth_fail_prob,
                },
            }
            for d in spec.devices
        ],
        "attacks": [
            {
                "kind": a.kind.value,
                "target": str(a.target),
                "start_tick": a.start_tick,
                "duration": a.duration,
                "intensity": a.intensity,
            }
            for a in spec.attacks
        ],
        "broker": {
            "delay_ticks": spec.broker.delay_ticks,
            "drop_seed": spec.broker.drop_seed,
            "drop_rate": spec.broker.drop_rate,
            "duplicate_seed": spec.broker.duplicate_seed,
            "duplicate_rate": spec.broker.duplicate_rate,
        },
        "coordinator": {
            "alerts_to_quarantine": spec.coordinator.alerts_to_quarantine,
            "suspect_window_ticks": spec.coordinator.suspect_window_ticks,
            "clean_heartbeats_required": spec.coordinator.clean_heartbeats_required,
            "consult_interval_ticks": spec.coordinator.consult_interval_ticks,
            "heartbeat_interval": spec.coordinator.heartbeat_interval,
            "auto_register": spec.coordinator.auto_register,
            "alert_log_limit": spec.coordinator.alert_log_limit,
        },
        "detector": {
            "alpha": spec.detector.alpha,
            "tau": spec.detector.tau,
            "k_consecutive": spec.detector.k_consecutive,
            "sigma_min": spec.detector.sigma_min,
            "window_ticks": spec.detector.window_ticks,
            "warmup_windows": spec.detector.warmup_windows,
        },
        "llm": {"script": dict(spec.llm_script)},
        "admin_actions": [
            {"tick": a.tick, "action": a.action, "device": str(a.device)}
            for a in spec.admin_actions
        ],
        "data_interval": spec.data_interval,
        "heartbeat_interval": spec.heartbeat_interval,
    }
    if spec.llm_default is not None:
        doc["llm"]["default"] = spec.llm_default
    if spec.rules is not None:
        doc["rules"] = [
            {
                "rule_id": r.rule_id,
                "pattern": r.pattern,
                "severity": r.severity.label,
                "description": r.description,
            }
            for r in spec.rules
        ]
    return doc


def load_scenario(path: str | Path) -> ScenarioSpec:
    try:
        doc = json.loads(Path(path).read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario file {path}: {exc}") from None
    return scenario_from_dict(doc)

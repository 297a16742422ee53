"""Long-running modes for the CLI: a live agent bound to a real broker and
the HTTP service process.

These paths are demo plumbing outside the deterministic test surface: the
agent reads events as JSON lines on stdin (one object per line with tick,
kind, and a flow or log body) and enforces directives received from the
broker; the server either serves the scenario service over HTTP or hosts a
live coordinator on a real broker.
"""

from __future__ import annotations

import json
import sys

from edgeti.errors import FabricError, ParameterError
from edgeti.agent import AgentConfig, EdgeAgent
from edgeti.coordinator import CoordinatorConfig, EdgeCoordinator, NotificationSink
from edgeti.detector import DetectorConfig, load_rules
from edgeti.domain.codec import decode_envelope
from edgeti.domain.signing import KeyRing
from edgeti.domain.types import (
    DeviceId,
    Event,
    EventKind,
    FlowRecord,
    LogFacility,
    LogRecord,
)
from edgeti.mqtt_binding import MqttBus
from edgeti.transport import Delivery, QoS, Topic


def parse_event_line(device: DeviceId, line: str) -> Event:
    """Parse one stdin line into an Event for the given device."""
    try:
        doc = json.loads(line)
        tick = int(doc["tick"])
        kind = EventKind(doc["kind"])
        if kind is EventKind.FLOW:
            body = doc["flow"]
            return Event.of_flow(
                device,
                tick,
                FlowRecord(
                    dst_port=int(body["dst_port"]),
                    packets=int(body["packets"]),
                    bytes_out=int(body["bytes_out"]),
                    syn_failed=bool(body.get("syn_failed", False)),
                ),
            )
        body = doc["log"]
        return Event.of_log(
            device,
            tick,
            LogRecord(
                facility=LogFacility(body["facility"]),
                message=str(body["message"]),
                is_failure=bool(body.get("is_failure", False)),
            ),
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ParameterError(f"bad event line: {exc}") from None


def _keyring_from_config(config: dict) -> tuple[KeyRing, DeviceId, DeviceId]:
    try:
        device = DeviceId.parse(config["device"])
        own_key = bytes.fromhex(config["key_hex"])
        coordinator = DeviceId.parse(config.get("coordinator", f"{device.site}/coordinator"))
        coordinator_key = bytes.fromhex(config["coordinator_key_hex"])
    except (KeyError, ValueError) as exc:
        raise FabricError(f"bad agent config: {exc}") from None
    keyring = KeyRing()
    keyring.register(device, own_key)
    keyring.register(coordinator, coordinator_key)
    for peer in config.get("peers", []):
        keyring.register(DeviceId.parse(peer["device"]), bytes.fromhex(peer["key_hex"]))
    return keyring, device, coordinator


def run_live_agent(config: dict) -> None:
    """Block reading events from stdin until EOF or interrupt."""
    keyring, device, coordinator = _keyring_from_config(config)
    broker_cfg = config.get("broker") or {}
    if not broker_cfg.get("host"):
        raise FabricError("agent config needs a broker.host")
    bus = MqttBus(
        host=broker_cfg["host"],
        port=int(broker_cfg.get("port", 8883)),
        identity=device,
        keepalive=int(broker_cfg.get("keepalive", 60)),
        tls=bool(broker_cfg.get("tls", True)),
    )
    detector = DetectorConfig(**config.get("detector", {}))
    rules = load_rules(config["rules_path"]) if config.get("rules_path") else ()
    agent = EdgeAgent(
        device=device,
        keyring=keyring,
        bus=bus,
        config=AgentConfig(
            detector=detector,
            heartbeat_interval=int(config.get("heartbeat_interval", 10)),
        ),
        rules=rules,
        coordinator=coordinator,
    )

    def on_directive(topic: str, payload: bytes) -> None:
        try:
            envelope = decode_envelope(payload)
        except Exception:
            return
        delivery = Delivery(
            subscriber=str(device),
            topic=Topic.parse(topic),
            envelope=envelope,
            msg_id=envelope.sig.hex(),
            qos=QoS.AT_LEAST_ONCE,
        )
        agent.handle_delivery(delivery, agent.windows_processed)

    bus.subscribe(f"ti/v1/{device.site}/directive", on_directive)
    bus.loop_start()
    last_heartbeat = None
    try:
        for line in sys.stdin:
            if not line.strip():
                continue
            event = parse_event_line(device, line)
            agent.ingest_event(event)
            agent.close_windows_through(event.tick)
            interval = agent.config.heartbeat_interval
            if last_heartbeat is None or event.tick - last_heartbeat >= interval:
                agent.heartbeat(event.tick)
                last_heartbeat = event.tick
    finally:
        bus.loop_stop()
        bus.close()


def run_server(config: dict) -> None:
    """Serve the HTTP scenario service, or host a live coordinator."""
    http_cfg = config.get("http")
    broker_cfg = config.get("broker")
    if http_cfg:
        try:
            import uvicorn
        except ImportError:
            raise FabricError("uvicorn is required for HTTP serving") from None
        from edgeti.service.app import create_app

        uvicorn.run(
            create_app(),
            host=http_cfg.get("host", "127.0.0.1"),
            port=int(http_cfg.get("port", 8800)),
            log_level="info",
        )
        return
    if broker_cfg:
        _run_live_coordinator(config, broker_cfg)
        return
    raise FabricError("server config needs an 'http' or 'broker' section")


def _run_live_coordinator(config: dict, broker_cfg: dict) -> None:
    try:
        site = config["site"]
        coordinator_id = DeviceId(site, "coordinator")
        keyring = KeyRing()
        keyring.register(coordinator_id, bytes.fromhex(config["key_hex"]))
        for entry in config.get("devices", []):
            keyring.register(
                DeviceId.parse(entry["device"]), bytes.fromhex(entry["key_hex"])
            )
    except (KeyError, ValueError) as exc:
        raise FabricError(f"bad server config: {exc}") from None
    bus = MqttBus(
        host=broker_cfg["host"],
        port=int(broker_cfg.get("port", 8883)),
        identity=coordinator_id,
        tls=bool(broker_cfg.get("tls", True)),
    )
    provider = None
    if config.get("provider"):
        from edgeti.intel import HttpChatProvider, ProviderConfig

        provider = HttpChatProvider(ProviderConfig(**config["provider"]))
    digest = ""
    if config.get("inventory_path"):
        from edgeti.intel import inventory_digest, load_inventory

        digest = inventory_digest(load_inventory(config["inventory_path"]))
    webhook = None
    if config.get("webhook_url"):
        from edgeti.coordinator import make_webhook_poster

        webhook = make_webhook_poster(config["webhook_url"])
    coordinator = EdgeCoordinator(
        site=site,
        keyring=keyring,
        bus=bus,
        config=CoordinatorConfig(**config.get("coordinator", {})),
        provider=provider,
        inventory_digest=digest,
        notifications=NotificationSink(
            path=config.get("notifications_path"), webhook=webhook
        ),
    )
    for device in keyring.devices():
        if device != coordinator_id:
            coordinator.register_device(device)

    def on_message(topic: str, payload: bytes) -> None:
        try:
            envelope = decode_envelope(payload)
        except Exception:
            return
        parsed = Topic.parse(topic)
        delivery = Delivery(
            subscriber=str(coordinator_id),
            topic=parsed,
            envelope=envelope,
            msg_id=envelope.sig.hex(),
            qos=QoS.AT_LEAST_ONCE,
        )
        coordinator.handle_delivery(delivery, coordinator.now)

    bus.subscribe(f"ti/v1/{site}/alert/#", on_message)
    bus.subscribe(f"ti/v1/{site}/heartbeat/#", on_message)
    bus.loop_forever()

"""Canonical wire encoding (schema v1) for fabric messages.

Documents are UTF-8 JSON objects with a ``type`` discriminator
(``alert`` | ``directive`` | ``heartbeat`` | ``verdict``) and a
``schema_version``. Field order is not significant; the canonical byte form
(sorted keys, no whitespace) is what envelopes carry and sign. Decoding a
document with ``schema_version`` greater than 1 is accepted, ignoring
unknown fields.
"""

from __future__ import annotations

import base64
import binascii
import json
import uuid as uuidlib
from typing import Any

from edgeti.errors import DecodeError, MessageValidationError, ParameterError
from edgeti.domain.types import (
    AnomalyAlert,
    Classification,
    DeviceId,
    DirectiveAction,
    Heartbeat,
    Message,
    QuarantineDirective,
    Severity,
    SignedEnvelope,
    ThreatVerdict,
    severity_from_score,
)

WIRE_SCHEMA_VERSION = 1

# Threshold used to cross-check the severity/score consistency of decoded
# alerts that carry no signature hits. Fabrics running a non-default detector
# threshold must pass their own value to decode().
DEFAULT_SEVERITY_TAU = 4.0

ALERT = "alert"
DIRECTIVE = "directive"
HEARTBEAT = "heartbeat"
VERDICT = "verdict"


def _dumps(doc: dict[str, Any]) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def encode(message: Message) -> bytes:
    """Encode a valid message into its canonical wire bytes."""
    if isinstance(message, AnomalyAlert):
        doc = {
            "type": ALERT,
            "schema_version": message.schema_version,
            "id": str(message.id),
            "device": str(message.device),
            "tick": message.tick,
            "severity": message.severity.label,
            "score": message.score,
            "top_feature": message.top_feature,
            "feature_snapshot": dict(message.feature_snapshot),
            "signature_hits": list(message.signature_hits),
            "location": message.location,
        }
    elif isinstance(message, QuarantineDirective):
        doc = {
            "type": DIRECTIVE,
            "schema_version": message.schema_version,
            "id": str(message.id),
            "action": message.action.value,
            "target": str(message.target),
            "reason": message.reason,
            "issued_tick": message.issued_tick,
        }
    elif isinstance(message, Heartbeat):
        doc = {
            "type": HEARTBEAT,
            "schema_version": message.schema_version,
            "device": str(message.device),
            "tick": message.tick,
            "windows_processed": message.windows_processed,
            "alerts_emitted": message.alerts_emitted,
        }
    elif isinstance(message, ThreatVerdict):
        doc = {
            "type": VERDICT,
            "schema_version": WIRE_SCHEMA_VERSION,
            "incident_id": str(message.incident_id),
            "classification": message.classification.value,
            "threat_type": message.threat_type,
            "vulnerability": message.vulnerability,
            "mitigation": message.mitigation,
            "confidence": message.confidence,
        }
    else:
        raise ParameterError(f"cannot encode {type(message).__name__}")
    return _dumps(doc)


def _req(doc: dict[str, Any], key: str, kinds: type | tuple[type, ...]) -> Any:
    if key not in doc:
        raise DecodeError(f"missing required field {key!r}")
    value = doc[key]
    if not isinstance(value, kinds):
        raise DecodeError(f"field {key!r} has wrong type {type(value).__name__}")
    if isinstance(value, bool) and kinds in (int, float) :
        raise DecodeError(f"field {key!r} has wrong type bool")
    return value


def _number(doc: dict[str, Any], key: str) -> float:
    value = _req(doc, key, (int, float))
    if isinstance(value, bool):
        raise DecodeError(f"field {key!r} has wrong type bool")
    return float(value)


def _integer(doc: dict[str, Any], key: str) -> int:
    value = _req(doc, key, int)
    if isinstance(value, bool):
        raise DecodeError(f"field {key!r} has wrong type bool")
    return value


def _uuid(doc: dict[str, Any], key: str) -> uuidlib.UUID:
    raw = _req(doc, key, str)
    try:
        return uuidlib.UUID(raw)
    except ValueError:
        raise DecodeError(f"field {key!r} is not a UUID") from None


def _device(doc: dict[str, Any], key: str) -> DeviceId:
    raw = _req(doc, key, str)
    try:
        return DeviceId.parse(raw)
    except ParameterError as exc:
        raise MessageValidationError(str(exc)) from None


def _decode_alert(doc: dict[str, Any], tau: float) -> AnomalyAlert:
    snapshot_raw = _req(doc, "feature_snapshot", dict)
    snapshot: dict[str, float] = {}
    for name, value in snapshot_raw.items():
        if not isinstance(name, str) or isinstance(value, bool) or not isinstance(value, (int, float)):
            raise DecodeError("feature_snapshot must map names to numbers")
        snapshot[name] = float(value)
    hits_raw = _req(doc, "signature_hits", list)
    if not all(isinstance(h, str) for h in hits_raw):
        raise DecodeError("signature_hits must be a list of rule ids")
    try:
        severity = Severity.from_label(_req(doc, "severity", str))
    except ParameterError:
        raise DecodeError("unknown severity label") from None
    try:
        alert = AnomalyAlert(
            id=_uuid(doc, "id"),
            device=_device(doc, "device"),
            tick=_integer(doc, "tick"),
            severity=severity,
            score=_number(doc, "score"),
            top_feature=_req(doc, "top_feature", str),
            feature_snapshot=snapshot,
            signature_hits=tuple(hits_raw),
            location=_req(doc, "location", str),
            schema_version=_integer(doc, "schema_version"),
        )
    except ParameterError as exc:
        raise MessageValidationError(str(exc)) from None
    if not alert.signature_hits and alert.severity is not severity_from_score(alert.score, tau):
        raise MessageValidationError(
            f"severity {alert.severity.label} inconsistent with score {alert.score} at tau {tau}"
        )
    return alert


def _decode_directive(doc: dict[str, Any]) -> QuarantineDirective:
    action_raw = _req(doc, "action", str)
    try:
        action = DirectiveAction(action_raw)
    except ValueError:
        raise DecodeError(f"unknown directive action {action_raw!r}") from None
    try:
        return QuarantineDirective(
            id=_uuid(doc, "id"),
            action=action,
            target=_device(doc, "target"),
            reason=_req(doc, "reason", str),
            issued_tick=_integer(doc, "issued_tick"),
            schema_version=_integer(doc, "schema_version"),
        )
    except ParameterError as exc:
        raise MessageValidationError(str(exc)) from None


def _decode_heartbeat(doc: dict[str, Any]) -> Heartbeat:
    try:
        return Heartbeat(
            device=_device(doc, "device"),
            tick=_integer(doc, "tick"),
            windows_processed=_integer(doc, "windows_processed"),
            alerts_emitted=_integer(doc, "alerts_emitted"),
            schema_version=_integer(doc, "schema_version"),
        )
    except ParameterError as exc:
        raise MessageValidationError(str(exc)) from None


def _decode_verdict(doc: dict[str, Any]) -> ThreatVerdict:
    classification_raw = _req(doc, "classification", str)
    try:
        classification = Classification(classification_raw)
    except ValueError:
        raise DecodeError(f"unknown classification {classification_raw!r}") from None
    try:
        return ThreatVerdict(
            incident_id=_uuid(doc, "incident_id"),
            classification=classification,
            threat_type=_req(doc, "threat_type", str),
            vulnerability=_req(doc, "vulnerability", str),
            mitigation=_req(doc, "mitigation", str),
            confidence=_number(doc, "confidence"),
        )
    except ParameterError as exc:
        raise MessageValidationError(str(exc)) from None


def decode(data: bytes, *, tau: float = DEFAULT_SEVERITY_TAU) -> Message:
    """Decode wire bytes into a message, or raise a CodecError subclass.

    Never raises anything but DecodeError/MessageValidationError, whatever
    the input bytes are.
    """
    try:
        text = data.decode("utf-8")
    except (UnicodeDecodeError, AttributeError) as exc:
        raise DecodeError(f"payload is not UTF-8: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DecodeError(f"payload is not JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise DecodeError("payload is not a JSON object")
    version = doc.get("schema_version")
    if not isinstance(version, int) or isinstance(version, bool) or version < 1:
        raise DecodeError(f"bad schema_version {version!r}")
    kind = doc.get("type")
    if kind == ALERT:
        return _decode_alert(doc, tau)
    if kind == DIRECTIVE:
        return _decode_directive(doc)
    if kind == HEARTBEAT:
        return _decode_heartbeat(doc)
    if kind == VERDICT:
        return _decode_verdict(doc)
    raise DecodeError(f"unknown message type {kind!r}")


def encode_envelope(envelope: SignedEnvelope) -> bytes:
    """Render an envelope for the wire: base64 payload, hex signature."""
    return _dumps(
        {
            "payload": base64.b64encode(envelope.payload).decode("ascii"),
            "sender": str(envelope.sender),
            "sig": envelope.sig.hex(),
        }
    )


def decode_envelope(data: bytes) -> SignedEnvelope:
    try:
        text = data.decode("utf-8")
        doc = json.loads(text)
    except (UnicodeDecodeError, AttributeError, json.JSONDecodeError) as exc:
        raise DecodeError(f"envelope is not a JSON document: {exc}") from None
    if not isinstance(doc, dict):
        raise DecodeError("envelope is not a JSON object")
    payload_b64 = _req(doc, "payload", str)
    sig_hex = _req(doc, "sig", str)
    try:
        payload = base64.b64decode(payload_b64, validate=True)
    except (binascii.Error, ValueError):
        raise DecodeError("envelope payload is not valid base64") from None
    try:
        sig = bytes.fromhex(sig_hex)
    except ValueError:
        raise DecodeError("envelope sig is not valid hex") from None
    sender = _device(doc, "sender")
    try:
        return SignedEnvelope(payload=payload, sender=sender, sig=sig)
    except ParameterError as exc:
        raise MessageValidationError(str(exc)) from None

"""Central threat-intelligence client.

Prompts are assembled deterministically from a bounded exemplar store
(in-context examples of previously confirmed incidents) plus a static
threat-inventory digest. Providers are pluggable: a deterministic mock for
hermetic runs and an HTTP chat-completions binding for live use. Every
provider failure degrades to an Unknown verdict; a flaky model can never
wedge triage, which has non-LLM paths to quarantine.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import time
import uuid as uuidlib
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from edgeti.errors import (
    ParameterError,
    TransientProviderError,
    VerdictParseError,
)
from edgeti.domain.types import (
    AnomalyAlert,
    Classification,
    DeviceId,
    ThreatVerdict,
)

MAX_SUMMARY_BYTES = 2048
DEFAULT_STORE_CAPACITY = 16


class IncidentStatus(Enum):
    PENDING_CONSULT = "PendingConsult"
    RESOLVED = "Resolved"


@dataclass
class Incident:
    """A device's bundle of unexplained alerts awaiting a verdict."""

    incident_id: uuidlib.UUID
    device: DeviceId
    alerts: list[AnomalyAlert]
    first_tick: int
    status: IncidentStatus = IncidentStatus.PENDING_CONSULT


@dataclass(frozen=True)
class Exemplar:
    summary: str
    verdict: ThreatVerdict
    added_tick: int

    def __post_init__(self) -> None:
        if len(self.summary.encode("utf-8")) > MAX_SUMMARY_BYTES:
            raise ParameterError("exemplar summary exceeds 2048 bytes")


class ExemplarStore:
    """Bounded FIFO store of confirmed-incident exemplars."""

    def __init__(self, capacity: int = DEFAULT_STORE_CAPACITY) -> None:
        if capacity < 1:
            raise ParameterError("store capacity must be >= 1")
        self.capacity = capacity
        self.items: list[Exemplar] = []

    def append(self, exemplar: Exemplar) -> None:
        self.items.append(exemplar)
        if len(self.items) > self.capacity:
            del self.items[0]

    def __len__(self) -> int:
        return len(self.items)


def add_exemplar(
    store: ExemplarStore, incident: Incident, verdict: ThreatVerdict, tick: int
) -> bool:
    """Record a confirmed-malicious incident; anything else is a no-op."""
    if verdict.classification is not Classification.MALICIOUS:
        return False
    store.append(
        Exemplar(
            summary=render_incident_summary(incident),
            verdict=verdict,
            added_tick=tick,
        )
    )
    return True


# ---- incident rendering ------------------------------------------------------

_TRAILING_INDEX = re.compile(r"[-_]\d+$")


def device_class(device: DeviceId) -> str:
    """Device name with any trailing numeric index stripped: sensor-3 -> sensor."""
    return _TRAILING_INDEX.sub("", device.name) or device.name


def render_incident_summary(incident: Incident) -> str:
    """Compact deterministic description of an incident for prompts."""
    first = incident.alerts[0]
    features = sorted(
        first.feature_snapshot.items(), key=lambda kv: (-kv[1], kv[0])
    )[:3]
    feature_text = ", ".join(f"{name}={value:.2f}" for name, value in features)
    hits = ",".join(first.signature_hits) if first.signature_hits else "none"
    text = (
        f"device class {device_class(incident.device)} at {first.location or incident.device.site}; "
        f"{len(incident.alerts)} alert(s) since tick {incident.first_tick}; "
        f"peak severity {max(a.severity for a in incident.alerts).label}; "
        f"top feature {first.top_feature} (score {first.score:.2f}); "
        f"leading features: {feature_text or 'none'}; signature hits: {hits}"
    )
    encoded = text.encode("utf-8")
    if len(encoded) > MAX_SUMMARY_BYTES:
        text = encoded[:MAX_SUMMARY_BYTES].decode("utf-8", "ignore")
    return text


def incident_signature(incident: Incident) -> str:
    """Stable digest key for scripting mock responses."""
    first = incident.alerts[0]
    raw = "|".join(
        (
            device_class(incident.device),
            first.top_feature,
            ",".join(sorted(first.signature_hits)),
        )
    )
    return hashlib.sha256(raw.encode("utf-8")).hexdigest()[:16]


# ---- threat inventory --------------------------------------------------------


@dataclass(frozen=True)
class InventoryEntry:
    threat_name: str
    indicators: tuple[str, ...]
    mitigation: str


def load_inventory(path: str | Path) -> tuple[InventoryEntry, ...]:
    try:
        docs = json.loads(Path(path).read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ParameterError(f"inventory file {path}: {exc}") from None
    if not isinstance(docs, list):
        raise ParameterError("inventory file must contain a list")
    entries = []
    for doc in docs:
        try:
            entries.append(
                InventoryEntry(
                    threat_name=doc["threat_name"],
                    indicators=tuple(doc["indicators"]),
                    mitigation=doc["mitigation"],
                )
            )
        except (KeyError, TypeError) as exc:
            raise ParameterError(f"bad inventory entry {doc!r}: {exc}") from None
    return tuple(entries)


def inventory_digest(entries: tuple[InventoryEntry, ...]) -> str:
    lines = [
        f"- {e.threat_name}: indicators {', '.join(e.indicators)}; mitigation: {e.mitigation}"
        for e in entries
    ]
    return "\n".join(lines)


# ---- prompt assembly -----------------------------------------------------------

SYSTEM_ROLE_TEXT = (
    "You are a security analyst for an edge-device fleet. Classify the"
    " incident below using the known threat inventory and the prior"
    " confirmed incidents as guidance."
)

RESPONSE_SCHEMA_TEXT = (
    "Respond with a single JSON object containing exactly these fields:"
    ' "incident_id" (string, optional), "classification" (Malicious |'
    ' Benign | Unknown), "threat_type" (string), "vulnerability" (string),'
    ' "mitigation" (string), "confidence" (number in [0,1]).'
)


@dataclass(frozen=True)
class PromptDoc:
    system_text: str
    exemplar_texts: tuple[str, ...]
    incident_text: str
    response_schema_text: str

    def render(self) -> str:
        parts = [self.system_text]
        if self.exemplar_texts:
            parts.append("Prior confirmed incidents:")
            parts.extend(self.exemplar_texts)
        parts.append("Incident under review:")
        parts.append(self.incident_text)
        parts.append(self.response_schema_text)
        return "\n\n".join(parts)


def render_verdict(verdict: ThreatVerdict) -> str:
    return json.dumps(
        {
            "incident_id": str(verdict.incident_id),
            "classification": verdict.classification.value,
            "threat_type": verdict.threat_type,
            "vulnerability": verdict.vulnerability,
            "mitigation": verdict.mitigation,
            "confidence": verdict.confidence,
        },
        sort_keys=True,
    )


def build_prompt(
    store: ExemplarStore, incident: Incident, inventory_digest: str
) -> PromptDoc:
    """Deterministic prompt: role and inventory, exemplars oldest first,
    then the incident and the response-schema instruction."""
    if not incident.alerts:
        raise ParameterError("incident must carry at least one alert")
    system_text = SYSTEM_ROLE_TEXT
    if inventory_digest:
        system_text = f"{system_text}\n\nKnown threat inventory:\n{inventory_digest}"
    exemplar_texts = tuple(
        f"Incident: {ex.summary}\nVerdict: {render_verdict(ex.verdict)}"
        for ex in store.items
    )
    return PromptDoc(
        system_text=system_text,
        exemplar_texts=exemplar_texts,
        incident_text=render_incident_summary(incident),
        response_schema_text=RESPONSE_SCHEMA_TEXT,
    )


# ---- verdict parsing -------------------------------------------------------------

_CLASSIFICATIONS = {c.value.lower(): c for c in Classification}


def _first_json_object(text: str) -> dict | None:
    decoder = json.JSONDecoder()
    start = text.find("{")
    while start != -1:
        try:
            value, _ = decoder.raw_decode(text, start)
        except json.JSONDecodeError:
            start = text.find("{", start + 1)
            continue
        if isinstance(value, dict):
            return value
        start = text.find("{", start + 1)
    return None


def parse_verdict(text: str, incident_id: uuidlib.UUID) -> ThreatVerdict:
    """Extract and validate the first JSON object in a model response."""
    doc = _first_json_object(text)
    if doc is None:
        raise VerdictParseError("no JSON object found in response")
    raw_incident = doc.get("incident_id")
    if raw_incident not in (None, "", str(incident_id)):
        raise VerdictParseError(
            f"response names incident {raw_incident!r}, expected {incident_id}"
        )
    raw_classification = doc.get("classification")
    if not isinstance(raw_classification, str):
        raise VerdictParseError("missing classification")
    classification = _CLASSIFICATIONS.get(raw_classification.lower())
    if classification is None:
        raise VerdictParseError(f"unknown classification {raw_classification!r}")
    for name in ("threat_type", "vulnerability", "mitigation"):
        if not isinstance(doc.get(name), str):
            raise VerdictParseError(f"missing field {name!r}")
    confidence = doc.get("confidence")
    if isinstance(confidence, bool) or not isinstance(confidence, (int, float)):
        raise VerdictParseError("missing numeric confidence")
    try:
        return ThreatVerdict(
            incident_id=incident_id,
            classification=classification,
            threat_type=doc["threat_type"],
            vulnerability=doc["vulnerability"],
            mitigation=doc["mitigation"],
            confidence=float(confidence),
        )
    except ParameterError as exc:
        raise VerdictParseError(str(exc)) from None


def unknown_verdict(incident_id: uuidlib.UUID) -> ThreatVerdict:
    return ThreatVerdict(
        incident_id=incident_id,
        classification=Classification.UNKNOWN,
        threat_type="",
        vulnerability="",
        mitigation="",
        confidence=0.0,
    )


# ---- providers --------------------------------------------------------------------


@dataclass(frozen=True)
class ProviderConfig:
    base_url: str = ""
    model_name: str = ""
    timeout_s: float = 30.0
    max_retries: int = 2
    backoff_s: float = 1.0
    api_key_env: str = "TI_LLM_API_KEY"

    def __post_init__(self) -> None:
        if self.timeout_s <= 0:
            raise ParameterError("timeout must be > 0")
        if self.max_retries < 0:
            raise ParameterError("max_retries must be >= 0")


class MockProvider:
    """Deterministic provider for hermetic runs.

    Responses are scripted per incident signature (see incident_signature);
    unscripted incidents get the default response. Every consult's prompt
    is recorded for assertions, including ones that fail.
    """

    def __init__(
        self,
        script: dict[str, str] | None = None,
        default: str | None = None,
        failures_before_success: int = 0,
    ) -> None:
        self.script = dict(script or {})
        self.default = default if default is not None else json.dumps(
            {
                "classification": "Unknown",
                "threat_type": "",
                "vulnerability": "",
                "mitigation": "",
                "confidence": 0.0,
            }
        )
        self.prompts: list[PromptDoc] = []
        self._failures_left = failures_before_success

    def complete(self, prompt: PromptDoc, incident: Incident) -> str:
        self.prompts.append(prompt)
        if self._failures_left > 0:
            self._failures_left -= 1
            raise TransientProviderError("scripted provider failure")
        return self.script.get(incident_signature(incident), self.default)


class HttpChatProvider:
    """Live binding to a chat-completions style HTTP endpoint.

    Outside the deterministic test surface; only reachable when explicitly
    configured. The API key is read from the environment variable named in
    the provider config.
    """

    def __init__(self, config: ProviderConfig, client=None) -> None:
        if not config.base_url:
            raise ParameterError("HttpChatProvider requires a base_url")
        self.config = config
        if client is None:
            import httpx

            client = httpx.Client(timeout=config.timeout_s)
        self._client = client

    def complete(self, prompt: PromptDoc, incident: Incident) -> str:
        import httpx

        headers = {}
        api_key = os.environ.get(self.config.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        body = {
            "model": self.config.model_name,
            "messages": [
                {"role": "system", "content": prompt.system_text},
                {
                    "role": "user",
                    "content": PromptDoc(
                        "", prompt.exemplar_texts, prompt.incident_text,
                        prompt.response_schema_text,
                    ).render().lstrip(),
                },
            ],
        }
        try:
            response = self._client.post(self.config.base_url, json=body, headers=headers)
        except httpx.HTTPError as exc:
            raise TransientProviderError(f"request failed: {exc}") from None
        if response.status_code >= 500:
            raise TransientProviderError(f"server error {response.status_code}")
        if response.status_code >= 400:
            raise TransientProviderError(f"request rejected {response.status_code}")
        try:
            doc = response.json()
            return doc["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError):
            return response.text


def consult(
    provider,
    prompt: PromptDoc,
    incident: Incident,
    config: ProviderConfig | None = None,
    sleep=time.sleep,
) -> ThreatVerdict:
    """Ask the provider for a verdict; never raises.

    Transient failures are retried with exponential backoff; exhausted
    retries or an unparseable response degrade to an Unknown verdict with
    zero confidence.
    """
    config = config or ProviderConfig()
    attempts = config.max_retries + 1
    for attempt in range(attempts):
        try:
            text = provider.complete(prompt, incident)
        except TransientProviderError:
            if attempt + 1 < attempts:
                sleep(config.backoff_s * (2**attempt))
                continue
            return unknown_verdict(incident.incident_id)
        try:
            return parse_verdict(text, incident.incident_id)
        except VerdictParseError:
            return unknown_verdict(incident.incident_id)
    return unknown_verdict(incident.incident_id)

"""Per-device streaming anomaly detection over tumbling event windows.

Two detection paths feed one alert stream:

* a statistical path: per-feature EWMA mean/variance with a max z-score,
  requiring the score to stay above threshold for a configurable number of
  consecutive windows before alerting;
* a signature path: rules from a local threat inventory matched directly
  against window events, which bypasses warmup.

Windows that produce an alert never update the learned statistics, so a
sustained attack cannot teach the detector to ignore itself.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path

from edgeti.errors import ContractViolation, ParameterError
from edgeti.domain.types import (
    Event,
    EventKind,
    LogFacility,
    Severity,
    severity_from_score,
)

FEATURE_ORDER: tuple[str, ...] = (
    "pkt_rate",
    "uniq_dst_ports",
    "syn_fail_ratio",
    "bytes_out_rate",
    "auth_fail_rate",
    "config_change_count",
    "new_proc_count",
)

N_FEATURES = len(FEATURE_ORDER)


@dataclass(frozen=True)
class FeatureVector:
    """Window summary the detector scores, in the fixed feature order above."""

    pkt_rate: float = 0.0
    uniq_dst_ports: float = 0.0
    syn_fail_ratio: float = 0.0
    bytes_out_rate: float = 0.0
    auth_fail_rate: float = 0.0
    config_change_count: float = 0.0
    new_proc_count: float = 0.0

    def __post_init__(self) -> None:
        for name in FEATURE_ORDER:
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value)):
                raise ParameterError(f"feature {name} must be finite, got {value!r}")
            if value < 0:
                raise ParameterError(f"feature {name} must be >= 0")
        if self.syn_fail_ratio > 1.0:
            raise ParameterError("syn_fail_ratio must be in [0, 1]")

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(float(getattr(self, name)) for name in FEATURE_ORDER)

    def as_dict(self) -> dict[str, float]:
        return {name: float(getattr(self, name)) for name in FEATURE_ORDER}


def extract_features(window: list[Event]) -> FeatureVector:
    """Fold one device's window of events into a feature vector.

    An empty window is the all-zero vector. Mixing devices in one window is
    a caller bug and raises ContractViolation.
    """
    if window:
        device = window[0].device
        for event in window:
            if event.device != device:
                raise ContractViolation(
                    f"window mixes devices {device} and {event.device}"
                )
    packets = 0
    bytes_out = 0
    ports: set[int] = set()
    flows = 0
    syn_failed = 0
    auth_failures = 0
    config_changes = 0
    new_procs = 0
    for event in window:
        if event.kind is EventKind.FLOW:
            flow = event.flow
            flows += 1
            packets += flow.packets
            bytes_out += flow.bytes_out
            ports.add(flow.dst_port)
            if flow.syn_failed:
                syn_failed += 1
        else:
            log = event.log
            if log.facility is LogFacility.AUTH and log.is_failure:
                auth_failures += 1
            elif log.facility is LogFacility.CONFIG:
                config_changes += 1
            elif log.facility is LogFacility.PROCESS:
                new_procs += 1
    return FeatureVector(
        pkt_rate=float(packets),
        uniq_dst_ports=float(len(ports)),
        syn_fail_ratio=syn_failed / max(1, flows),
        bytes_out_rate=float(bytes_out),
        auth_fail_rate=float(auth_failures),
        config_change_count=float(config_changes),
        new_proc_count=float(new_procs),
    )


@dataclass(frozen=True)
class EwmaState:
    """Learned per-feature statistics: EWMA mean and variance."""

    means: tuple[float, ...]
    variances: tuple[float, ...]
    samples_seen: int

    def __post_init__(self) -> None:
        if len(self.means) != N_FEATURES or len(self.variances) != N_FEATURES:
            raise ParameterError(f"state must carry {N_FEATURES} features")
        if any(v < 0 for v in self.variances):
            raise ParameterError("variance must be >= 0")
        if self.samples_seen < 0:
            raise ParameterError("samples_seen must be >= 0")

    @classmethod
    def zero(cls) -> "EwmaState":
        return cls((0.0,) * N_FEATURES, (0.0,) * N_FEATURES, 0)


def ewma_update(state: EwmaState, x: FeatureVector, alpha: float) -> EwmaState:
    """One recursion step of the EWMA mean/variance estimator.

    mean' = (1-a) mean + a x
    var'  = (1-a) (var + a (x - mean)^2)

    The first sample pins the mean and leaves variance at zero.
    """
    if not (0.0 < alpha < 1.0):
        raise ParameterError(f"alpha must be in (0, 1), got {alpha!r}")
    values = x.as_tuple()
    if state.samples_seen == 0:
        return EwmaState(values, (0.0,) * N_FEATURES, 1)
    means = []
    variances = []
    for mean, var, value in zip(state.means, state.variances, values):
        diff = value - mean
        means.append((1.0 - alpha) * mean + alpha * value)
        variances.append((1.0 - alpha) * (var + alpha * diff * diff))
    return EwmaState(tuple(means), tuple(variances), state.samples_seen + 1)


def anomaly_score(
    state: EwmaState, x: FeatureVector, sigma_min: float
) -> tuple[float, str]:
    """Max absolute z-score over features, with the winning feature name.

    The deviation is normalized by max(sqrt(var), sigma_min) so a collapsed
    variance still yields a finite score. Ties go to the earlier feature in
    FEATURE_ORDER.
    """
    if not (sigma_min > 0 and math.isfinite(sigma_min)):
        raise ParameterError("sigma_min must be finite and > 0")
    best_score = 0.0
    best_feature = FEATURE_ORDER[0]
    for name, mean, var, value in zip(
        FEATURE_ORDER, state.means, state.variances, x.as_tuple()
    ):
        z = abs(value - mean) / max(math.sqrt(var), sigma_min)
        if z > best_score:
            best_score = z
            best_feature = name
    return best_score, best_feature


_PORT_PATTERN = re.compile(r"^port:(\d{1,5})$")


@dataclass(frozen=True)
class SignatureRule:
    """One threat-inventory rule.

    ``pattern`` is either ``port:<n>`` (matches flows to that destination
    port) or a regular expression searched against log messages.
    """

    rule_id: str
    pattern: str
    severity: Severity
    description: str = ""

    def __post_init__(self) -> None:
        if not self.rule_id:
            raise ParameterError("rule_id must be non-empty")
        port_match = _PORT_PATTERN.match(self.pattern)
        if port_match:
            port = int(port_match.group(1))
            if port > 65535:
                raise ParameterError(f"rule {self.rule_id}: port {port} out of range")
            object.__setattr__(self, "_port", port)
            object.__setattr__(self, "_regex", None)
        else:
            try:
                compiled = re.compile(self.pattern)
            except re.error as exc:
                raise ParameterError(
                    f"rule {self.rule_id}: bad pattern {self.pattern!r}: {exc}"
                ) from None
            object.__setattr__(self, "_port", None)
            object.__setattr__(self, "_regex", compiled)

    def matches(self, event: Event) -> bool:
        if self._port is not None:
            return event.kind is EventKind.FLOW and event.flow.dst_port == self._port
        return event.kind is EventKind.LOG and bool(self._regex.search(event.log.message))


def parse_rules(docs: list[dict]) -> tuple[SignatureRule, ...]:
    """Build a rule set from parsed rule-file entries, rejecting duplicate ids."""
    rules = []
    seen: set[str] = set()
    for doc in docs:
        try:
            rule = SignatureRule(
                rule_id=doc["rule_id"],
                pattern=doc["pattern"],
                severity=Severity.from_label(doc["severity"]),
                description=doc.get("description", ""),
            )
        except (KeyError, TypeError) as exc:
            raise ParameterError(f"bad rule entry {doc!r}: {exc}") from None
        if rule.rule_id in seen:
            raise ParameterError(f"duplicate rule_id {rule.rule_id!r}")
        seen.add(rule.rule_id)
        rules.append(rule)
    return tuple(rules)


def load_rules(path: str | Path) -> tuple[SignatureRule, ...]:
    """Load a JSON rule file: a list of {rule_id, pattern, severity, description}."""
    try:
        docs = json.loads(Path(path).read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ParameterError(f"rule file {path}: {exc}") from None
    if not isinstance(docs, list):
        raise ParameterError(f"rule file {path} must contain a list")
    return parse_rules(docs)


def match_signatures(
    rules: tuple[SignatureRule, ...] | list[SignatureRule], window: list[Event]
) -> list[str]:
    """Rule ids with at least one matching event, in rule-set order, deduplicated."""
    hits = []
    for rule in rules:
        if any(rule.matches(event) for event in window):
            hits.append(rule.rule_id)
    return hits


@dataclass(frozen=True)
class DetectorConfig:
    alpha: float = 0.1
    tau: float = 4.0
    k_consecutive: int = 2
    sigma_min: float = 1e-6
    window_ticks: int = 1
    warmup_windows: int = 30

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.tau <= 0:
            raise ParameterError(f"tau must be > 0, got {self.tau}")
        if self.k_consecutive < 1:
            raise ParameterError("k_consecutive must be >= 1")
        if self.sigma_min <= 0:
            raise ParameterError("sigma_min must be > 0")
        if self.window_ticks < 1:
            raise ParameterError("window_ticks must be >= 1")
        if self.warmup_windows < 0:
            raise ParameterError("warmup_windows must be >= 0")


@dataclass(frozen=True)
class WindowFinding:
    """Alert fragment produced by one anomalous window."""

    window_index: int
    score: float
    severity: Severity
    top_feature: str
    signature_hits: tuple[str, ...]
    features: FeatureVector


class StreamDetector:
    """Detector state machine for a single device stream.

    Windows must be presented in strictly increasing index order. The EWMA
    state absorbs a window only when that window produced no finding.
    """

    def __init__(
        self,
        config: DetectorConfig | None = None,
        rules: tuple[SignatureRule, ...] | list[SignatureRule] = (),
    ) -> None:
        self.config = config or DetectorConfig()
        self.rules = tuple(rules)
        self.state = EwmaState.zero()
        self._streak = 0
        self._last_index: int | None = None

    @property
    def samples_seen(self) -> int:
        return self.state.samples_seen

    def evaluate_window(
        self, window_index: int, events: list[Event]
    ) -> WindowFinding | None:
        if self._last_index is not None and window_index <= self._last_index:
            raise ContractViolation(
                f"window {window_index} presented after window {self._last_index}"
            )
        self._last_index = window_index
        cfg = self.config
        x = extract_features(events)
        hits = tuple(match_signatures(self.rules, events))
        score, top_feature = anomaly_score(self.state, x, cfg.sigma_min)
        warmed_up = self.state.samples_seen >= cfg.warmup_windows

        if warmed_up and score >= cfg.tau:
            self._streak += 1
        else:
            self._streak = 0

        severity: Severity | None = None
        if hits:
            severity = max(
                rule.severity for rule in self.rules if rule.rule_id in hits
            )
        if warmed_up and self._streak >= cfg.k_consecutive:
            score_severity = severity_from_score(score, cfg.tau)
            severity = score_severity if severity is None else max(severity, score_severity)

        if severity is not None:
            return WindowFinding(
                window_index=window_index,
                score=score,
                severity=severity,
                top_feature=top_feature,
                signature_hits=hits,
                features=x,
            )
        # Breach windows stay out of the baseline even before the streak
        # completes: learning them caps the next window's z-score at
        # sqrt((1-alpha)/alpha), which sits below the default threshold and
        # would blind the consecutive-window rule to constant-level attacks.
        if not (warmed_up and score >= cfg.tau):
            self.state = ewma_update(self.state, x, cfg.alpha)
        return None

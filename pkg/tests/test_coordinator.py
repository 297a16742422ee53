"""Triage state machine, alert handling, consults, and reinstatement."""

import itertools
import json
import uuid

import pytest

from edgeti.errors import RegistrationError, StateError
from edgeti.coordinator import (
    Active,
    AdminReinstate,
    AlertReceived,
    CleanHeartbeat,
    CoordinatorConfig,
    DirtyHeartbeatGap,
    EdgeCoordinator,
    Effect,
    EffectKind,
    Quarantined,
    Reinstating,
    Suspect,
    SuspectTimeout,
    VerdictReceived,
    triage_transition,
)
from edgeti.domain.codec import decode, encode
from edgeti.domain.signing import KeyRing, derive_key
from edgeti.domain.types import (
    AnomalyAlert,
    Classification,
    DeviceId,
    DirectiveAction,
    Heartbeat,
    Severity,
    ThreatVerdict,
    severity_from_score,
)
from edgeti.intel import IncidentStatus, MockProvider, incident_signature
from edgeti.transport import SimBroker

CFG = CoordinatorConfig()


def alert_input(severity, known=False):
    return AlertReceived(severity, known)


class TestTriageTable:
    def test_active_low_logs_only(self):
        state, effects = triage_transition(Active(), alert_input(Severity.LOW), 5, CFG)
        assert state == Active()
        assert effects == (Effect(EffectKind.LOG_ONLY),)

    def test_active_medium_goes_suspect_notifies(self):
        state, effects = triage_transition(Active(), alert_input(Severity.MEDIUM), 5, CFG)
        assert state == Suspect(5, 1)
        kinds = [e.kind for e in effects]
        assert EffectKind.NOTIFY_ADMIN in kinds
        assert EffectKind.ENQUEUE_INCIDENT in kinds

    def test_active_known_medium_not_enqueued(self):
        _, effects = triage_transition(Active(), alert_input(Severity.HIGH, known=True), 5, CFG)
        assert EffectKind.ENQUEUE_INCIDENT not in [e.kind for e in effects]

    def test_active_critical_quarantines(self):
        state, effects = triage_transition(Active(), alert_input(Severity.CRITICAL), 9, CFG)
        assert state == Quarantined(9, "critical alert")
        kinds = [e.kind for e in effects]
        assert kinds == [EffectKind.ISSUE_QUARANTINE, EffectKind.NOTIFY_ADMIN]

    def test_suspect_counts_to_quarantine_within_window(self):
        state, effects = triage_transition(
            Suspect(0, 2), alert_input(Severity.HIGH), 10, CFG
        )
        assert isinstance(state, Quarantined)
        assert EffectKind.ISSUE_QUARANTINE in [e.kind for e in effects]

    def test_suspect_below_threshold_stays(self):
        state, effects = triage_transition(
            Suspect(0, 1), alert_input(Severity.MEDIUM, known=True), 10, CFG
        )
        assert state == Suspect(0, 2)
        assert effects == ()

    def test_suspect_unknown_alert_extends_incident(self):
        _, effects = triage_transition(Suspect(0, 1), alert_input(Severity.MEDIUM), 10, CFG)
        assert effects == (Effect(EffectKind.ENQUEUE_INCIDENT),)

    def test_suspect_expired_window_reanchors(self):
        state, effects = triage_transition(
            Suspect(0, 2), alert_input(Severity.HIGH), CFG.suspect_window_ticks + 1, CFG
        )
        assert state == Suspect(CFG.suspect_window_ticks + 1, 1)
        assert EffectKind.NOTIFY_ADMIN in [e.kind for e in effects]

    def test_suspect_low_alert_is_noop(self):
        state, effects = triage_transition(Suspect(0, 2), alert_input(Severity.LOW), 5, CFG)
        assert state == Suspect(0, 2)
        assert effects == ()

    def test_suspect_verdicts(self):
        malicious = VerdictReceived(Classification.MALICIOUS, "port scan")
        state, effects = triage_transition(Suspect(0, 1), malicious, 7, CFG)
        assert state == Quarantined(7, "port scan")
        assert EffectKind.ISSUE_QUARANTINE in [e.kind for e in effects]

        state, effects = triage_transition(
            Suspect(0, 1), VerdictReceived(Classification.BENIGN), 7, CFG
        )
        assert state == Active()
        assert effects == (Effect(EffectKind.RESOLVE_INCIDENT),)

        state, effects = triage_transition(
            Suspect(0, 2), VerdictReceived(Classification.UNKNOWN), 7, CFG
        )
        assert state == Suspect(0, 2)
        assert effects == (Effect(EffectKind.KEEP_PENDING),)

    def test_suspect_timeout_resolves(self):
        state, effects = triage_transition(Suspect(0, 2), SuspectTimeout(), 99, CFG)
        assert state == Active()
        assert effects == (Effect(EffectKind.RESOLVE_INCIDENT),)

    def test_admin_reinstate_starts_probation(self):
        state, effects = triage_transition(Quarantined(0, "x"), AdminReinstate(), 50, CFG)
        assert state == Reinstating(0)
        assert effects == (Effect(EffectKind.ISSUE_REINSTATE_PROBE),)

    def test_clean_heartbeats_reach_reinstate(self):
        state = Reinstating(CFG.clean_heartbeats_required - 1)
        state, effects = triage_transition(state, CleanHeartbeat(), 80, CFG)
        assert state == Active()
        assert [e.kind for e in effects] == [
            EffectKind.ISSUE_REINSTATE,
            EffectKind.NOTIFY_ADMIN,
        ]

    def test_relapse_requarantines(self):
        state, effects = triage_transition(
            Reinstating(4), alert_input(Severity.HIGH), 70, CFG
        )
        assert state == Quarantined(70, "relapse")
        assert EffectKind.ISSUE_QUARANTINE in [e.kind for e in effects]

    def test_dirty_heartbeat_gap_is_noop(self):
        state, effects = triage_transition(Reinstating(4), DirtyHeartbeatGap(), 70, CFG)
        assert state == Reinstating(4)
        assert effects == ()

    def test_catch_all_pairs_unchanged(self):
        for state in (Active(), Quarantined(0, "x"), Reinstating(2)):
            got, effects = triage_transition(
                state, VerdictReceived(Classification.MALICIOUS, "t"), 5, CFG
            )
            assert got == state and effects == ()
        got, effects = triage_transition(Active(), CleanHeartbeat(), 5, CFG)
        assert got == Active() and effects == ()
        got, effects = triage_transition(Quarantined(1, "r"), alert_input(Severity.CRITICAL), 5, CFG)
        assert got == Quarantined(1, "r") and effects == ()


# ---- independent table oracle ------------------------------------------------


def oracle_transition(state, event, tick, config):
    """Literal transcription of the triage table, written separately from
    the production function; rows are matched in table order."""
    M = config.alerts_to_quarantine
    T = config.suspect_window_ticks
    H = config.clean_heartbeats_required
    notify = Effect(EffectKind.NOTIFY_ADMIN)
    if isinstance(event, AlertReceived):
        sev, known = event.severity, event.known
        if isinstance(state, Active) and sev == Severity.LOW:
            return state, ("log_only",)
        if isinstance(state, Active) and sev in (Severity.MEDIUM, Severity.HIGH):
            return Suspect(tick, 1), (
                ("notify", "enqueue") if not known else ("notify",)
            )
        if isinstance(state, Active) and sev == Severity.CRITICAL:
            return Quarantined(tick, "critical alert"), ("quarantine", "notify")
        if isinstance(state, Suspect) and sev >= Severity.MEDIUM:
            if tick - state.since_tick > T:
                return Suspect(tick, 1), (
                    ("notify", "enqueue") if not known else ("notify",)
                )
            count = state.alert_count + 1
            if count >= M:
                return Quarantined(tick, "repeated alerts"), ("quarantine", "notify")
            return Suspect(state.since_tick, count), (
                ("enqueue",) if not known else ()
            )
        if isinstance(state, Reinstating) and sev >= Severity.MEDIUM:
            return Quarantined(tick, "relapse"), ("quarantine", "notify")
        return state, ()
    if isinstance(event, VerdictReceived) and isinstance(state, Suspect):
        if event.classification is Classification.MALICIOUS:
            reason = event.threat_type or "malicious verdict"
            return Quarantined(tick, reason), ("quarantine", "notify")
        if event.classification is Classification.BENIGN:
            return Active(), ("resolve",)
        return state, ("keep_pending",)
    if isinstance(event, SuspectTimeout) and isinstance(state, Suspect):
        return Active(), ("resolve",)
    if isinstance(event, AdminReinstate) and isinstance(state, Quarantined):
        return Reinstating(0), ("probe",)
    if isinstance(event, CleanHeartbeat) and isinstance(state, Reinstating):
        n = state.clean_heartbeats + 1
        if n >= H:
            return Active(), ("reinstate", "notify")
        return Reinstating(n), ()
    return state, ()


_EFFECT_NAMES = {
    EffectKind.LOG_ONLY: "log_only",
    EffectKind.NOTIFY_ADMIN: "notify",
    EffectKind.ENQUEUE_INCIDENT: "enqueue",
    EffectKind.ISSUE_QUARANTINE: "quarantine",
    EffectKind.ISSUE_REINSTATE: "reinstate",
    EffectKind.ISSUE_REINSTATE_PROBE: "probe",
    EffectKind.RESOLVE_INCIDENT: "resolve",
    EffectKind.KEEP_PENDING: "keep_pending",
}


def all_inputs():
    inputs = [
        AlertReceived(sev, known)
        for sev in Severity
        for known in (False, True)
    ]
    inputs += [VerdictReceived(c, "worm" if c is Classification.MALICIOUS else "") for c in Classification]
    inputs += [SuspectTimeout(), AdminReinstate(), CleanHeartbeat(), DirtyHeartbeatGap()]
    return inputs


def test_exhaustive_state_input_pairs_match_oracle():
    configs = [CFG, CoordinatorConfig(alerts_to_quarantine=2, suspect_window_ticks=5,
                                      clean_heartbeats_required=2)]
    for config in configs:
        states = [Active(), Quarantined(0, "r")]
        states += [
            Suspect(since, count)
            for since in (0, 3)
            for count in range(1, config.alerts_to_quarantine + 2)
        ]
        states += [Reinstating(n) for n in range(config.clean_heartbeats_required + 1)]
        ticks = (0, 1, config.suspect_window_ticks, config.suspect_window_ticks + 1, 200)
        for state, event, tick in itertools.product(states, all_inputs(), ticks):
            got_state, got_effects = triage_transition(state, event, tick, config)
            want_state, want_effects = oracle_transition(state, event, tick, config)
            assert got_state == want_state, (state, event, tick)
            assert tuple(_EFFECT_NAMES[e.kind] for e in got_effects) == tuple(want_effects), (
                state,
                event,
                tick,
            )


# ---- runtime ----------------------------------------------------------------


def make_coordinator(provider=None, config=None):
    keyring = KeyRing()
    broker = SimBroker()
    coordinator = EdgeCoordinator(
        site="site1",
        keyring=keyring,
        bus=broker,
        config=config or CoordinatorConfig(),
        provider=provider,
    )
    keyring.register(coordinator.identity, derive_key(3, coordinator.identity))
    broker.subscribe("probe", "ti/v1/site1/directive")
    broker.subscribe("probe", "ti/v1/site1/verdict")
    return coordinator, keyring, broker


def register(coordinator, keyring, name):
    device = DeviceId("site1", name)
    keyring.register(device, derive_key(3, device))
    coordinator.register_device(device)
    return device


def make_alert(device, tick, score, hits=(), alert_id=None):
    return AnomalyAlert(
        id=alert_id or uuid.uuid4(),
        device=device,
        tick=tick,
        severity=severity_from_score(score, 4.0) if not hits else Severity.HIGH,
        score=score,
        top_feature="uniq_dst_ports",
        feature_snapshot={"uniq_dst_ports": score},
        signature_hits=tuple(hits),
        location=device.site,
    )


def send_alert(coordinator, keyring, device, alert, tick):
    envelope = keyring.sign_as(device, encode(alert))
    coordinator.now = tick
    return coordinator.handle_alert(envelope, tick)


def drain_directives(broker):
    out = []
    for delivery in broker.step():
        if delivery.subscriber == "probe" and "directive" in str(delivery.topic):
            out.append(decode(delivery.envelope.payload))
    return out


class TestRegistry:
    def test_register_and_duplicate(self):
        coordinator, keyring, _ = make_coordinator()
        device = register(coordinator, keyring, "dev-a")
        assert isinstance(coordinator.registry[device].state, Active)
        with pytest.raises(RegistrationError):
            coordinator.register_device(device)

    def test_two_devices_independent(self):
        coordinator, keyring, _ = make_coordinator()
        a = register(coordinator, keyring, "dev-a")
        b = register(coordinator, keyring, "dev-b")
        send_alert(coordinator, keyring, a, make_alert(a, 1, 9.0), 1)
        assert isinstance(coordinator.registry[a].state, Quarantined)
        assert isinstance(coordinator.registry[b].state, Active)


class TestHandleAlert:
    def test_high_unknown_alert_suspends_notifies_enqueues(self):
        coordinator, keyring, _ = make_coordinator()
        device = register(coordinator, keyring, "dev-a")
        send_alert(coordinator, keyring, device, make_alert(device, 4, 6.5), 4)
        assert coordinator.registry[device].state == Suspect(4, 1)
        assert len(coordinator.notifications.entries) == 1
        assert len(coordinator.incidents) == 1

    def test_critical_alert_issues_signed_directive(self):
        coordinator, keyring, broker = make_coordinator()
        device = register(coordinator, keyring, "dev-a")
        send_alert(coordinator, keyring, device, make_alert(device, 4, 9.0), 4)
        directives = drain_directives(broker)
        assert len(directives) == 1
        assert directives[0].action is DirectiveAction.QUARANTINE
        assert directives[0].target == device

    def test_tampered_envelope_rejected_without_effects(self):
        coordinator, keyring, _ = make_coordinator()
        device = register(coordinator, keyring, "dev-a")
        envelope = keyring.sign_as(device, encode(make_alert(device, 4, 9.0)))
        tampered = type(envelope)(
            payload=bytes([envelope.payload[0] ^ 1]) + envelope.payload[1:],
            sender=device,
            sig=envelope.sig,
        )
        coordinator.handle_alert(tampered, 4)
        assert coordinator.rejects["bad_sig"] == 1
        assert isinstance(coordinator.registry[device].state, Active)

    def test_duplicate_alert_id_no_double_transition(self):
        coordinator, keyring, _ = make_coordinator()
        device = register(coordinator, keyring, "dev-a")
        alert = make_alert(device, 4, 6.5)
        send_alert(coordinator, keyring, device, alert, 4)
        send_alert(coordinator, keyring, device, alert, 5)
        assert coordinator.registry[device].state == Suspect(4, 1)

    def test_sender_mismatch_rejected(self):
        coordinator, keyring, _ = make_coordinator()
        a = register(coordinator, keyring, "dev-a")
        b = register(coordinator, keyring, "dev-b")
        envelope = keyring.sign_as(b, encode(make_alert(a, 4, 9.0)))
        coordinator.handle_alert(envelope, 4)
        assert coordinator.rejects["sender_mismatch"] == 1
        assert isinstance(coordinator.registry[a].state, Active)

    def test_unknown_device_auto_registers(self):
        coordinator, keyring, _ = make_coordinator()
        device = DeviceId("site1", "newcomer")
        keyring.register(device, derive_key(3, device))
        send_alert(coordinator, keyring, device, make_alert(device, 1, 6.5), 1)
        assert device in coordinator.registry

    def test_unknown_device_rejected_when_auto_register_off(self):
        coordinator, keyring, _ = make_coordinator(
            config=CoordinatorConfig(auto_register=False)
        )
        device = DeviceId("site1", "newcomer")
        keyring.register(device, derive_key(3, device))
        send_alert(coordinator, keyring, device, make_alert(device, 1, 6.5), 1)
        assert device not in coordinator.registry
        assert coordinator.rejects["unknown_device"] == 1

    def test_alert_log_bounded(self):
        coordinator, keyring, _ = make_coordinator()
        device = register(coordinator, keyring, "dev-a")
        for i in range(80):
            send_alert(coordinator, keyring, device, make_alert(device, i, 1.0), i)
        assert len(coordinator.registry[device].alert_log) == 64

    def test_quarantine_preceded_by_notification(self):
        coordinator, keyring, _ = make_coordinator()
        device = register(coordinator, keyring, "dev-a")
        config = coordinator.config
        for i in range(config.alerts_to_quarantine):
            send_alert(coordinator, keyring, device, make_alert(device, i, 6.5), i)
        assert isinstance(coordinator.registry[device].state, Quarantined)
        notified = [n for n in coordinator.notifications.entries if n.device == str(device)]
        assert len(coordinator.directives_issued) == 1
        assert notified, "every quarantine has at least one admin notification"


class TestConsultLoop:
    def test_flush_only_on_interval(self):
        coordinator, keyring, _ = make_coordinator()
        device = register(coordinator, keyring, "dev-a")
        send_alert(coordinator, keyring, device, make_alert(device, 1, 6.5), 1)
        assert coordinator.flush_llm_queue(7) == []
        requests = coordinator.flush_llm_queue(30)
        assert len(requests) == 1

    def test_two_pending_incidents_two_requests(self):
        coordinator, keyring, _ = make_coordinator()
        a = register(coordinator, keyring, "dev-a")
        b = register(coordinator, keyring, "dev-b")
        send_alert(coordinator, keyring, a, make_alert(a, 1, 6.5), 1)
        send_alert(coordinator, keyring, b, make_alert(b, 2, 6.5), 2)
        assert len(coordinator.flush_llm_queue(30)) == 2

    def test_in_flight_guard_blocks_resend(self):
        coordinator, keyring, _ = make_coordinator()
        device = register(coordinator, keyring, "dev-a")
        send_alert(coordinator, keyring, device, make_alert(device, 1, 6.5), 1)
        assert len(coordinator.flush_llm_queue(30)) == 1
        # no provider wired: the consult stays in flight at the next boundary
        assert coordinator.flush_llm_queue(60) == []

    def test_unknown_verdict_keeps_incident_pending(self):
        coordinator, keyring, _ = make_coordinator(provider=MockProvider())
        device = register(coordinator, keyring, "dev-a")
        send_alert(coordinator, keyring, device, make_alert(device, 1, 6.5), 1)
        coordinator.flush_llm_queue(30)
        assert coordinator.registry[device].state == Suspect(1, 1)
        incident = next(iter(coordinator.incidents.values()))
        assert incident.status is IncidentStatus.PENDING_CONSULT
        # the next interval consults again
        assert len(coordinator.flush_llm_queue(60)) == 1

    def test_malicious_verdict_quarantines_and_records_exemplar(self):
        coordinator, keyring, broker = make_coordinator(provider=MockProvider())
        device = register(coordinator, keyring, "dev-a")
        send_alert(coordinator, keyring, device, make_alert(device, 1, 6.5), 1)
        incident = next(iter(coordinator.incidents.values()))
        coordinator.provider.script[incident_signature(incident)] = (
            '{"classification": "malicious", "threat_type": "port scan",'
            ' "vulnerability": "open ports", "mitigation": "isolate", "confidence": 0.9}'
        )
        coordinator.flush_llm_queue(30)
        assert coordinator.registry[device].state == Quarantined(30, "port scan")
        assert len(coordinator.store) == 1
        assert incident.status is IncidentStatus.RESOLVED
        directives = drain_directives(broker)
        assert any(d.action is DirectiveAction.QUARANTINE for d in directives)

    def test_benign_verdict_restores_active(self):
        coordinator, keyring, _ = make_coordinator()
        device = register(coordinator, keyring, "dev-a")
        send_alert(coordinator, keyring, device, make_alert(device, 1, 6.5), 1)
        incident = next(iter(coordinator.incidents.values()))
        verdict = ThreatVerdict(
            incident_id=incident.incident_id,
            classification=Classification.BENIGN,
            threat_type="",
            vulnerability="",
            mitigation="",
            confidence=0.8,
        )
        coordinator.apply_verdict(verdict)
        assert isinstance(coordinator.registry[device].state, Active)
        assert incident.status is IncidentStatus.RESOLVED
        assert len(coordinator.store) == 0

    def test_verdict_published_on_wire(self):
        coordinator, keyring, broker = make_coordinator()
        device = register(coordinator, keyring, "dev-a")
        send_alert(coordinator, keyring, device, make_alert(device, 1, 6.5), 1)
        incident = next(iter(coordinator.incidents.values()))
        coordinator.apply_verdict(
            ThreatVerdict(
                incident_id=incident.incident_id,
                classification=Classification.BENIGN,
                threat_type="",
                vulnerability="",
                mitigation="",
                confidence=0.6,
            )
        )
        deliveries = [
            d for d in broker.step() if str(d.topic) == "ti/v1/site1/verdict"
        ]
        assert len(deliveries) == 1
        assert keyring.verify_envelope(deliveries[0].envelope)
        verdict = decode(deliveries[0].envelope.payload)
        assert verdict.classification is Classification.BENIGN

    def test_unknown_incident_id_counted(self):
        coordinator, _, _ = make_coordinator()
        verdict = ThreatVerdict(
            incident_id=uuid.uuid4(),
            classification=Classification.BENIGN,
            threat_type="",
            vulnerability="",
            mitigation="",
            confidence=0.5,
        )
        coordinator.apply_verdict(verdict)
        assert coordinator.unknown_verdicts == 1


def send_heartbeat(coordinator, keyring, device, tick, windows=0, alerts=0):
    beat = Heartbeat(
        device=device, tick=tick, windows_processed=windows, alerts_emitted=alerts
    )
    coordinator.handle_heartbeat(keyring.sign_as(device, encode(beat)), tick)


class TestReinstatement:
    def quarantine(self, coordinator, keyring, device):
        send_alert(coordinator, keyring, device, make_alert(device, 0, 9.0), 0)
        assert isinstance(coordinator.registry[device].state, Quarantined)

    def test_requires_quarantined_state(self):
        coordinator, keyring, _ = make_coordinator()
        device = register(coordinator, keyring, "dev-a")
        with pytest.raises(StateError):
            coordinator.admin_reinstate(device, 5)

    def test_clean_streak_issues_reinstate(self):
        coordinator, keyring, broker = make_coordinator()
        device = register(coordinator, keyring, "dev-a")
        self.quarantine(coordinator, keyring, device)
        coordinator.admin_reinstate(device, 10)
        for i in range(coordinator.config.clean_heartbeats_required):
            send_heartbeat(coordinator, keyring, device, 20 + 10 * i, windows=i)
        assert isinstance(coordinator.registry[device].state, Active)
        actions = [d.action for d in coordinator.directives_issued]
        assert actions == [DirectiveAction.QUARANTINE, DirectiveAction.REINSTATE]

    def test_relapse_during_probation(self):
        coordinator, keyring, _ = make_coordinator()
        device = register(coordinator, keyring, "dev-a")
        self.quarantine(coordinator, keyring, device)
        coordinator.admin_reinstate(device, 10)
        for i in range(4):
            send_heartbeat(coordinator, keyring, device, 20 + 10 * i)
        send_alert(coordinator, keyring, device, make_alert(device, 60, 6.5), 60)
        state = coordinator.registry[device].state
        assert state == Quarantined(60, "relapse")

    def test_gap_heartbeat_does_not_count(self):
        coordinator, keyring, _ = make_coordinator()
        device = register(coordinator, keyring, "dev-a")
        send_heartbeat(coordinator, keyring, device, 0)
        self.quarantine(coordinator, keyring, device)
        coordinator.admin_reinstate(device, 10)
        send_heartbeat(coordinator, keyring, device, 40)  # gap 40 > interval 10
        assert coordinator.registry[device].state == Reinstating(0)
        send_heartbeat(coordinator, keyring, device, 50)
        assert coordinator.registry[device].state == Reinstating(1)


class TestNotificationSink:
    def test_file_mirror_is_jsonl(self, tmp_path):
        from edgeti.coordinator import Notification, NotificationSink

        path = tmp_path / "notifications.jsonl"
        sink = NotificationSink(path=path)
        sink.notify(Notification(3, "site1/dev-a", "triage", "suspect"))
        sink.notify(Notification(4, "site1/dev-a", "triage", "quarantine"))
        lines = path.read_text().splitlines()
        assert len(lines) == 2
        assert json.loads(lines[0])["detail"] == "suspect"

    def test_webhook_called_and_errors_swallowed(self):
        from edgeti.coordinator import Notification, NotificationSink

        seen = []

        def flaky(doc):
            seen.append(doc)
            raise RuntimeError("endpoint down")

        sink = NotificationSink(webhook=flaky)
        sink.notify(Notification(1, "site1/dev-a", "triage", "x"))
        sink.notify(Notification(2, "site1/dev-a", "triage", "y"))
        assert len(seen) == 2
        assert len(sink.entries) == 2

    def test_webhook_poster_posts_and_ignores_failures(self):
        import httpx

        from edgeti.coordinator import make_webhook_poster

        calls = []

        def handler(request):
            calls.append(json.loads(request.content))
            if len(calls) == 1:
                raise httpx.ConnectError("refused")
            return httpx.Response(200)

        client = httpx.Client(transport=httpx.MockTransport(handler))
        post = make_webhook_poster("https://hooks.example/notify", client=client)
        post({"tick": 1})
        post({"tick": 2})
        assert [c["tick"] for c in calls] == [1, 2]


class TestSuspectTimeout:
    def test_timeout_after_quiet_period(self):
        coordinator, keyring, _ = make_coordinator()
        device = register(coordinator, keyring, "dev-a")
        send_alert(coordinator, keyring, device, make_alert(device, 5, 6.5), 5)
        coordinator.on_tick(5 + CFG.suspect_window_ticks - 1)
        assert isinstance(coordinator.registry[device].state, Suspect)
        coordinator.on_tick(5 + CFG.suspect_window_ticks)
        assert isinstance(coordinator.registry[device].state, Active)
        incident = next(iter(coordinator.incidents.values()))
        assert incident.status is IncidentStatus.RESOLVED

"""Discrete-event scenario engine wiring the whole fabric together.

Each tick runs the same stage sequence: generate benign traffic, inject
attacks, feed agents (closing detector windows), step the broker and route
deliveries in order, sweep coordinator timers, then flush the consult
queue. Every source of randomness is derived from the scenario seed, so a
scenario maps to exactly one transcript and one report.
"""

from __future__ import annotations

from dataclasses import dataclass

from edgeti.errors import ScenarioError, StateError
from edgeti.agent import AgentConfig, EdgeAgent, seeded_uuid_source
from edgeti.coordinator import EdgeCoordinator, NotificationSink
from edgeti.domain.signing import KeyRing, derive_key
from edgeti.domain.types import AnomalyAlert, DeviceId
from edgeti.harness.report import AttackOutcome, MetricsReport
from edgeti.harness.scenario import ScenarioSpec
from edgeti.harness.stock import stock_inventory_digest, stock_rules
from edgeti.harness.traffic import gen_benign, inject_attack
from edgeti.intel import ExemplarStore, MockProvider
from edgeti.transport import (
    DeliveryPlan,
    SimBroker,
    TranscriptEntry,
    transcript_digest,
)


@dataclass
class RunArtifacts:
    """Everything a test or service might want to inspect after a run."""

    report: MetricsReport
    transcript: list[TranscriptEntry]
    alerts: list[AnomalyAlert]
    coordinator: EdgeCoordinator
    agents: dict[DeviceId, EdgeAgent]
    skipped_admin_actions: int


def run_scenario(spec: ScenarioSpec) -> MetricsReport:
    return run_scenario_artifacts(spec).report


def run_scenario_artifacts(spec: ScenarioSpec) -> RunArtifacts:
    problems = spec.validate()
    if problems:
        raise ScenarioError(problems)

    site = spec.site
    seed = spec.seed
    keyring = KeyRing()
    coordinator_id = DeviceId(site, "coordinator")
    keyring.register(coordinator_id, derive_key(seed, coordinator_id))

    broker = SimBroker(
        delay_ticks=spec.broker.delay_ticks,
        drop_plan=DeliveryPlan("drop", spec.broker.drop_seed, spec.broker.drop_rate),
        duplicate_plan=DeliveryPlan(
            "duplicate", spec.broker.duplicate_seed, spec.broker.duplicate_rate
        ),
    )

    provider = MockProvider(script=spec.llm_script, default=spec.llm_default)
    coordinator = EdgeCoordinator(
        site=site,
        keyring=keyring,
        bus=broker,
        config=spec.coordinator,
        provider=provider,
        inventory_digest=stock_inventory_digest(),
        exemplar_store=ExemplarStore(),
        notifications=NotificationSink(),
        uuid_source=seeded_uuid_source(seed, "coordinator"),
        severity_tau=spec.detector.tau,
    )
    coordinator_sub = str(coordinator_id)
    broker.subscribe(coordinator_sub, f"ti/v1/{site}/alert/#")
    broker.subscribe(coordinator_sub, f"ti/v1/{site}/heartbeat/#")

    rules = spec.rules if spec.rules is not None else stock_rules()
    agents: dict[DeviceId, EdgeAgent] = {}
    for dspec in spec.devices:
        device = dspec.device
        keyring.register(device, derive_key(seed, device))
        coordinator.register_device(device)
        agent = EdgeAgent(
            device=device,
            keyring=keyring,
            bus=broker,
            config=AgentConfig(
                detector=spec.detector, heartbeat_interval=spec.heartbeat_interval
            ),
            rules=rules,
            coordinator=coordinator_id,
            uuid_source=seeded_uuid_source(seed, str(device)),
        )
        broker.subscribe(str(device), f"ti/v1/{site}/directive")
        broker.subscribe(str(device), f"ti/v1/{site}/data/+")
        agents[device] = agent

    admin_by_tick: dict[int, list] = {}
    for action in spec.admin_actions:
        admin_by_tick.setdefault(action.tick, []).append(action)
    skipped_admin = 0

    all_alerts: list[AnomalyAlert] = []
    for tick in range(spec.ticks):
        for dspec in spec.devices:
            agent = agents[dspec.device]
            events = gen_benign(seed, dspec.profile, dspec.device, tick)
            for attack in spec.attacks:
                if attack.target == dspec.device:
                    events = inject_attack(events, attack, dspec.profile, tick)
            for event in events:
                agent.ingest_event(event)
            agent.close_windows_through(tick)
            if spec.data_interval and tick % spec.data_interval == 0:
                agent.publish_data(tick)
            if tick % spec.heartbeat_interval == 0:
                agent.heartbeat(tick)
        coordinator.now = tick
        for delivery in broker.step():
            if delivery.subscriber == coordinator_sub:
                coordinator.handle_delivery(delivery, tick)
            else:
                target = DeviceId.parse(delivery.subscriber)
                agents[target].handle_delivery(delivery, tick)
        for action in admin_by_tick.get(tick, ()):
            try:
                coordinator.admin_reinstate(action.device, tick)
            except StateError:
                skipped_admin += 1
        coordinator.on_tick(tick)
        coordinator.flush_llm_queue(tick)

    for agent in agents.values():
        all_alerts.extend(agent.alerts)
    all_alerts.sort(key=lambda a: (a.tick, str(a.device)))

    report = _metrics(spec, broker, coordinator, agents, all_alerts)
    return RunArtifacts(
        report=report,
        transcript=broker.transcript,
        alerts=all_alerts,
        coordinator=coordinator,
        agents=agents,
        skipped_admin_actions=skipped_admin,
    )


def _metrics(
    spec: ScenarioSpec,
    broker: SimBroker,
    coordinator: EdgeCoordinator,
    agents: dict[DeviceId, EdgeAgent],
    alerts: list[AnomalyAlert],
) -> MetricsReport:
    wt = spec.detector.window_ticks
    slack = 2 * wt

    outcomes = []
    for attack in spec.attacks:
        detection = None
        for alert in alerts:
            if alert.device == attack.target and alert.tick >= attack.start_tick:
                detection = alert.tick - attack.start_tick
                break
        containment = None
        block_ticks = []
        for device, agent in agents.items():
            if device == attack.target:
                continue
            blocked = agent.first_block_tick(attack.target, since_tick=attack.start_tick)
            if blocked is None:
                block_ticks = []
                break
            block_ticks.append(blocked)
        if block_ticks:
            containment = max(block_ticks) - attack.start_tick
        outcomes.append(
            AttackOutcome(
                kind=attack.kind.value,
                target=str(attack.target),
                start_tick=attack.start_tick,
                duration=attack.duration,
                detection_latency_ticks=detection,
                containment_ticks=containment,
            )
        )

    false_positives = 0
    for alert in alerts:
        in_any_window = any(
            attack.start_tick - slack <= alert.tick < attack.end_tick + slack
            for attack in spec.attacks
        )
        if not in_any_window:
            false_positives += 1

    blocked_messages = sum(
        counts.get("blocked", 0)
        for agent in agents.values()
        for counts in agent.drop_counts.values()
    )

    return MetricsReport(
        seed=spec.seed,
        ticks=spec.ticks,
        device_count=len(spec.devices),
        attacks=tuple(outcomes),
        false_positive_alerts=false_positives,
        blocked_message_count=blocked_messages,
        admin_notifications=len(coordinator.notifications.entries),
        transcript_digest=transcript_digest(broker.transcript),
    )

"""Deterministic scenario engine: traffic generation, attack injection,
full-fabric wiring, and metrics reporting."""

from edgeti.harness.report import (
    AttackOutcome,
    MetricsReport,
    format_structured_report,
    render_report,
    render_transcript_text,
    report_from_dict,
    report_to_dict,
)
from edgeti.harness.runner import RunArtifacts, run_scenario, run_scenario_artifacts
from edgeti.harness.scenario import (
    AdminAction,
    AttackKind,
    AttackSpec,
    BenignProfile,
    BrokerSpec,
    DeviceSpec,
    ScenarioSpec,
    load_scenario,
    scenario_from_dict,
    scenario_to_dict,
)
from edgeti.harness.stock import (
    STOCK_SCENARIOS,
    benign_calibration,
    s1_port_scan,
    s2_brute_force,
    s3_exfiltration,
    s4_log_tamper,
    stock_inventory_digest,
    stock_rules,
)
from edgeti.harness.traffic import gen_benign, inject_attack

__all__ = [
    "AdminAction",
    "AttackKind",
    "AttackOutcome",
    "AttackSpec",
    "BenignProfile",
    "BrokerSpec",
    "DeviceSpec",
    "MetricsReport",
    "RunArtifacts",
    "STOCK_SCENARIOS",
    "ScenarioSpec",
    "benign_calibration",
    "format_structured_report",
    "gen_benign",
    "inject_attack",
    "load_scenario",
    "render_report",
    "render_transcript_text",
    "report_from_dict",
    "report_to_dict",
    "run_scenario",
    "run_scenario_artifacts",
    "s1_port_scan",
    "s2_brute_force",
    "s3_exfiltration",
    "s4_log_tamper",
    "scenario_from_dict",
    "scenario_to_dict",
    "stock_inventory_digest",
    "stock_rules",
]

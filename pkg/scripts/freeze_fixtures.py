#!/usr/bin/env python3
"""Regenerate shipped scenario files and pinned regression fixtures.

Run from the repo root after an intentional behavior change:

    python3 scripts/freeze_fixtures.py

Writes scenarios/*.json (the stock scenario documents) and
tests/fixtures/*.json (pinned reports and benign false-positive counts).
Review the diff before committing: these fixtures define the regression
baseline the test suite holds the fabric to.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from edgeti.harness import (  # noqa: E402
    STOCK_SCENARIOS,
    benign_calibration,
    report_to_dict,
    run_scenario,
    scenario_to_dict,
)

CALIBRATION_SEEDS = range(10)


def main() -> None:
    scenario_dir = ROOT / "scenarios"
    fixture_dir = ROOT / "tests" / "fixtures"
    scenario_dir.mkdir(exist_ok=True)
    fixture_dir.mkdir(parents=True, exist_ok=True)

    reports = {}
    for name, builder in STOCK_SCENARIOS.items():
        spec = builder()
        path = scenario_dir / f"{name}.json"
        path.write_text(json.dumps(scenario_to_dict(spec), indent=2, sort_keys=True) + "\n")
        reports[name] = report_to_dict(run_scenario(spec))
        print(f"wrote {path} and ran it: {reports[name]['attacks'][0]}")

    (fixture_dir / "stock_reports.json").write_text(
        json.dumps(reports, indent=2, sort_keys=True) + "\n"
    )

    fp_counts = {}
    for seed in CALIBRATION_SEEDS:
        fp_counts[str(seed)] = run_scenario(benign_calibration(seed)).false_positive_alerts
        print(f"calibration seed {seed}: {fp_counts[str(seed)]} false positives")
    (fixture_dir / "benign_fp_counts.json").write_text(
        json.dumps(fp_counts, indent=2, sort_keys=True) + "\n"
    )
    print("fixtures frozen")


if __name__ == "__main__":
    main()

"""Operator entry point.

Subcommands:

    sim     run a scenario file through the service layer and write the report
    replay  re-render an exported delivery transcript
    agent   run an edge agent against a real MQTT broker (reads events on stdin)
    server  serve the HTTP scenario service (optionally bridging a real broker)

Exit codes: 0 success, 1 validation or I/O error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from edgeti.errors import FabricError, ScenarioError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edgeti",
        description="Edge threat-intelligence fabric: simulate, replay, or run live components.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("sim", help="run a scenario and write its report")
    sim.add_argument("--scenario", required=True, help="scenario JSON file")
    sim.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    sim.add_argument("--report", default=None, help="report output path (default stdout)")
    sim.add_argument(
        "--format", choices=("text", "structured"), default="text", help="report format"
    )
    sim.add_argument(
        "--transcript", default=None, help="also export the delivery transcript (JSONL)"
    )
    sim.add_argument(
        "--server", default=None, help="run against a remote service instead of in-process"
    )

    replay = sub.add_parser("replay", help="re-render an exported transcript")
    replay.add_argument("--transcript", required=True, help="transcript JSONL file")
    replay.add_argument(
        "--server", default=None, help="run against a remote service instead of in-process"
    )

    agent = sub.add_parser("agent", help="run an edge agent against a real broker")
    agent.add_argument("--config", required=True, help="agent config JSON file")

    server = sub.add_parser("server", help="serve the HTTP scenario service")
    server.add_argument("--config", required=True, help="server config JSON file")

    return parser


def parse_args(argv: list[str]) -> argparse.Namespace:
    return build_parser().parse_args(argv)


def _fail(message: str) -> int:
    print(f"edgeti: {message}", file=sys.stderr)
    return 1


def _read_json(path: str):
    try:
        return json.loads(Path(path).read_text("utf-8"))
    except OSError as exc:
        raise FabricError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise FabricError(f"{path} is not valid JSON: {exc}") from None


def _client(server: str | None):
    from edgeti.service.client import ServiceClient

    return ServiceClient.remote(server) if server else ServiceClient.in_process()


def _run_sim(ns: argparse.Namespace) -> int:
    try:
        doc = _read_json(ns.scenario)
    except FabricError as exc:
        return _fail(str(exc))
    client = _client(ns.server)
    try:
        result = client.run_simulation(
            doc,
            seed=ns.seed,
            include_text=(ns.format == "text"),
            include_transcript=bool(ns.transcript),
        )
    except ScenarioError as exc:
        for problem in exc.problems:
            print(f"edgeti: scenario error: {problem}", file=sys.stderr)
        return 1
    except FabricError as exc:
        return _fail(str(exc))
    if ns.format == "text":
        rendered = result["text"]
    else:
        from edgeti.harness.report import format_structured_report

        rendered = format_structured_report(result["report"])
    if ns.transcript:
        try:
            Path(ns.transcript).write_text(result["transcript"] or "", "utf-8")
        except OSError as exc:
            return _fail(f"cannot write {ns.transcript}: {exc}")
    if ns.report:
        try:
            Path(ns.report).write_text(rendered, "utf-8")
        except OSError as exc:
            return _fail(f"cannot write {ns.report}: {exc}")
    else:
        sys.stdout.write(rendered)
    return 0


def _run_replay(ns: argparse.Namespace) -> int:
    try:
        text = Path(ns.transcript).read_text("utf-8")
    except OSError as exc:
        return _fail(f"cannot read {ns.transcript}: {exc}")
    client = _client(ns.server)
    try:
        sys.stdout.write(client.render_replay(text))
    except FabricError as exc:
        return _fail(str(exc))
    return 0


def _run_agent(ns: argparse.Namespace) -> int:
    try:
        config = _read_json(ns.config)
    except FabricError as exc:
        return _fail(str(exc))
    try:
        from edgeti.live import run_live_agent

        run_live_agent(config)
    except FabricError as exc:
        return _fail(str(exc))
    except KeyboardInterrupt:
        pass
    return 0


def _run_server(ns: argparse.Namespace) -> int:
    try:
        config = _read_json(ns.config)
    except FabricError as exc:
        return _fail(str(exc))
    try:
        from edgeti.live import run_server

        run_server(config)
    except FabricError as exc:
        return _fail(str(exc))
    except KeyboardInterrupt:
        pass
    return 0


def run(ns: argparse.Namespace) -> int:
    if ns.command == "sim":
        return _run_sim(ns)
    if ns.command == "replay":
        return _run_replay(ns)
    if ns.command == "agent":
        return _run_agent(ns)
    if ns.command == "server":
        return _run_server(ns)
    return 2


def main(argv: list[str] | None = None) -> None:
    ns = parse_args(sys.argv[1:] if argv is None else argv)
    try:
        sys.exit(run(ns))
    except BrokenPipeError:
        sys.exit(0)


if __name__ == "__main__":
    main()

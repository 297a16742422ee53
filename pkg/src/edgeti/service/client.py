"""Thin client for the scenario service.

The CLI talks to the service through this client: either a remote base URL
over real HTTP, or the ASGI app mounted in-process (no sockets), which
keeps the default workflow hermetic while exercising the same endpoints.
"""

from __future__ import annotations

import asyncio
from typing import Any

import httpx

from edgeti.errors import ScenarioError, TransportError


class ServiceClient:
    def __init__(self, base_url: str | None = None, app=None) -> None:
        if (base_url is None) == (app is None):
            raise ValueError("provide exactly one of base_url or app")
        self._base_url = base_url
        self._app = app

    @classmethod
    def in_process(cls) -> "ServiceClient":
        from edgeti.service.app import create_app

        return cls(app=create_app())

    @classmethod
    def remote(cls, base_url: str) -> "ServiceClient":
        return cls(base_url=base_url.rstrip("/"))

    def _post(self, path: str, body: dict[str, Any]) -> dict[str, Any]:
        if self._app is not None:
            async def call() -> httpx.Response:
                transport = httpx.ASGITransport(app=self._app)
                async with httpx.AsyncClient(
                    transport=transport, base_url="http://edgeti.local"
                ) as client:
                    return await client.post(path, json=body)

            response = asyncio.run(call())
        else:
            try:
                response = httpx.post(f"{self._base_url}{path}", json=body, timeout=300.0)
            except httpx.HTTPError as exc:
                raise TransportError(f"service request failed: {exc}") from None
        if response.status_code == 400:
            detail = response.json().get("detail", ["request rejected"])
            if isinstance(detail, str):
                detail = [detail]
            raise ScenarioError([str(d) for d in detail])
        if response.status_code != 200:
            raise TransportError(f"service returned {response.status_code}")
        return response.json()

    def run_simulation(
        self,
        scenario: dict[str, Any],
        seed: int | None = None,
        include_text: bool = False,
        include_transcript: bool = False,
    ) -> dict[str, Any]:
        return self._post(
            "/simulations/run",
            {
                "scenario": scenario,
                "seed": seed,
                "include_text": include_text,
                "include_transcript": include_transcript,
            },
        )

    def validate_scenario(self, scenario: dict[str, Any]) -> tuple[bool, list[str]]:
        result = self._post("/scenarios/validate", {"scenario": scenario})
        return result["valid"], result["errors"]

    def render_replay(self, transcript: str) -> str:
        return self._post("/replay/render", {"transcript": transcript})["text"]

"""FastAPI service wrapping the scenario harness, plus its thin client."""

from edgeti.service.client import ServiceClient

__all__ = ["ServiceClient"]

"""Distributed edge threat-intelligence fabric.

Edge agents run lightweight streaming anomaly detection and publish signed
alerts over a pub/sub transport; a coordinating edge server triages alerts
through a quarantine state machine and consults an LLM provider about
unknown threats using in-context exemplars; a deterministic harness drives
the whole fabric through attack scenarios and measures detection and
containment.
"""

__version__ = "0.1.0"

"""Weekly breakdown-risk pipeline for vehicle fleets.

Stages: ingest sub-work-order CSVs, expand them into a per-vehicle weekly
panel, encode features, fit a risk model, evaluate with the separation
ratio, and roll out the proactive-repair policy. Each stage is importable
on its own; the `fleetrisk` CLI wires them together.
"""

__version__ = "0.1.0"

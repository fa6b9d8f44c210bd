"""Optimistic exploration for tabular episodic MDPs."""

from . import mdp, agent, harness, schemas, environments, concentration  # noqa: F401

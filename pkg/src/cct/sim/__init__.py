"""Deterministic multi-device simulator and privacy auditor."""

from cct.sim.audit import audit_transcript, state_digest
from cct.sim.encounters import generate_encounters, pair_threshold
from cct.sim.oracle import oracle_notified
from cct.sim.runner import SimReport, run_scenario
from cct.sim.scenario import (
    EncounterEvent,
    InfectionSpec,
    ScenarioConfig,
    fig1_scenario,
    flush_scenario,
    material,
    poll_intervals,
    scale_scenario,
)

__all__ = [
    "EncounterEvent",
    "InfectionSpec",
    "ScenarioConfig",
    "SimReport",
    "audit_transcript",
    "fig1_scenario",
    "flush_scenario",
    "generate_encounters",
    "material",
    "oracle_notified",
    "pair_threshold",
    "poll_intervals",
    "run_scenario",
    "scale_scenario",
    "state_digest",
]

"""Brute-force notification ground truth.

Computed straight off the encounter list and the scenario schedule, with no
identifiers, no cryptography, and no protocol code: device d must end up
notified iff some infected-and-uploading device u met d at an interval that
survives every retention window between the encounter, u's upload, and one
of d's polls. The protocol pipeline is correct exactly when it reproduces
this set.
"""

from __future__ import annotations

from typing import Iterable

from cct.sim.scenario import EncounterEvent, ScenarioConfig, poll_intervals


def oracle_notified(
    config: ScenarioConfig, encounters: Iterable[EncounterEvent]
) -> set[int]:
    uploaders = [
        (spec.device, spec.test_interval) for spec in config.infected if spec.uploads
    ]
    if not uploaders:
        return set()
    polls = poll_intervals(config)
    retention = config.retention
    notified: set[int] = set()
    for event in encounters:
        for uploader, upload_interval in uploaders:
            if uploader == event.device_i:
                other = event.device_j
            elif uploader == event.device_j:
                other = event.device_i
            else:
                continue
            # the encounter must be inside the uploader's own log window
            if not upload_interval - retention <= event.interval <= upload_interval:
                continue
            # some poll of the other device must see both the store entry
            # (alive until upload + retention) and its own log entry
            if any(
                upload_interval <= tau <= upload_interval + retention
                and event.interval >= tau - retention
                for tau in polls
            ):
                notified.add(other)
    return notified

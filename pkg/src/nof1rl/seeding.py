"""Order-independent random streams keyed by (root seed, scenario, patient, purpose)."""
from __future__ import annotations

import numpy as np

_TAGS = {"truth": 0, "pre_b": 1, "step": 2, "fit": 3, "policy": 4}


def seed_sequence(root_seed: int, scenario_index: int, patient_id: int, tag: str,
                  *extra: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(
        int(root_seed), spawn_key=(int(scenario_index), int(patient_id), _TAGS[tag], *map(int, extra))
    )


def stream(root_seed, scenario_index, patient_id, tag, *extra) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(root_seed, scenario_index, patient_id, tag, *extra))


def derive_seed(root_seed, scenario_index, patient_id, tag, *extra) -> int:
    """A 63-bit integer seed, for places that record the seed they used."""
    state = seed_sequence(root_seed, scenario_index, patient_id, tag, *extra).generate_state(
        1, dtype=np.uint64)
    return int(state[0] >> np.uint64(1))

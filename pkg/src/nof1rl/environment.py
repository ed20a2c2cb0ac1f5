"""Synthetic patients: ground-truth pain reduction, pain dynamics, non-adherence."""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .core import PAIN_MAX, PAIN_MIN, Context, ExerciseAction, PatientParams, linear_mean

SIGMA_TRUTH = 1.0
PAIN_PERSISTENCE = 0.5
PAIN_RELIEF_CARRYOVER = 0.5
PAIN_NOISE_SD = 0.5
BASELINE_PAIN_RANGE = (3.0, 8.0)
DROP_PROBABILITY = 0.5


class Scenario(str, enum.Enum):
    I = "I"
    II = "II"
    III = "III"
    IV = "IV"
    V = "V"
    VI = "VI"
    VII = "VII"

    @property
    def zeroed(self) -> frozenset[str]:
        """Parameter groups forced to zero in the ground truth."""
        return _ZEROED.get(self, frozenset())

    @property
    def index(self) -> int:
        return list(Scenario).index(self)


_ZEROED = {
    Scenario.III: frozenset({"tau"}),
    Scenario.IV: frozenset({"alpha", "beta"}),
    Scenario.V: frozenset({"gamma", "delta"}),
    Scenario.VI: frozenset({"alpha", "beta", "gamma", "delta"}),
}


@dataclass(frozen=True)
class PatientTruth:
    params: PatientParams
    patient_id: int
    baseline_pain: float


@dataclass(frozen=True)
class PainState:
    current_pain: float

    def __post_init__(self):
        if not PAIN_MIN <= self.current_pain <= PAIN_MAX:
            raise ValueError(f"pain {self.current_pain} outside [{PAIN_MIN}, {PAIN_MAX}]")


def draw_patient(scenario: Scenario, rng: np.random.Generator, n_types: int = 4,
                 patient_id: int = 0) -> PatientTruth:
    scenario = Scenario(scenario)
    coefs = rng.standard_normal(6 + n_types)
    baseline = float(rng.uniform(*BASELINE_PAIN_RANGE))
    params = PatientParams.from_vector(coefs, sigma=SIGMA_TRUTH)
    zeroed = scenario.zeroed
    if "tau" in zeroed:
        params = replace(params, tau=(0.0,) * n_types)
    params = replace(params, **{name: 0.0 for name in zeroed - {"tau"}})
    return PatientTruth(params, patient_id, baseline)


def true_delta_pain(scenario: Scenario, truth: PatientTruth, context: Context,
                    action: ExerciseAction, noise: float) -> float:
    """Realized pain reduction; ``noise`` is a standard-normal variate from the caller."""
    if Scenario(scenario) is Scenario.I:
        return float(noise)
    return linear_mean(truth.params, context, action) + float(noise) * truth.params.sigma


def adherent(scenario: Scenario, truth: PatientTruth, context: Context, action: ExerciseAction,
             rng: np.random.Generator) -> bool:
    """Whether the outcome reaches the agent.

    Only in Scenario VII can it fail: an exercise the model says would raise
    pain is withheld with probability one half.  One uniform variate is
    consumed per call in every scenario so that streams stay aligned.
    """
    u = rng.random()
    if Scenario(scenario) is not Scenario.VII:
        return True
    if linear_mean(truth.params, context, action) < 0:
        return bool(u >= DROP_PROBABILITY)
    return True


def next_pain(state: PainState, realized_delta: float, rng: np.random.Generator,
              baseline_pain: float) -> PainState:
    """Next day's pre-exercise pain: mean reversion to baseline plus carry-over of relief."""
    pain = (PAIN_PERSISTENCE * state.current_pain
            + (1.0 - PAIN_PERSISTENCE) * baseline_pain
            - PAIN_RELIEF_CARRYOVER * realized_delta
            + PAIN_NOISE_SD * rng.standard_normal())
    return PainState(float(np.clip(pain, PAIN_MIN, PAIN_MAX)))

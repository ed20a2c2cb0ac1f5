"""Per-patient trial timeline: baseline, fixed phase A and adaptive phase B."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import seeding
from .agent import (
    PolicyDecision,
    SamplerConfig,
    SamplerError,
    fit_posterior,
    selection_probabilities,
    thompson_select,
)
from .core import ActionSet, HistoryRecord, Phase, default_action_set, rolling_context
from .environment import (
    PainState,
    PatientTruth,
    Scenario,
    adherent,
    draw_patient,
    next_pain,
    true_delta_pain,
)

MIN_POLICY_DRAWS = 200
SAMPLER_RETRIES = 3


class Design(str, enum.Enum):
    AB = "AB"
    BA = "BA"


class TrialError(RuntimeError):
    def __init__(self, patient_id: int, step: int, cause: Exception):
        super().__init__(f"patient {patient_id}, B-phase step {step}: {cause}")
        self.patient_id = patient_id
        self.step = step


@dataclass(frozen=True)
class TrialConfig:
    scenario: Scenario = Scenario.II
    design: Design = Design.AB
    root_seed: int = 0
    baseline_days: int = 7
    phase_days: int = 14
    decisions_per_day: int = 1
    sampler: SamplerConfig = SamplerConfig()
    action_set: ActionSet = field(default_factory=default_action_set)

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        object.__setattr__(self, "design", Design(self.design))
        for name in ("baseline_days", "phase_days", "decisions_per_day"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.sampler.kept_draws * self.sampler.chains < MIN_POLICY_DRAWS:
            raise ValueError(f"policy needs at least {MIN_POLICY_DRAWS} posterior draws")

    @property
    def baseline_steps(self) -> int:
        return self.baseline_days * self.decisions_per_day

    @property
    def phase_steps(self) -> int:
        return self.phase_days * self.decisions_per_day


@dataclass
class TrialResult:
    patient_id: int
    scenario: Scenario
    design: Design
    pre_b_records: list[HistoryRecord]
    adaptive_records: list[HistoryRecord]
    counterfactual_fixed_deltas: list[float]
    counterfactual_fixed_indices: list[int]
    decisions: list[PolicyDecision]
    regret_series: list[float]

    @property
    def final_regret(self) -> float:
        return self.regret_series[-1]


def fixed_policy(t: int, action_set: ActionSet) -> int:
    """Round-robin over the action set; ``t`` counts decision points from 1 within a phase."""
    if t < 1:
        raise ValueError("t must be >= 1")
    return (t - 1) % len(action_set)


def cumulative_regret(result: TrialResult, t: int) -> float:
    """Fixed-arm minus adaptive-arm pain reduction summed over the first ``t`` B-phase steps."""
    if not 1 <= t <= len(result.regret_series):
        raise IndexError(f"t={t} outside 1..{len(result.regret_series)}")
    return result.regret_series[t - 1]


def patient_truth(scenario: Scenario, patient_id: int, root_seed: int,
                  action_set: ActionSet | None = None) -> PatientTruth:
    """Ground truth for one patient; independent of design so A-B and B-A pair up."""
    scenario = Scenario(scenario)
    n_types = (action_set or default_action_set()).n_types
    rng = seeding.stream(root_seed, scenario.index, patient_id, "truth")
    return draw_patient(scenario, rng, n_types=n_types, patient_id=patient_id)


def run_trial(truth: PatientTruth, cfg: TrialConfig) -> TrialResult:
    """Simulate one patient.

    Outcome noise in phase B is keyed by the B-phase step, so the adaptive
    arm and the counterfactual fixed arm share each variate, and the two
    designs see the same variates at the same B-phase step.
    """
    actions = cfg.action_set
    scen, pid, root = cfg.scenario, truth.patient_id, cfg.root_seed
    pre_rng = seeding.stream(root, scen.index, pid, "pre_b")
    pain = PainState(float(np.clip(truth.baseline_pain, 0.0, 10.0)))
    performed: list[HistoryRecord] = []

    fixed_phases = [(Phase.BASELINE, cfg.baseline_steps)]
    if cfg.design is Design.AB:
        fixed_phases.append((Phase.FIXED_A, cfg.phase_steps))
    t = 0
    for phase, n_steps in fixed_phases:
        for k in range(1, n_steps + 1):
            t += 1
            ctx = rolling_context(performed, pain.current_pain, actions)
            j = fixed_policy(k, actions)
            delta = true_delta_pain(scen, truth, ctx, actions[j], pre_rng.standard_normal())
            performed.append(HistoryRecord(t, phase, j, ctx, delta, True))
            pain = next_pain(pain, delta, pre_rng, truth.baseline_pain)
    pre_b = list(performed)

    adaptive: list[HistoryRecord] = []
    fixed_deltas, fixed_idx, decisions, regret = [], [], [], []
    running = 0.0
    for k in range(1, cfg.phase_steps + 1):
        t += 1
        ctx = rolling_context(performed, pain.current_pain, actions)
        draws = _fit_with_retries(performed, cfg, pid, k)
        policy_seed = seeding.derive_seed(root, scen.index, pid, "policy", k)
        policy_rng = np.random.default_rng(policy_seed)
        probs = selection_probabilities(draws, ctx, actions, policy_rng)
        j = thompson_select(probs, policy_rng)
        decisions.append(PolicyDecision(probs, j, policy_seed))

        step_rng = seeding.stream(root, scen.index, pid, "step", k)
        z = step_rng.standard_normal()
        delta = true_delta_pain(scen, truth, ctx, actions[j], z)
        fed = adherent(scen, truth, ctx, actions[j], step_rng)
        jf = fixed_policy(k, actions)
        delta_fixed = true_delta_pain(scen, truth, ctx, actions[jf], z)

        rec = HistoryRecord(t, Phase.ADAPTIVE_B, j, ctx, delta, fed)
        adaptive.append(rec)
        performed.append(rec)
        fixed_deltas.append(delta_fixed)
        fixed_idx.append(jf)
        running += delta_fixed - delta
        regret.append(running)
        pain = next_pain(pain, delta, step_rng, truth.baseline_pain)

    return TrialResult(pid, scen, cfg.design, pre_b, adaptive, fixed_deltas, fixed_idx,
                       decisions, regret)


def _fit_with_retries(history, cfg: TrialConfig, patient_id: int, step: int):
    last = None
    for attempt in range(SAMPLER_RETRIES):
        seed = seeding.derive_seed(cfg.root_seed, cfg.scenario.index, patient_id, "fit", step,
                                   attempt)
        try:
            return fit_posterior(history, cfg.action_set, cfg.sampler.with_seed(seed))
        except SamplerError as exc:
            last = exc
    raise TrialError(patient_id, step, last)


def simulate_patient(patient_id: int, cfg: TrialConfig) -> TrialResult:
    truth = patient_truth(cfg.scenario, patient_id, cfg.root_seed, cfg.action_set)
    return run_trial(truth, cfg)

"""Evaluation metrics and per-cell aggregation across simulated patients."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .agent import PolicyDecision
from .core import ActionSet, default_action_set
from .environment import Scenario
from .trial import Design, TrialResult


@dataclass(frozen=True)
class ScenarioSummary:
    scenario: Scenario
    design: Design
    mean_regret: float
    regret_q75: float
    entropy_type: float
    std_duration: float
    std_intensity: float
    mean_max_prob: float
    mean_min_prob: float
    n_patients: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scenario"] = self.scenario.value
        d["design"] = self.design.value
        return d


def shannon_entropy(counts) -> float:
    """Entropy in nats of the empirical distribution given by ``counts``."""
    counts = np.asarray(counts, dtype=float)
    if np.any(counts < 0):
        raise ValueError("counts must be non-negative")
    total = counts.sum()
    if total <= 0:
        raise ValueError("need at least one positive count")
    p = counts[counts > 0] / total
    return float(-(p * np.log(p)).sum())


def dispersion(values) -> float:
    """Population standard deviation."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("dispersion of an empty sequence")
    # centring on one element first makes constant input exactly 0
    return float((values - values.flat[0]).std())


def probability_extremes(decisions: Sequence[PolicyDecision]) -> tuple[float, float]:
    if not decisions:
        raise ValueError("no decisions")
    probs = [d.selection_probs for d in decisions]
    return (float(np.mean([p.max() for p in probs])), float(np.mean([p.min() for p in probs])))


def selection_diversity(indices: Sequence[int], action_set: ActionSet) -> tuple[float, float, float]:
    """(type entropy, duration std, intensity std) of one patient's selected actions."""
    chosen = [action_set[i] for i in indices]
    counts = np.bincount([a.type_id for a in chosen], minlength=action_set.n_types)
    return (shannon_entropy(counts),
            dispersion([a.duration_norm for a in chosen]),
            dispersion([a.intensity for a in chosen]))


def quantile(values, q: float) -> float:
    """Quantile by linear interpolation between order statistics."""
    return float(np.quantile(np.asarray(values, dtype=float), q, method="linear"))


def summarize(results: Sequence[TrialResult], action_set: ActionSet | None = None,
              arm: str = "adaptive") -> ScenarioSummary:
    """Aggregate one scenario/design cell.

    Diversity statistics are computed per patient over the B-phase selections
    and then averaged.  ``arm="fixed"`` computes them for the counterfactual
    fixed schedule instead; probability extremes always refer to the agent.
    """
    if not results:
        raise ValueError("no results to summarize")
    cells = {(r.scenario, r.design) for r in results}
    if len(cells) != 1:
        raise ValueError(f"results mix scenario/design cells: {sorted(cells)}")
    action_set = action_set or default_action_set()
    results = sorted(results, key=lambda r: r.patient_id)

    finals = [r.final_regret for r in results]
    per_patient = []
    for r in results:
        idx = ([rec.action_index for rec in r.adaptive_records] if arm == "adaptive"
               else r.counterfactual_fixed_indices)
        per_patient.append(selection_diversity(idx, action_set))
    ent, sd_dur, sd_int = np.mean(per_patient, axis=0)
    mx, mn = probability_extremes([d for r in results for d in r.decisions])
    scenario, design = cells.pop()
    return ScenarioSummary(scenario, design, float(np.mean(finals)), quantile(finals, 0.75),
                           float(ent), float(sd_dur), float(sd_int), mx, mn, len(results))


def regret_quantiles(results: Sequence[TrialResult]) -> list[dict]:
    """Per B-phase step: median and quartiles of cumulative regret across patients."""
    series = np.array([r.regret_series for r in sorted(results, key=lambda r: r.patient_id)])
    rows = []
    for k in range(series.shape[1]):
        col = series[:, k]
        rows.append({"t": k + 1, "median": quantile(col, 0.5), "q25": quantile(col, 0.25),
                     "q75": quantile(col, 0.75)})
    return rows


def fixed_cycle_reference(action_set: ActionSet | None = None) -> tuple[float, float, float]:
    """(type entropy, duration std, intensity std) of one full round-robin cycle.

    Each action appears exactly once, so these are the diversity statistics
    the fixed schedule converges to.
    """
    action_set = action_set or default_action_set()
    return selection_diversity(range(len(action_set)), action_set)

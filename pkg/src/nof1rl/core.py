"""Domain types and the linear pain-reduction model shared by agent and environment."""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

PAIN_MIN, PAIN_MAX = 0.0, 10.0
ROLLING_WINDOW = 3
N_COEFS = 6  # alpha, beta, gamma, delta, eta, kappa


class Phase(str, enum.Enum):
    BASELINE = "Baseline"
    FIXED_A = "FixedA"
    ADAPTIVE_B = "AdaptiveB"


@dataclass(frozen=True)
class ExerciseAction:
    type_id: int
    intensity: float
    duration_norm: float
    duration_min: int
    label: str = ""

    def __post_init__(self):
        if self.type_id < 0:
            raise ValueError(f"type_id must be non-negative, got {self.type_id}")
        if not 0.0 <= self.intensity <= 1.0:
            raise ValueError(f"intensity must lie in [0, 1], got {self.intensity}")
        if not 0.0 < self.duration_norm <= 1.0:
            raise ValueError(f"duration_norm must lie in (0, 1], got {self.duration_norm}")
        if self.duration_min <= 0:
            raise ValueError(f"duration_min must be positive, got {self.duration_min}")


@dataclass(frozen=True)
class ActionSet:
    """Ordered, immutable set of recommendable exercises.

    Durations are normalized by the longest exercise in the set once, at
    construction; use :meth:`from_records` to build one from raw minutes.
    """

    actions: tuple[ExerciseAction, ...]

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(self.actions))
        if not self.actions:
            raise ValueError("action set must be non-empty")
        types = {a.type_id for a in self.actions}
        if types != set(range(len(types))):
            raise ValueError(f"type ids must form 0..n_types-1, got {sorted(types)}")
        longest = max(a.duration_min for a in self.actions)
        for a in self.actions:
            if abs(a.duration_norm - a.duration_min / longest) > 1e-9:
                raise ValueError(
                    f"{a.label!r}: duration_norm {a.duration_norm} != {a.duration_min}/{longest}"
                )

    @classmethod
    def from_records(cls, records: Sequence[dict]) -> "ActionSet":
        """Build from dicts with keys ``label``, ``type_id``, ``intensity``, ``duration_min``."""
        records = list(records)
        if not records:
            raise ValueError("action set must be non-empty")
        longest = max(int(r["duration_min"]) for r in records)
        return cls(tuple(
            ExerciseAction(
                type_id=int(r["type_id"]),
                intensity=float(r["intensity"]),
                duration_norm=int(r["duration_min"]) / longest,
                duration_min=int(r["duration_min"]),
                label=str(r.get("label", "")),
            )
            for r in records
        ))

    @property
    def n_types(self) -> int:
        return len({a.type_id for a in self.actions})

    def __len__(self):
        return len(self.actions)

    def __getitem__(self, i) -> ExerciseAction:
        return self.actions[i]

    def __iter__(self):
        return iter(self.actions)

    def permuted(self, order: Sequence[int]) -> "ActionSet":
        return ActionSet(tuple(self.actions[i] for i in order))

    def to_records(self) -> list[dict]:
        return [
            {"label": a.label, "type_id": a.type_id, "intensity": a.intensity,
             "duration_min": a.duration_min}
            for a in self.actions
        ]


# The eight exercises used throughout the simulation study.
DEFAULT_ACTION_RECORDS = (
    {"label": "Slow jogging", "type_id": 0, "intensity": 0.3, "duration_min": 30},
    {"label": "Jogging", "type_id": 0, "intensity": 0.5, "duration_min": 30},
    {"label": "Fast jogging", "type_id": 0, "intensity": 0.7, "duration_min": 30},
    {"label": "HIIT", "type_id": 1, "intensity": 1.0, "duration_min": 6},
    {"label": "HIIT", "type_id": 1, "intensity": 1.0, "duration_min": 12},
    {"label": "HIIT", "type_id": 1, "intensity": 1.0, "duration_min": 18},
    {"label": "Swimming", "type_id": 2, "intensity": 0.5, "duration_min": 45},
    {"label": "Yoga", "type_id": 3, "intensity": 0.1, "duration_min": 60},
)


def default_action_set() -> ActionSet:
    return ActionSet.from_records(DEFAULT_ACTION_RECORDS)


def load_action_set(path) -> ActionSet:
    """Read an action set from a JSON or YAML file.

    The file holds either a list of action records or a mapping with an
    ``actions`` key holding that list.
    """
    text = Path(path).read_text()
    if str(path).endswith((".yaml", ".yml")):
        import yaml
        data = yaml.safe_load(text)
    else:
        data = json.loads(text)
    if isinstance(data, dict):
        data = data["actions"]
    return ActionSet.from_records(data)


@dataclass(frozen=True)
class Context:
    pain: float
    mean_intensity_3: float = 0.0
    mean_duration_3: float = 0.0

    def __post_init__(self):
        vals = (self.pain, self.mean_intensity_3, self.mean_duration_3)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError(f"context values must be finite, got {vals}")


@dataclass(frozen=True)
class PatientParams:
    alpha: float
    beta: float
    gamma: float
    delta: float
    eta: float
    kappa: float
    tau: tuple[float, ...]
    sigma: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "tau", tuple(float(t) for t in self.tau))
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    @property
    def coefs(self) -> np.ndarray:
        """Coefficient vector in design-matrix column order (alpha..kappa, tau...)."""
        return np.array([self.alpha, self.beta, self.gamma, self.delta, self.eta, self.kappa,
                         *self.tau])

    @classmethod
    def from_vector(cls, coefs, sigma: float = 1.0) -> "PatientParams":
        c = [float(v) for v in coefs]
        return cls(*c[:N_COEFS], tau=tuple(c[N_COEFS:]), sigma=float(sigma))

    @classmethod
    def zeros(cls, n_types: int, sigma: float = 1.0) -> "PatientParams":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, tau=(0.0,) * n_types, sigma=sigma)


@dataclass(frozen=True)
class HistoryRecord:
    t: int
    phase: Phase
    action_index: int
    context: Context
    delta_pain: float
    fed_back: bool = True

    def __post_init__(self):
        if not np.isfinite(self.delta_pain):
            raise ValueError(f"delta_pain must be finite, got {self.delta_pain}")


def burden(action: ExerciseAction) -> float:
    return action.intensity * action.duration_norm


def rolling_context(history: Sequence[HistoryRecord], current_pain: float,
                    action_set: ActionSet) -> Context:
    """Context for the next decision: current pain plus the mean intensity and
    duration over the last three performed exercises.

    Every record counts as performed, including ones withheld from the agent.
    With no history both means are 0.
    """
    if not PAIN_MIN <= current_pain <= PAIN_MAX:
        raise ValueError(f"pain must lie in [{PAIN_MIN}, {PAIN_MAX}], got {current_pain}")
    recent = [action_set[r.action_index] for r in history[-ROLLING_WINDOW:]]
    if not recent:
        return Context(float(current_pain), 0.0, 0.0)
    return Context(
        float(current_pain),
        float(np.mean([a.intensity for a in recent])),
        float(np.mean([a.duration_norm for a in recent])),
    )


def feature_row(context: Context, action: ExerciseAction, n_types: int) -> np.ndarray:
    """Design-matrix row; its dot product with :attr:`PatientParams.coefs` is the model mean."""
    row = np.zeros(N_COEFS + n_types)
    b = burden(action)
    row[:N_COEFS] = (
        action.intensity,
        context.mean_intensity_3 * action.intensity,
        action.duration_norm,
        context.mean_duration_3 * action.duration_norm,
        b,
        context.pain * b,
    )
    row[N_COEFS + action.type_id] = 1.0
    return row


def design_matrix(contexts: Sequence[Context], actions: Sequence[ExerciseAction],
                  n_types: int) -> np.ndarray:
    if len(contexts) != len(actions):
        raise ValueError("contexts and actions must have equal length")
    if not contexts:
        return np.zeros((0, N_COEFS + n_types))
    return np.vstack([feature_row(c, a, n_types) for c, a in zip(contexts, actions)])


def linear_mean(params: PatientParams, context: Context, action: ExerciseAction) -> float:
    """Expected pain reduction of ``action`` in ``context``."""
    tau = params.tau[action.type_id]  # IndexError when tau is too short
    return (tau
            + (params.alpha + params.beta * context.mean_intensity_3) * action.intensity
            + (params.gamma + params.delta * context.mean_duration_3) * action.duration_norm
            + (params.eta + params.kappa * context.pain) * burden(action))

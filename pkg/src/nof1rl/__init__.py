"""Thompson-sampling exercise recommender inside a simulated N-of-1 trial."""
from .agent import (
    PolicyDecision,
    PosteriorDraws,
    SamplerConfig,
    SamplerError,
    ThompsonSamplingAgent,
    conjugate_posterior_oracle,
    fit_posterior,
    predictive_delta_pain,
    selection_probabilities,
    thompson_select,
)
from .core import (
    ActionSet,
    Context,
    ExerciseAction,
    HistoryRecord,
    PatientParams,
    Phase,
    burden,
    default_action_set,
    linear_mean,
    load_action_set,
    rolling_context,
)
from .environment import PatientTruth, PainState, Scenario, adherent, draw_patient, next_pain, true_delta_pain
from .metrics import ScenarioSummary, dispersion, probability_extremes, shannon_entropy, summarize
from .trial import Design, TrialConfig, TrialResult, cumulative_regret, fixed_policy, run_trial

__version__ = "0.1.0"

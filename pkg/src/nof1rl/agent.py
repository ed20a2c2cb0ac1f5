"""Bayesian reward model and Thompson-sampling policy.

The reward model is a Bayesian linear regression with standard-normal priors
on every coefficient and an Exponential(1) prior on the noise scale.  Given
the noise scale the coefficient posterior is Gaussian, so the sampler runs a
random-walk Metropolis chain on ``log(sigma)`` against the coefficient-marginal
likelihood and then draws the coefficients exactly from their conditional
(a collapsed Metropolis-within-Gibbs scheme).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numba
import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .core import (
    N_COEFS,
    ActionSet,
    Context,
    ExerciseAction,
    HistoryRecord,
    PatientParams,
    default_action_set,
    design_matrix,
    feature_row,
    linear_mean,
)


class SamplerError(RuntimeError):
    """Raised when sampler diagnostics fall outside accepted bounds."""


class DegenerateDistributionError(ValueError):
    pass


@dataclass(frozen=True)
class SamplerConfig:
    warmup_draws: int = 500
    kept_draws: int = 1000
    chains: int = 2
    rng_seed: int = 0
    target_accept: float = 0.44
    initial_step: float = 1.0
    min_accept: float = 0.1
    max_accept: float = 0.9

    def __post_init__(self):
        for name in ("warmup_draws", "kept_draws", "chains"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.target_accept < 1:
            raise ValueError("target_accept must lie in (0, 1)")
        if self.initial_step <= 0:
            raise ValueError("initial_step must be positive")

    def with_seed(self, seed: int) -> "SamplerConfig":
        return replace(self, rng_seed=int(seed))


@dataclass(frozen=True)
class PosteriorDraws:
    """Posterior samples stored column-wise.

    ``coefs`` has shape (n_draws, 6 + n_types) in the column order of
    :func:`nof1rl.core.feature_row`; ``sigma`` has shape (n_draws,).
    """

    coefs: np.ndarray
    sigma: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.coefs.ndim != 2 or len(self.coefs) == 0:
            raise ValueError("need a non-empty 2-d coefficient array")
        if self.sigma.shape != (len(self.coefs),):
            raise ValueError("sigma must hold one value per draw")
        if not np.all(self.sigma > 0):
            raise ValueError("every draw needs sigma > 0")

    def __len__(self):
        return len(self.sigma)

    @property
    def n_types(self) -> int:
        return self.coefs.shape[1] - N_COEFS

    @property
    def draws(self) -> list[PatientParams]:
        return [PatientParams.from_vector(c, s) for c, s in zip(self.coefs, self.sigma)]

    @classmethod
    def from_params(cls, params: Sequence[PatientParams], meta=None) -> "PosteriorDraws":
        return cls(np.array([p.coefs for p in params]),
                   np.array([p.sigma for p in params], dtype=float), dict(meta or {}))

    def to_csv(self, path) -> None:
        """Dump one row per draw for auditing."""
        k = self.n_types
        header = ["alpha", "beta", "gamma", "delta", "eta", "kappa",
                  *[f"tau_{i}" for i in range(k)], "sigma"]
        data = np.column_stack([self.coefs, self.sigma])
        np.savetxt(path, data, delimiter=",", header=",".join(header), comments="",
                   fmt="%.17g")


@dataclass(frozen=True)
class PolicyDecision:
    selection_probs: np.ndarray
    chosen_index: int
    rng_seed_used: int

    def __post_init__(self):
        p = self.selection_probs
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("selection probabilities must be non-negative and sum to 1")
        if p[self.chosen_index] <= 0:
            raise ValueError("chosen action has zero selection probability")


@numba.njit(cache=True)
def _log_sigma_target(theta, s2, w, resid_ss, n_null):
    """Unnormalized log posterior of log(sigma), coefficients integrated out.

    ``s2`` are the squared nonzero singular values of the design matrix, ``w``
    the squared projections of the outcomes onto the matching left singular
    vectors, ``resid_ss`` the outcome energy outside that subspace and
    ``n_null`` its dimension.
    """
    if abs(theta) > 300.0:
        return -math.inf  # sigma under- or overflows
    var = math.exp(2.0 * theta)
    acc = 0.0
    for k in range(s2.size):
        tot = s2[k] + var
        acc += math.log(tot) + w[k] / tot
    loglik = -0.5 * (acc + n_null * 2.0 * theta + resid_ss / var)
    # Exponential(1) prior on sigma plus the log-Jacobian of sigma = exp(theta)
    return loglik - math.exp(theta) + theta


@numba.njit(cache=True)
def _metropolis_log_sigma(theta0, s2, w, resid_ss, n_null, steps, log_u, n_warmup,
                          target_accept, initial_step):
    """Random-walk Metropolis on log(sigma), one chain per column of ``steps``.

    The step size adapts during warmup (Robbins-Monro toward
    ``target_accept``) and is frozen afterwards.
    """
    n_iter, chains = steps.shape
    kept = np.empty((n_iter - n_warmup, chains))
    accepted = np.zeros(chains)
    final_step = np.empty(chains)
    for c in range(chains):
        theta = theta0[c]
        logp = _log_sigma_target(theta, s2, w, resid_ss, n_null)
        log_step = math.log(initial_step)
        for it in range(n_iter):
            prop = theta + math.exp(log_step) * steps[it, c]
            logp_prop = _log_sigma_target(prop, s2, w, resid_ss, n_null)
            log_ratio = min(logp_prop - logp, 0.0)
            if log_u[it, c] < log_ratio:
                theta = prop
                logp = logp_prop
                if it >= n_warmup:
                    accepted[c] += 1.0
            if it < n_warmup:
                log_step += (math.exp(log_ratio) - target_accept) / math.sqrt(it + 1.0)
            else:
                kept[it - n_warmup, c] = theta
        final_step[c] = math.exp(log_step)
    return kept, accepted, final_step


def sample_posterior(X: np.ndarray, y: np.ndarray, cfg: SamplerConfig) -> PosteriorDraws:
    """Posterior draws for ``y ~ Normal(X @ b, sigma)`` with b ~ N(0, I), sigma ~ Exp(1)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    rng = np.random.default_rng(cfg.rng_seed)

    if n:
        U, s, _ = np.linalg.svd(X, full_matrices=False)
        keep = s > s.max() * 1e-12 if s.size and s.max() > 0 else np.zeros_like(s, bool)
        s2 = s[keep] ** 2
        uy = U[:, keep].T @ y
        w = uy ** 2
        resid_ss = max(float(y @ y - w.sum()), 0.0)
    else:
        s2 = w = np.zeros(0)
        resid_ss = 0.0
    n_null = n - s2.size

    chains = cfg.chains
    theta0 = np.log(rng.exponential(size=chains)).clip(-3.0, 3.0)
    n_iter = cfg.warmup_draws + cfg.kept_draws
    steps = rng.standard_normal((n_iter, chains))
    log_u = np.log(rng.random((n_iter, chains)))
    kept, accepted, step_size = _metropolis_log_sigma(
        theta0, s2, w, resid_ss, float(n_null), steps, log_u, cfg.warmup_draws,
        cfg.target_accept, cfg.initial_step)

    accept_rate = accepted / cfg.kept_draws
    meta = {
        "n_records": n,
        "n_draws": cfg.kept_draws * chains,
        "chains": chains,
        "accept_rate": accept_rate.tolist(),
        "step_size": step_size.tolist(),
        "rhat_log_sigma": split_rhat(kept),
        "rng_seed": cfg.rng_seed,
    }
    if np.any(accept_rate < cfg.min_accept) or np.any(accept_rate > cfg.max_accept):
        raise SamplerError(f"acceptance rates {accept_rate.tolist()} outside "
                           f"[{cfg.min_accept}, {cfg.max_accept}]")

    # chain-major order so each chain's draws stay contiguous
    sigma = np.exp(kept.T.reshape(-1))
    lam, V = np.linalg.eigh(X.T @ X) if n else (np.zeros(p), np.eye(p))
    lam = np.clip(lam, 0.0, None)
    prec = 1.0 + lam[None, :] / sigma[:, None] ** 2
    mean_eig = (V.T @ (X.T @ y))[None, :] / sigma[:, None] ** 2 / prec
    z = rng.standard_normal((sigma.size, p))
    coefs = (mean_eig + z / np.sqrt(prec)) @ V.T
    return PosteriorDraws(coefs, sigma, meta)


def split_rhat(chains: np.ndarray) -> float:
    """Split-R-hat over an array of shape (n_draws, n_chains)."""
    n = chains.shape[0] // 2
    if n < 2:
        return float("nan")
    halves = np.concatenate([chains[:n], chains[n:2 * n]], axis=1)
    within = halves.var(axis=0, ddof=1).mean()
    between = n * halves.mean(axis=0).var(ddof=1)
    if within == 0:
        return float("nan")
    return float(math.sqrt(((n - 1) / n * within + between / n) / within))


def history_arrays(history: Sequence[HistoryRecord], action_set: ActionSet):
    """Design matrix and outcomes from the fed-back records of ``history``."""
    used = [r for r in history if r.fed_back]
    X = design_matrix([r.context for r in used], [action_set[r.action_index] for r in used],
                      action_set.n_types)
    y = np.array([r.delta_pain for r in used], dtype=float)
    return X, y


def fit_posterior(history: Sequence[HistoryRecord], action_set: ActionSet,
                  cfg: SamplerConfig) -> PosteriorDraws:
    """Posterior of the reward model given the fed-back part of ``history``.

    Records with ``fed_back=False`` are ignored.  An empty history returns
    draws from the prior.
    """
    X, y = history_arrays(history, action_set)
    return sample_posterior(X, y, cfg)


def predictive_samples(draws: PosteriorDraws, context: Context, actions: Sequence[ExerciseAction],
                       rng: np.random.Generator, noise: np.ndarray | None = None) -> np.ndarray:
    """Posterior-predictive pain reductions, shape (n_draws, n_actions).

    ``noise`` overrides the standard-normal variates (same shape as the result).
    """
    F = np.vstack([feature_row(context, a, draws.n_types) for a in actions])
    means = draws.coefs @ F.T
    if noise is None:
        noise = rng.standard_normal(means.shape)
    return means + noise * draws.sigma[:, None]


def predictive_delta_pain(draws: PosteriorDraws, context: Context, action: ExerciseAction,
                          rng: np.random.Generator) -> np.ndarray:
    return predictive_samples(draws, context, [action], rng)[:, 0]


def argmax_frequencies(values: np.ndarray, rng: np.random.Generator,
                       tie_keys: np.ndarray | None = None) -> np.ndarray:
    """Fraction of rows in which each column is the largest, ties split at random."""
    if tie_keys is None:
        tie_keys = rng.random(values.shape)
    is_max = values == values.max(axis=1, keepdims=True)
    winners = np.where(is_max, tie_keys, -1.0).argmax(axis=1)
    return np.bincount(winners, minlength=values.shape[1]) / values.shape[0]


def selection_probabilities(draws: PosteriorDraws, context: Context, action_set: ActionSet,
                            rng: np.random.Generator, noise: np.ndarray | None = None,
                            tie_keys: np.ndarray | None = None) -> np.ndarray:
    """Probability that each action yields the largest predicted pain reduction."""
    if len(draws) == 0 or len(action_set) == 0:
        raise ValueError("need at least one draw and one action")
    pred = predictive_samples(draws, context, list(action_set), rng, noise)
    return argmax_frequencies(pred, rng, tie_keys)


def thompson_select(probs, rng) -> int:
    """Sample an action index from ``probs``; ``rng`` is a Generator or an integer seed."""
    probs = np.asarray(probs, dtype=float)
    if probs.ndim != 1 or np.any(probs < 0) or not np.all(np.isfinite(probs)):
        raise ValueError("probabilities must be a finite non-negative vector")
    total = probs.sum()
    if total == 0:
        raise DegenerateDistributionError("all selection probabilities are zero")
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {total}, not 1")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    return int(rng.choice(probs.size, p=probs / total))


def conjugate_posterior_oracle(history: Sequence[HistoryRecord], action_set: ActionSet,
                               sigma_fixed: float):
    """Closed-form Gaussian posterior of all coefficients for a known noise scale.

    Used as a test oracle.  The design is rebuilt column by column from
    :func:`linear_mean` evaluated at unit coefficient vectors, so it shares no
    code with the sampler's feature construction.
    """
    if sigma_fixed <= 0:
        raise ValueError("sigma_fixed must be positive")
    p = N_COEFS + action_set.n_types
    units = [PatientParams.from_vector(np.eye(p)[j]) for j in range(p)]
    used = [r for r in history if r.fed_back]
    X = np.array([[linear_mean(u, r.context, action_set[r.action_index]) for u in units]
                  for r in used]).reshape(len(used), p)
    y = np.array([r.delta_pain for r in used], dtype=float)
    precision = np.eye(p) + X.T @ X / sigma_fixed ** 2
    cov = np.linalg.inv(precision)
    mean = cov @ (X.T @ y) / sigma_fixed ** 2
    return mean, cov


class ThompsonSamplingAgent(BaseEstimator):
    """Contextual bandit agent with a Bayesian linear reward model.

    ``fit`` takes raw rows ``[action_index, pain, mean_intensity_3,
    mean_duration_3]`` and observed pain reductions.  ``predict_proba`` takes
    context rows ``[pain, mean_intensity_3, mean_duration_3]`` and returns
    the selection distribution over ``action_set`` for each row; ``predict``
    samples an action from it.

    Parameters
    ----------
    action_set : ActionSet, optional
        Exercises to choose from; defaults to the eight-exercise set.
    warmup_draws, kept_draws, chains : int
        Sampler budget per fit.
    random_state : int, optional
        Seed for the sampler and the policy.
    """

    def __init__(self, action_set=None, warmup_draws=500, kept_draws=1000, chains=2,
                 random_state=None):
        self.action_set = action_set
        self.warmup_draws = warmup_draws
        self.kept_draws = kept_draws
        self.chains = chains
        self.random_state = random_state

    def _actions(self) -> ActionSet:
        return self.action_set if self.action_set is not None else default_action_set()

    def _rows_to_design(self, X):
        actions = self._actions()
        idx = X[:, 0].astype(int)
        if np.any(idx != X[:, 0]) or np.any(idx < 0) or np.any(idx >= len(actions)):
            raise ValueError("first column must hold valid action indices")
        ctxs = [Context(*row[1:4]) for row in X]
        return design_matrix(ctxs, [actions[i] for i in idx], actions.n_types)

    def fit(self, X, y):
        actions = self._actions()
        if len(X) == 0:
            X_design = np.zeros((0, N_COEFS + actions.n_types))
            y = np.zeros(0)
        else:
            X, y = check_X_y(X, y, y_numeric=True)
            if X.shape[1] != 4:
                raise ValueError(f"expected 4 columns, got {X.shape[1]}")
            X_design = self._rows_to_design(X)
        seed_seq = np.random.SeedSequence(self.random_state)
        fit_seed, policy_seed = seed_seq.generate_state(2, dtype=np.uint64)
        cfg = SamplerConfig(self.warmup_draws, self.kept_draws, self.chains, int(fit_seed))
        self.posterior_ = sample_posterior(X_design, y, cfg)
        self._policy_rng = np.random.default_rng(int(policy_seed))
        self.n_features_in_ = 4
        return self

    def fit_history(self, history: Sequence[HistoryRecord]):
        """Fit from history records; non-fed-back records are skipped."""
        used = [r for r in history if r.fed_back]
        X = np.array([[r.action_index, r.context.pain, r.context.mean_intensity_3,
                       r.context.mean_duration_3] for r in used]).reshape(len(used), 4)
        return self.fit(X, np.array([r.delta_pain for r in used]))

    def predict_proba(self, X):
        check_is_fitted(self, "posterior_")
        X = check_array(X)
        actions = self._actions()
        return np.vstack([
            selection_probabilities(self.posterior_, Context(*row), actions, self._policy_rng)
            for row in X
        ])

    def predict(self, X):
        return np.array([thompson_select(p, self._policy_rng) for p in self.predict_proba(X)])

    def sample_predictive(self, X):
        """Posterior-predictive draws for raw action/context rows, shape (n_draws, n_rows)."""
        check_is_fitted(self, "posterior_")
        X = check_array(X)
        F = self._rows_to_design(X)
        means = self.posterior_.coefs @ F.T
        return means + self._policy_rng.standard_normal(means.shape) * self.posterior_.sigma[:, None]

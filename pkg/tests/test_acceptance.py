"""Exit criteria, each checked at its fixed tolerance.

The cohort study (7 scenarios x 2 designs x 100 patients) runs once through
the batch driver; every cohort criterion reads the written summary.  A
second run with two worker processes checks byte-identical outputs.
"""
import json
import math

import numpy as np
import pytest

from conftest import GATE_LINES, identical_actions
from nof1rl.agent import SamplerConfig, conjugate_posterior_oracle, fit_posterior, selection_probabilities
from nof1rl.core import Context, HistoryRecord, PatientParams, Phase, default_action_set, linear_mean
from nof1rl.metrics import dispersion, fixed_cycle_reference
from nof1rl.reporting import RunManifest, run_all

ROOT_SEED = 0
PATIENTS = 100
OUTPUTS = ("steps.csv", "summary.json", "summary.txt", "regret_quantiles.csv")


def gate(number, label, ok, detail):
    GATE_LINES.append(f"{'PASS' if ok else 'FAIL'} criterion {number}: {label} -- {detail}")
    assert ok, f"criterion {number} failed: {detail}"


@pytest.fixture(scope="module")
def study(tmp_path_factory):
    out = tmp_path_factory.mktemp("study")
    status = run_all(RunManifest(out / "jobs1", patients=PATIENTS, root_seed=ROOT_SEED, jobs=1))
    assert status == 0
    data = json.loads((out / "jobs1" / "summary.json").read_text())
    cells = {(c["scenario"], c["design"]): c for c in data["cells"]}
    fixed = {(c["scenario"], c["design"]): c for c in data["fixed_arm"]}
    assert len(cells) == 14 and all(c["n_patients"] == PATIENTS for c in cells.values())
    return out, cells, fixed


def test_criterion_01_null_scenario_exact(study):
    _, cells, _ = study
    vals = [(cells["I", d]["mean_regret"], cells["I", d]["regret_q75"]) for d in ("AB", "BA")]
    ok = all(abs(v) <= 1e-9 for pair in vals for v in pair)
    gate(1, "Scenario I regret mean/q75 == 0 (1e-9)", ok, f"AB={vals[0]}, BA={vals[1]}")


def test_criterion_02_personalization_benefit(study):
    c = study[1]["II", "AB"]
    ok = c["mean_regret"] <= -5 and c["regret_q75"] <= -1
    gate(2, "Scenario II A-B mean <= -5, q75 <= -1", ok,
         f"mean={c['mean_regret']:.2f}, q75={c['regret_q75']:.2f}")


def test_criterion_03_scenario_ordering(study):
    cells = study[1]
    pairs = {d: (cells["III", d]["mean_regret"], cells["II", d]["mean_regret"]) for d in ("AB", "BA")}
    ok = all(iii >= ii for iii, ii in pairs.values())
    gate(3, "mean regret III >= II per design", ok,
         ", ".join(f"{d}: III={iii:.2f} II={ii:.2f}" for d, (iii, ii) in pairs.items()))


def test_criterion_04_design_ordering(study):
    cells = study[1]
    ab, ba = cells["II", "AB"]["mean_regret"], cells["II", "BA"]["mean_regret"]
    gate(4, "Scenario II B-A mean >= A-B mean - 1.0", ba >= ab - 1.0,
         f"A-B={ab:.2f}, B-A={ba:.2f}")


def test_criterion_05_diversity_collapse(study):
    _, cells, fixed = study
    adaptive = cells["II", "AB"]["entropy_type"]
    cycle_entropy = fixed_cycle_reference()[0]
    realized_fixed = fixed["II", "AB"]["entropy_type"]
    ok = 1.20 <= cycle_entropy <= 1.26 and adaptive < cycle_entropy and adaptive < realized_fixed
    gate(5, "Scenario II A-B type entropy < fixed-arm reference in [1.20, 1.26]", ok,
         f"adaptive={adaptive:.3f}, round-robin cycle={cycle_entropy:.4f}, "
         f"realized fixed schedule={realized_fixed:.3f}")


def test_criterion_06_fixed_arm_dispersion():
    actions = default_action_set()
    sd_int = dispersion([a.intensity for a in actions])
    sd_dur = dispersion([a.duration_norm for a in actions])
    ok = abs(sd_int - 0.3238) <= 0.005 and abs(sd_dur - 0.2738) <= 0.005
    gate(6, "action-set std intensity 0.3238, duration 0.2738 (+-0.005)", ok,
         f"intensity={sd_int:.4f}, duration={sd_dur:.4f}")


def test_criterion_07_probability_extremes(study):
    c = study[1]["II", "AB"]
    ok = 0.25 <= c["mean_max_prob"] <= 0.60 and c["mean_min_prob"] <= 0.05
    gate(7, "Scenario II A-B max prob in [0.25, 0.60], min prob <= 0.05", ok,
         f"max={c['mean_max_prob']:.3f}, min={c['mean_min_prob']:.3f}")


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_criterion_08_sampler_matches_conjugate_oracle(seed):
    rng = np.random.default_rng(1000 + seed)
    actions = default_action_set()
    truth = PatientParams.from_vector(rng.standard_normal(10), sigma=1.0)
    hist = []
    for t in range(500):
        ctx = Context(rng.uniform(0, 10), rng.uniform(0, 1), rng.uniform(0, 1))
        j = int(rng.integers(len(actions)))
        y = linear_mean(truth, ctx, actions[j]) + rng.standard_normal()
        hist.append(HistoryRecord(t + 1, Phase.BASELINE, j, ctx, y))
    draws = fit_posterior(hist, actions, SamplerConfig(rng_seed=seed))
    mean, cov = conjugate_posterior_oracle(hist, actions, truth.sigma)
    mean_err = np.abs(draws.coefs.mean(axis=0) - mean).max()
    sd_rel = np.abs(draws.coefs.std(axis=0) / np.sqrt(np.diag(cov)) - 1).max()
    gate(8, f"sampler vs conjugate oracle (seed {seed})", mean_err <= 0.10 and sd_rel <= 0.25,
         f"max |mean diff|={mean_err:.4f}, max sd rel err={sd_rel:.3f}")


@pytest.mark.parametrize("k", [2, 3, 5, 8])
def test_criterion_09_policy_symmetry(k):
    actions = identical_actions(k)
    cfg = SamplerConfig(rng_seed=k)
    draws = fit_posterior([], actions, cfg)
    probs = selection_probabilities(draws, Context(5.0), actions, np.random.default_rng(k))
    tol = 3 / math.sqrt(len(draws))
    worst = float(np.abs(probs - 1 / k).max())
    gate(9, f"empty-history symmetry over {k} identical actions", worst <= tol,
         f"max |p - 1/k|={worst:.4f} <= {tol:.4f}")


def test_criterion_10_determinism(study):
    out = study[0]
    assert run_all(RunManifest(out / "jobs2", patients=PATIENTS, root_seed=ROOT_SEED, jobs=2)) == 0
    same = {name: (out / "jobs1" / name).read_bytes() == (out / "jobs2" / name).read_bytes()
            for name in OUTPUTS}
    gate(10, "identical manifests give byte-identical outputs (jobs 1 vs 2)", all(same.values()),
         ", ".join(f"{k}={'same' if v else 'DIFFERENT'}" for k, v in same.items()))


def test_criterion_11_non_adherence(study):
    cells = study[1]
    ab, ba = cells["VII", "AB"], cells["VII", "BA"]
    ok = ab["mean_regret"] <= -4 and ba["regret_q75"] <= 0
    gate(11, "Scenario VII A-B mean <= -4, B-A q75 <= 0", ok,
         f"A-B mean={ab['mean_regret']:.2f}, B-A q75={ba['regret_q75']:.2f}")

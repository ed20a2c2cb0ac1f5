import math
import statistics

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nof1rl.agent import PolicyDecision
from nof1rl.core import Context, HistoryRecord, Phase
from nof1rl.environment import Scenario
from nof1rl.metrics import (
    dispersion,
    fixed_cycle_reference,
    probability_extremes,
    quantile,
    regret_quantiles,
    shannon_entropy,
    summarize,
)
from nof1rl.trial import Design, TrialResult

TABLE_INTENSITIES = (0.3, 0.5, 0.7, 1, 1, 1, 0.5, 0.1)
TABLE_DURATIONS = (0.5, 0.5, 0.5, 0.1, 0.2, 0.3, 0.75, 1)


def result(pid, final, indices=(0, 1), probs=(0.5, 0.5), scenario=Scenario.II,
           design=Design.AB):
    n = len(indices)
    recs = [HistoryRecord(k + 1, Phase.ADAPTIVE_B, j, Context(5.0), 0.0)
            for k, j in enumerate(indices)]
    p = np.array(probs, dtype=float)
    decs = [PolicyDecision(p, int(np.argmax(p)), 0) for _ in indices]
    series = [0.0] * (n - 1) + [float(final)]
    return TrialResult(pid, scenario, design, [], recs, [0.0] * n, [0] * n, decs, series)


def test_entropy_examples():
    assert shannon_entropy([5, 5, 5, 5]) == pytest.approx(math.log(4))
    assert shannon_entropy([0, 7, 0]) == 0.0
    # full round-robin cycle over the table: types 3/8, 3/8, 1/8, 1/8
    by_formula = -2 * (3 / 8) * math.log(3 / 8) - 2 * (1 / 8) * math.log(1 / 8)
    assert shannon_entropy([3, 3, 1, 1]) == pytest.approx(by_formula)
    assert by_formula == pytest.approx(1.2555, abs=1e-4)
    with pytest.raises(ValueError):
        shannon_entropy([0, 0])


@given(st.lists(st.integers(0, 50), min_size=1, max_size=8).filter(any),
       st.integers(1, 20), st.randoms())
def test_entropy_invariances(counts, k, rnd):
    h = shannon_entropy(counts)
    shuffled = list(counts)
    rnd.shuffle(shuffled)
    assert shannon_entropy(shuffled) == pytest.approx(h, abs=1e-12)
    assert shannon_entropy([c * k for c in counts]) == pytest.approx(h, abs=1e-12)
    assert 0 <= h <= math.log(len(counts)) + 1e-12


def test_dispersion_examples():
    assert dispersion([0.4] * 6) == 0.0
    assert dispersion(TABLE_INTENSITIES) == pytest.approx(statistics.pstdev(TABLE_INTENSITIES))
    assert dispersion(TABLE_INTENSITIES) == pytest.approx(0.3238, abs=5e-5)
    assert dispersion(TABLE_DURATIONS) == pytest.approx(statistics.pstdev(TABLE_DURATIONS))
    assert dispersion(TABLE_DURATIONS) == pytest.approx(0.2738, abs=5e-5)
    with pytest.raises(ValueError):
        dispersion([])


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=30), st.floats(-100, 100))
def test_dispersion_shift_invariant(values, c):
    assert dispersion(np.add(values, c)) == pytest.approx(dispersion(values), abs=1e-9)


def test_fixed_cycle_reference(actions):
    ent, sd_dur, sd_int = fixed_cycle_reference(actions)
    assert ent == pytest.approx(shannon_entropy([3, 3, 1, 1]))
    assert sd_int == pytest.approx(statistics.pstdev(TABLE_INTENSITIES))
    assert sd_dur == pytest.approx(statistics.pstdev(TABLE_DURATIONS))


def test_probability_extremes():
    uniform = [PolicyDecision(np.full(8, 0.125), 3, 0)] * 4
    assert probability_extremes(uniform) == pytest.approx((0.125, 0.125))
    onehot = np.zeros(8)
    onehot[0] = 1
    assert probability_extremes([PolicyDecision(onehot, 0, 0)]) == (1.0, 0.0)
    with pytest.raises(ValueError):
        probability_extremes([])


def test_summarize_examples():
    s = summarize([result(0, -3)])
    assert (s.mean_regret, s.regret_q75, s.n_patients) == (-3, -3, 1)
    s = summarize([result(0, -4), result(1, -2)])
    assert s.mean_regret == -3
    assert s.regret_q75 == pytest.approx(-2.5)  # -4 + 0.75 * (-2 - -4)


def test_summarize_diversity_per_patient_then_mean(actions):
    a = result(0, 0, indices=(0, 0, 0, 0))        # one type, constant
    b = result(1, 0, indices=(0, 3, 6, 7))        # four types
    s = summarize([a, b], actions)
    assert s.entropy_type == pytest.approx(math.log(4) / 2)
    assert s.std_intensity == pytest.approx(statistics.pstdev([0.3, 1, 0.5, 0.1]) / 2)


def test_summarize_rejects_mixed_cells():
    with pytest.raises(ValueError):
        summarize([result(0, 1), result(1, 1, design=Design.BA)])
    with pytest.raises(ValueError):
        summarize([])


@given(st.lists(st.floats(-30, 10), min_size=1, max_size=20), st.randoms())
def test_summarize_order_independent_and_q75_bounded(finals, rnd):
    results = [result(i, f) for i, f in enumerate(finals)]
    shuffled = list(results)
    rnd.shuffle(shuffled)
    assert summarize(results) == summarize(shuffled)
    q = summarize(results).regret_q75
    assert min(finals) - 1e-9 <= q <= max(finals) + 1e-9


def test_regret_quantiles():
    rows = regret_quantiles([result(0, -4), result(1, -2), result(2, 0)])
    assert len(rows) == 2
    assert rows[-1] == {"t": 2, "median": -2.0, "q25": -3.0, "q75": -1.0}
    assert quantile([1, 2, 3, 4], 0.5) == 2.5

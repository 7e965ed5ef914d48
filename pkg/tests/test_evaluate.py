import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from onsetblend.blend import fit_blend_arrays, predict_blend
from onsetblend.errors import EmptySet, NoNegatives, NoPositives, ValidationError, ZeroClimatologyScore
from onsetblend.evaluate import (
    ScoredSet,
    auc,
    auc_binary,
    brier,
    evaluate,
    loocv_run,
    reliability,
    rps,
    skill,
)

UNIFORM = [0.2] * 5


def test_brier_hand_values():
    assert brier([[1, 0, 0, 0, 0]], [1]) == 0.0
    assert brier([[0.6, 0.4, 0, 0, 0]], [1]) == pytest.approx(0.32, abs=1e-15)
    assert brier([UNIFORM], [1]) == pytest.approx(0.80, abs=1e-15)


def test_rps_hand_values():
    assert rps([[0, 0, 1, 0, 0]], [3]) == 0.0
    assert rps([[0.6, 0.4, 0, 0, 0]], [1]) == pytest.approx(0.16, abs=1e-15)
    assert rps([UNIFORM], [1]) == pytest.approx(1.20, abs=1e-15)


def test_empty_set():
    with pytest.raises(EmptySet):
        brier(np.zeros((0, 5)), [])


def test_auc_hand_values():
    for policy in ("strict", "half"):
        assert auc_binary([0.7, 0.3], [1, 0], policy) == 1.0
        assert auc_binary([0.9, 0.6, 0.4, 0.7], [1, 1, 0, 0], policy) == 0.75
    assert auc_binary([0.5, 0.5], [1, 0], "strict") == 0.0
    assert auc_binary([0.5, 0.5], [1, 0], "half") == 0.5


def test_auc_needs_both_classes():
    with pytest.raises(NoPositives):
        auc_binary([0.1, 0.2], [0, 0])
    with pytest.raises(NoNegatives):
        auc_binary([0.1, 0.2], [1, 1])


def pair_count_auc(scores, labels, policy):
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    wins = 0.0
    for p in pos:
        for q in neg:
            wins += 1.0 if p > q else (0.5 if p == q and policy == "half" else 0.0)
    return wins / (len(pos) * len(neg))


def test_fast_auc_equals_pair_count_on_500_sets():
    rng = np.random.default_rng(0)
    for k in range(500):
        n = int(rng.integers(2, 60))
        # coarse grids make ties frequent
        scores = np.round(rng.random(n), int(rng.integers(1, 4)))
        labels = rng.random(n) < rng.uniform(0.1, 0.9)
        if labels.all() or not labels.any():
            labels[0] = not labels[0]
        for policy in ("strict", "half"):
            assert auc_binary(scores, labels, policy) == pair_count_auc(scores, labels, policy), k


def test_pooled_auc_over_bins():
    P = np.array([[0.7, 0.3, 0, 0, 0], [0.2, 0.8, 0, 0, 0]])
    # pooled positives 0.7, 0.8; negatives 0.3, 0, 0, 0, 0.2, 0, 0, 0
    assert auc(P, [1, 2]) == 1.0


def test_binary_brier_equals_rps_for_two_bins():
    # the summed score counts the single binary error twice when m = 2
    rng = np.random.default_rng(1)
    for _ in range(500):
        p = rng.random(30)
        P = np.column_stack([p, 1 - p])
        y = rng.integers(1, 3, 30)
        event = np.mean((p - (y == 1)) ** 2)
        assert abs(event - rps(P, y)) < 1e-12
        assert abs(brier(P, y) - 2 * rps(P, y)) < 1e-12


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_score_bounds(seed):
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.full(5, 0.3), size=20)
    y = rng.integers(1, 6, 20)
    assert 0 <= brier(P, y) <= 2
    assert 0 <= rps(P, y) <= 4


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_auc_invariant_under_monotone_transform(seed):
    rng = np.random.default_rng(seed)
    P = np.round(rng.dirichlet(np.ones(5), size=25), 2)
    y = rng.integers(1, 6, 25)
    assert auc(P, y) == auc(np.sqrt(P) * 3 + 1, y)


def test_skill():
    assert skill(0.8, 1.0) == pytest.approx(0.2)
    assert skill(1.0, 1.0) == 0.0
    assert skill(1.2, 1.0) == pytest.approx(-0.2)
    with pytest.raises(ZeroClimatologyScore):
        skill(0.1, 0.0)


def test_reference_has_zero_skill():
    rng = np.random.default_rng(2)
    s = ScoredSet(rng.dirichlet(np.ones(5), 40), rng.integers(1, 6, 40), years=np.repeat([1, 2], 20))
    report = evaluate(s, s)
    assert report.bss == 0 and report.rpss == 0
    assert all(r["bss"] == 0 for r in report.per_year)
    assert all(r["bss"] == 0 or np.isnan(r["bss"]) for r in report.per_lead)


def test_reliability_calibrated_generator():
    rng = np.random.default_rng(3)
    P = rng.dirichlet(np.ones(5), size=10000)  # 50000 forecast-bin pairs
    y = 1 + (rng.random(10000)[:, None] > np.cumsum(P, axis=1)).sum(axis=1)
    t = reliability(P, y)
    assert t["count"].sum() == P.size
    assert np.max(np.abs(t["mean_p"] - t["observed"])) < 0.02


def test_histogram_normalization():
    P = np.array([[0.05, 0.05, 0.05, 0.05, 0.8]])
    hist = reliability(P, [5])["hist"]
    assert hist[0] == 1.0 and hist[8] == 0.25
    low = reliability(np.full((3, 2), 0.05) / 0.1 * 0.05, [1, 1, 1])["hist"]
    assert list(low) == [1.0] + [0.0] * 9


def test_reliability_constant_half():
    rng = np.random.default_rng(4)
    P = np.full((4000, 2), 0.5)
    y = rng.integers(1, 3, 4000)
    t = reliability(P, y)
    assert np.allclose(t["mean_p"], 0.5)
    assert np.all(np.abs(t["observed"] - 0.5) < 0.05)


def test_scored_set_validation():
    with pytest.raises(ValidationError):
        ScoredSet([[0.5, 0.6, 0, 0, 0]], [1])
    with pytest.raises(ValidationError):
        ScoredSet([UNIFORM], [6])


# -- leave-one-year-out -------------------------------------------------------------------


class YearData:
    def __init__(self, years, outcomes):
        self.years = np.asarray(years)
        self.outcomes = np.asarray(outcomes)

    def split(self, year):
        train = self.years != year
        return (self.years[train], self.outcomes[train]), (self.years[~train], self.outcomes[~train])


def test_leakage_canary():
    data = YearData(np.repeat([2001, 2002, 2003], 4), [1, 2, 3, 4] * 3)

    def trainer(train, held_out):
        memory = set(train[0].tolist())

        def predict(test):
            years, y = test
            assert not memory & set(years.tolist())
            return ScoredSet(np.tile(UNIFORM, (len(y), 1)), y, years=years)

        return predict

    report = loocv_run([2001, 2002, 2003], trainer, data)
    assert report.n == 12


def test_intercept_only_loocv_uses_other_years():
    years = np.repeat([2001, 2002, 2003], [10, 10, 10])
    y = np.concatenate([np.repeat([1, 5], [5, 5]), np.repeat([2, 5], [8, 2]), np.repeat([1, 3, 5], [2, 2, 6])])
    data = YearData(years, y)

    def trainer(train, held_out):
        ty = train[1]
        model = fit_blend_arrays(np.zeros((len(ty), 5, 4)), ty, ridge=0.0)

        def predict(test):
            p = predict_blend(model, np.zeros((len(test[1]), 5, 4)))
            return ScoredSet(p, test[1], years=test[0])

        return predict

    report = loocv_run([2001, 2002, 2003], trainer, data)
    first = report.scored.probs[0]
    other = y[years != 2001]
    # classes absent from training get (near) zero mass
    want = np.bincount(other, minlength=6)[1:] / len(other)
    assert np.allclose(first, want, atol=1e-6)
    again = loocv_run([2001, 2002, 2003], trainer, data)
    assert again.rps == report.rps and np.array_equal(again.scored.probs, report.scored.probs)


def test_loocv_needs_two_years():
    with pytest.raises(ValidationError):
        loocv_run([2001], lambda *a: None, YearData([2001], [1]))

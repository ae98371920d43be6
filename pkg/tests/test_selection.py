import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from descdetect.errors import ConfigError, DegenerateStratum
from descdetect.selection import (BUDGETS, FOREST_SPACE, SVM_SPACE, Categorical, IntUniform, LogUniform,
                                  distribution_from_dict, random_search, round_half_away, sample_params,
                                  sequester_validation, stratified_shuffle_split, subsample_budget,
                                  trial_log)


def labels_677():
    # 677 training videos, 24.7% manipulated (167 of them)
    return np.r_[np.ones(167, int), np.zeros(510, int)][np.random.default_rng(0).permutation(677)]


def test_budget_sizes_on_677_rows():
    labels = labels_677()
    sizes = {b: len(subsample_budget(labels, b, seed=1)) for b in BUDGETS}
    assert sizes == {0.10: 68, 0.25: 169, 0.50: 339, 0.75: 508}
    for b in BUDGETS:
        chosen = labels[subsample_budget(labels, b, seed=1)]
        assert abs(chosen.sum() - b * 167) <= 1


def test_sequestering_677_rows():
    labels = labels_677()
    train, held = sequester_validation(labels, seed=3)
    assert len(held) == 169 and labels[held].sum() == 42
    assert len(np.intersect1d(train, held)) == 0 and len(train) + len(held) == 677


def test_shuffle_split_rounds_each_class():
    labels = labels_677()
    plan = stratified_shuffle_split(labels, n_splits=10, eval_fraction=0.25, seed=4)
    assert len(plan.splits) == 10
    for train, held in plan.splits:
        assert labels[held].sum() == 42 and (labels[held] == 0).sum() == 128
        assert len(np.intersect1d(train, held)) == 0 and len(train) + len(held) == 677
    assert not np.array_equal(plan.splits[0][1], plan.splits[1][1])


def test_budget_drawn_from_pool_clamps_to_availability():
    labels = np.r_[np.ones(74, int), np.zeros(226, int)]
    pool, _ = sequester_validation(labels, seed=0)
    chosen = pool[subsample_budget(labels[pool], 0.75, seed=0, reference=labels)]
    assert len(chosen) == len(pool) == 225


def test_bad_inputs():
    with pytest.raises(ConfigError):
        subsample_budget(labels_677(), 0.3)
    with pytest.raises(DegenerateStratum):
        stratified_shuffle_split(np.zeros(10, int))
    with pytest.raises(DegenerateStratum):
        stratified_shuffle_split(np.r_[1, np.zeros(9, int)], eval_fraction=0.25)


@settings(max_examples=100, deadline=None)
@given(st.integers(4, 80), st.integers(4, 200), st.sampled_from([0.2, 0.25, 0.3]), st.integers(0, 10**6))
def test_split_stratification_property(n_pos, n_neg, frac, seed):
    labels = np.r_[np.ones(n_pos, int), np.zeros(n_neg, int)]
    plan = stratified_shuffle_split(labels, 3, frac, seed)
    for train, held in plan.splits:
        assert labels[held].sum() == round_half_away(n_pos * frac)
        assert (labels[held] == 0).sum() == round_half_away(n_neg * frac)
        assert np.array_equal(np.sort(np.r_[train, held]), np.arange(len(labels)))


def test_distributions():
    rng = np.random.default_rng(0)
    draws = [LogUniform(1e-2, 1e3).sample(rng) for _ in range(2000)]
    assert min(draws) >= 1e-2 and max(draws) <= 1e3
    assert abs(np.median(np.log10(draws)) - 0.5) < 0.2
    ints = {IntUniform(1, 3).sample(rng) for _ in range(200)}
    assert ints == {1, 2, 3}
    assert distribution_from_dict({"choice_range": [None, 2, 4]}) == Categorical((None, 2, 3, 4))
    with pytest.raises(ConfigError):
        distribution_from_dict({"normal": [0, 1]})
    with pytest.raises(ConfigError):
        LogUniform(0, 1)


def test_sample_params_is_keyed_by_trial():
    assert sample_params(FOREST_SPACE, 1, 5) == sample_params(FOREST_SPACE, 1, 5)
    assert sample_params(SVM_SPACE, 1, 5) != sample_params(SVM_SPACE, 1, 6)


def _audited_fit(X, y, params, seed):
    # X carries its original row number in column 0
    class Model:
        rows = X[:, 0].astype(int)

        def predict_proba(self, Z):
            assert not set(Z[:, 0].astype(int)) & set(self.rows), "eval rows leaked into training"
            return Z[:, 1] * params["w"]
    return Model()


def test_no_leakage_and_worker_independence():
    rng = np.random.default_rng(1)
    y = np.r_[np.ones(20, int), np.zeros(40, int)]
    X = np.c_[np.arange(60), y + rng.normal(0, 0.8, 60)]
    plan = stratified_shuffle_split(y, 5, 0.25, seed=2)
    space = {"w": LogUniform(0.1, 10)}
    best1, trials1 = random_search(X, y, plan, space, 12, _audited_fit, seed=3, workers=1)
    best2, trials2 = random_search(X, y, plan, space, 12, _audited_fit, seed=3, workers=2)
    assert best1 == best2 and trials1 == trials2
    assert all(len(t.scores) == 5 and not t.error for t in trials1)
    assert trial_log(trials1) == trial_log(trials2)


def _failing_fit(X, y, params, seed):
    raise ValueError("boom")


def test_failed_trials_are_logged_not_fatal():
    y = np.r_[np.ones(8, int), np.zeros(8, int)]
    plan = stratified_shuffle_split(y, 2, 0.25, seed=0)
    _, trials = random_search(np.zeros((16, 1)), y, plan, {"w": IntUniform(1, 2)}, 2, _failing_fit)
    assert all(t.mean_score == -np.inf and "boom" in t.error for t in trials)
    assert "ValueError: boom" in trial_log(trials)

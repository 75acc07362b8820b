import numpy as np
import pytest

from eigenreptile.ispl import (
    ISPLConfig,
    build_priors,
    gamma_at,
    ispl_inner_loop,
    select,
    vote_losses,
)
from eigenreptile.nn import Batch, NetworkSpec, OptimizerState, init_params, per_sample_loss
from eigenreptile.tasks import RegressionTask, sample_points
from eigenreptile.trajectory import run_inner_loop

SPEC = NetworkSpec.mlp([1, 16, 1])
OPT = OptimizerState("sgd", 0.02)


def planted_task(seed, n=20, n_bad=4, offset=8.0):
    rng = np.random.default_rng(seed)
    batch = sample_points(RegressionTask(rng.uniform(0.1, 5.0), rng.uniform(0, 2 * np.pi)), n, rng)
    bad = np.sort(rng.choice(n, size=n_bad, replace=False))
    targets = batch.targets.copy()
    targets[bad] += offset * rng.choice([-1.0, 1.0], size=(n_bad, 1))
    return Batch(batch.inputs, targets), bad


def test_select_examples():
    np.testing.assert_array_equal(select([0.5, 3.0, 1.0], 2.0).v, [1, 0, 1])
    mask = select([5.0, 4.0], 1.0)
    np.testing.assert_array_equal(mask.v, [0, 1])
    assert mask.count == 1 and mask.gamma_used == 1.0
    # a loss equal to gamma is not strictly below it
    np.testing.assert_array_equal(select([1.0, 0.5], 1.0).v, [0, 1])
    with pytest.raises(ValueError):
        select([np.nan, 1.0], 1.0)


def test_select_monotone_in_gamma():
    losses = np.random.default_rng(0).exponential(size=40)
    counts = [select(losses, g).count for g in np.linspace(0.0, 5.0, 30)]
    assert counts == sorted(counts)
    assert select(losses, 1e9).count == 40


def test_gamma_schedule():
    cfg = ISPLConfig(gamma0=10.0, mu=0.6, period=1000)
    assert gamma_at(0, cfg) == 10.0
    assert gamma_at(999, cfg) == 10.0
    assert gamma_at(1000, cfg) == pytest.approx(9.4)
    assert gamma_at(10**6, cfg) == 0.0
    values = [gamma_at(t, cfg) for t in range(0, 30_000, 250)]
    assert all(a >= b for a, b in zip(values, values[1:]))
    with pytest.raises(ValueError):
        gamma_at(-1, cfg)


def test_config_validation():
    with pytest.raises(ValueError):
        ISPLConfig(Q=0)
    with pytest.raises(ValueError):
        ISPLConfig(prior_fraction=0.0)
    with pytest.raises(ValueError):
        ISPLConfig(schedule="cosine")


def test_priors_are_deterministic_and_match_subset_training():
    batch, _ = planted_task(0)
    phi = init_params(SPEC, 0)
    cfg = ISPLConfig(Q=3, prior_fraction=0.5, prior_steps=4)
    a = build_priors(phi, SPEC, batch, cfg, 7, OPT, 5)
    b = build_priors(phi, SPEC, batch, cfg, 7, OPT, 5)
    assert len(a) == 3 and all(np.array_equal(x, y) for x, y in zip(a, b))
    idx = np.sort(np.random.default_rng([7, 1]).choice(20, size=10, replace=False))
    # a prior is the endpoint of plain training on its subset
    expected = run_inner_loop(phi, SPEC, batch.subset(idx), 4, OPT).endpoint
    np.testing.assert_allclose(a[1], expected, rtol=0, atol=1e-14)


def test_vote_is_mean_of_prior_losses():
    batch, _ = planted_task(1)
    priors = [init_params(SPEC, s) for s in range(3)]
    expected = np.mean([per_sample_loss(p, SPEC, batch) for p in priors], axis=0)
    np.testing.assert_allclose(vote_losses(priors, SPEC, batch), expected, rtol=1e-14)
    with pytest.raises(ValueError):
        vote_losses([], SPEC, batch)


def test_huge_gamma_reproduces_plain_inner_loop():
    batch, _ = planted_task(2)
    phi = init_params(SPEC, 2)
    rec, mask = ispl_inner_loop(phi, SPEC, batch, 5, OPT, ISPLConfig(gamma0=1e12), 0, 3)
    plain = run_inner_loop(phi, SPEC, batch, 5, OPT)
    assert mask.count == len(batch)
    assert np.array_equal(rec.snapshots, plain.snapshots)


def test_ispl_trains_only_on_selected_samples():
    batch, _ = planted_task(3)
    phi = init_params(SPEC, 3)
    cfg = ISPLConfig(gamma0=2.0)
    rec, mask = ispl_inner_loop(phi, SPEC, batch, 5, OPT, cfg, 0, 4)
    assert 0 < mask.count < len(batch)
    subset = run_inner_loop(phi, SPEC, batch.subset(mask.v == 1), 5, OPT)
    np.testing.assert_allclose(rec.snapshots, subset.snapshots, rtol=0, atol=1e-13)


def test_inner_step_schedule_tightens_selection():
    batch, _ = planted_task(4)
    phi = init_params(SPEC, 4)
    cfg = ISPLConfig(gamma0=6.0, mu=1.0, schedule="inner-step")
    rec, mask = ispl_inner_loop(phi, SPEC, batch, 5, OPT, cfg, 0, 5)
    assert rec.selected_count <= mask.count
    assert rec.n_steps == 5


def test_planted_outliers_vote_higher_and_are_discarded_more():
    bad_vote, clean_vote, bad_drop, clean_drop = [], [], [], []
    cfg = ISPLConfig(Q=2, prior_steps=5)
    for seed in range(50):
        batch, bad = planted_task(seed)
        clean = np.setdiff1d(np.arange(len(batch)), bad)
        phi = init_params(SPEC, seed)
        voted = vote_losses(build_priors(phi, SPEC, batch, cfg, seed, OPT, 5), SPEC, batch)
        mask = select(voted, np.median(voted))
        bad_vote.append(voted[bad].mean())
        clean_vote.append(voted[clean].mean())
        bad_drop.append(1 - mask.v[bad].mean())
        clean_drop.append(1 - mask.v[clean].mean())
    assert np.mean(bad_vote) > np.mean(clean_vote)
    assert np.mean(bad_drop) > np.mean(clean_drop)

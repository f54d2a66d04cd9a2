import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pidecision.posterior import (
    BootstrapError, BootstrapPlan, FactorizationError, GaussianQuasiPosterior, MultinomialPosterior,
    PosteriorError, bootstrap, psd_factor, sample_dirichlet, sample_gaussian, sample_mean,
)


def test_gaussian_moments():
    cov = np.array([[0.04, 0.01], [0.01, 0.09]])
    ds = sample_gaussian(GaussianQuasiPosterior([0.1, -0.2], cov, 200_000, seed=1))
    assert ds.source_tag == "quasi-posterior" and ds.draws.shape == (200_000, 2)
    se = np.sqrt(np.diag(cov) / 200_000)
    assert np.all(np.abs(ds.draws.mean(axis=0) - [0.1, -0.2]) < 4 * se)
    np.testing.assert_allclose(np.cov(ds.draws.T), cov, rtol=0.02)


def test_zero_covariance_gives_point_mass():
    ds = sample_gaussian(GaussianQuasiPosterior([0.5, 1.5], np.zeros((2, 2)), 10))
    np.testing.assert_array_equal(ds.draws, np.tile([0.5, 1.5], (10, 1)))


def test_singular_covariance_gets_jitter():
    v = np.array([1.0, 2.0])
    L = psd_factor(np.outer(v, v))
    np.testing.assert_allclose(L @ L.T, np.outer(v, v), atol=1e-8)


def test_indefinite_covariance_raises_with_diagnostics():
    with pytest.raises(FactorizationError, match="min eigenvalue"):
        psd_factor(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_from_information():
    gqp = GaussianQuasiPosterior.from_information([0.0, 0.0], np.diag([2.0, 4.0]), 100)
    np.testing.assert_allclose(gqp.covariance, np.diag([1 / 200, 1 / 400]))


@pytest.mark.parametrize("workers", [None, 2, 5])
def test_gaussian_draws_identical_across_workers(workers):
    gqp = GaussianQuasiPosterior([0.0, 1.0, 2.0], np.eye(3), 10_000, seed=9)
    np.testing.assert_array_equal(sample_gaussian(gqp).draws, sample_gaussian(gqp, workers).draws)


def test_dirichlet_rows_on_simplex_and_mean():
    mp = MultinomialPosterior([30, 10, 0], prior_alpha=1.0)
    ds = sample_dirichlet(mp, 50_000, seed=4)
    assert ds.source_tag == "dirichlet"
    np.testing.assert_allclose(ds.draws.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(ds.draws.mean(axis=0), mp.mean, atol=4e-3)
    np.testing.assert_allclose(mp.mean, np.array([31, 11, 1]) / 43)


def test_dirichlet_blocks_concatenate():
    posts = [MultinomialPosterior([5, 5]), MultinomialPosterior([1, 2, 3])]
    ds = sample_dirichlet(posts, 100, seed=2, workers=3)
    assert ds.draws.shape == (100, 5)
    np.testing.assert_allclose(ds.draws[:, :2].sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(ds.draws[:, 2:].sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_array_equal(ds.draws, sample_dirichlet(posts, 100, seed=2).draws)


def test_zero_posterior_mass_rejected():
    with pytest.raises(PosteriorError, match="cell 1"):
        sample_dirichlet(MultinomialPosterior([3, 0], prior_alpha=0.0), 10)
    with pytest.raises(ValueError):
        MultinomialPosterior([1.5, 2])


def test_bootstrap_of_constant_data_is_degenerate():
    ds = bootstrap(BootstrapPlan(np.full((40, 2), 3.0), replications=50, seed=1))
    assert ds.source_tag == "bootstrap"
    np.testing.assert_array_equal(ds.draws, np.full((50, 2), 3.0))


def test_bootstrap_mean_spread():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((400, 1))
    ds = bootstrap(BootstrapPlan(x, replications=4000, seed=3))
    assert ds.draws.std() == pytest.approx(x.std() / 20, rel=0.06)


def test_bootstrap_batched_and_looped_agree():
    x = np.random.default_rng(1).standard_normal((50, 2))
    looped = bootstrap(BootstrapPlan(x, lambda r: r.mean(axis=0), 300, seed=5))
    batched = bootstrap(BootstrapPlan(x, sample_mean, 300, seed=5))
    np.testing.assert_allclose(looped.draws, batched.draws, rtol=1e-12)


def test_bootstrap_deterministic_across_workers():
    x = np.random.default_rng(1).standard_normal((60, 3))
    plan = BootstrapPlan(x, lambda r: np.median(r, axis=0), 700, seed=8)
    np.testing.assert_array_equal(bootstrap(plan).draws, bootstrap(plan, workers=4).draws)


def test_order_dependent_estimator_rejected():
    x = np.arange(20.0)[:, None]
    with pytest.raises(BootstrapError, match="order"):
        bootstrap(BootstrapPlan(x, lambda r: r[0], 10))


def test_estimator_failure_names_replication():
    x = np.arange(1.0, 31.0)[:, None]

    def fragile(rows):
        if rows.sum() > 0 and rows.max() == rows.min():
            raise RuntimeError("degenerate")
        if np.sort(rows[:, 0])[0] == 1.0 and np.sort(rows[:, 0])[1] == 1.0:
            raise RuntimeError("duplicate minimum")
        return rows.mean(axis=0)

    with pytest.raises(BootstrapError) as info:
        bootstrap(BootstrapPlan(x, fragile, 400, seed=0), check_contract=False)
    assert isinstance(info.value.replication, int)
    assert f"replication {info.value.replication}" in str(info.value)


@given(st.lists(st.integers(0, 50), min_size=2, max_size=6), st.integers(0, 1000))
def test_dirichlet_draws_nonnegative_and_normalized(counts, seed):
    ds = sample_dirichlet(MultinomialPosterior(counts), 64, seed)
    assert (ds.draws >= 0).all()
    np.testing.assert_allclose(ds.draws.sum(axis=1), 1.0, atol=1e-12)

"""Chain driver behavior: determinism, output formats, edge cases."""

import csv

import numpy as np
import pytest

from pggap.gibbs_chain import (
    ChainConfig,
    conjugate_step,
    gibbs_step,
    rng_stream,
    run_chain,
)
from pggap.logit_model import Dataset, LogitModel, Prior


@pytest.fixture()
def small_problem():
    rng = np.random.default_rng(77)
    X = rng.standard_normal((30, 3))
    truth = np.array([1.0, -0.5, 0.0])
    y = (rng.random(30) < 1.0 / (1.0 + np.exp(-X @ truth))).astype(float)
    return Dataset(X, y), Prior.isotropic(3, variance=10.0)


class TestRngStream:
    def test_reproducible_and_distinct(self):
        a = rng_stream(5, 1, 2).standard_normal(4)
        b = rng_stream(5, 1, 2).standard_normal(4)
        c = rng_stream(5, 1, 3).standard_normal(4)
        d = rng_stream(6, 1, 2).standard_normal(4)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)
        assert not np.array_equal(a, d)

    def test_key_depth_matters(self):
        shallow = rng_stream(0, 1).standard_normal(3)
        deep = rng_stream(0, 1, 0).standard_normal(3)
        assert not np.array_equal(shallow, deep)


class TestRunChain:
    def test_bit_reproducible(self, small_problem):
        data, prior = small_problem
        cfg = ChainConfig(total_iterations=60, burn_in=10, seed=123)
        one = run_chain(data, prior, cfg, keep_draws=True)
        two = run_chain(data, prior, cfg, keep_draws=True)
        np.testing.assert_array_equal(one.kept_draws, two.kept_draws)
        np.testing.assert_array_equal(one.mean, two.mean)

    def test_seed_changes_draws(self, small_problem):
        data, prior = small_problem
        one = run_chain(data, prior, ChainConfig(60, 10, seed=1), keep_draws=True)
        two = run_chain(data, prior, ChainConfig(60, 10, seed=2), keep_draws=True)
        assert not np.array_equal(one.kept_draws, two.kept_draws)

    def test_summary_matches_kept_draws(self, small_problem):
        data, prior = small_problem
        summary = run_chain(
            data, prior, ChainConfig(80, 20, seed=9), keep_draws=True
        )
        kept = summary.kept_draws
        assert kept.shape == (60, 3)
        np.testing.assert_allclose(summary.mean, kept.mean(axis=0), atol=1e-12)
        np.testing.assert_allclose(
            summary.covariance, np.cov(kept.T, ddof=1), atol=1e-12
        )

    def test_csv_output_round_trips(self, small_problem, tmp_path):
        data, prior = small_problem
        path = tmp_path / "draws.csv"
        summary = run_chain(
            data,
            prior,
            ChainConfig(30, 5, seed=4),
            draws_path=str(path),
            keep_draws=True,
        )
        with open(path, newline="") as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["beta_1", "beta_2", "beta_3"]
        parsed = np.array([[float(v) for v in row] for row in rows[1:]])
        np.testing.assert_array_equal(parsed, summary.kept_draws)

    def test_minimal_run_has_zero_covariance(self, small_problem):
        data, prior = small_problem
        summary = run_chain(data, prior, ChainConfig(2, 1, seed=0))
        np.testing.assert_array_equal(summary.covariance, np.zeros((3, 3)))
        assert summary.iterations == 2 and summary.burn_in == 1

    def test_init_beta_changes_start_not_law(self, small_problem):
        """Different starts consume the same stream, so the first kept
        draw differs but both runs remain valid chains."""
        data, prior = small_problem
        base = ChainConfig(10, 0, seed=11)
        warm = ChainConfig(10, 0, seed=11, init_beta=np.full(3, 2.0))
        cold = run_chain(data, prior, base, keep_draws=True)
        moved = run_chain(data, prior, warm, keep_draws=True)
        assert not np.array_equal(cold.kept_draws[0], moved.kept_draws[0])

    def test_summary_dict_fields(self, small_problem):
        data, prior = small_problem
        summary = run_chain(data, prior, ChainConfig(5, 2, seed=7))
        out = summary.to_dict()
        assert sorted(out) == ["burn_in", "covariance", "iterations", "mean", "seed"]
        assert out["iterations"] == 5 and out["burn_in"] == 2 and out["seed"] == 7
        assert len(out["mean"]) == 3 and len(out["covariance"]) == 3

    def test_progress_written_to_stderr(self, small_problem, capsys):
        data, prior = small_problem
        run_chain(data, prior, ChainConfig(6, 1, seed=0, progress_every=2))
        err = capsys.readouterr().err
        assert "2/6" in err and "6/6" in err

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ChainConfig(total_iterations=5, burn_in=5)
        with pytest.raises(ValueError):
            ChainConfig(total_iterations=5, burn_in=-1)

    def test_memory_budget_guard(self, small_problem):
        data, prior = small_problem
        with pytest.raises(ValueError):
            run_chain(
                data,
                prior,
                ChainConfig(1_000, 0, seed=0),
                keep_draws=True,
                memory_budget=10,
            )


class TestStationarity:
    def test_posterior_mean_matches_long_run_quadrature(self):
        """1-d chain against deterministic quadrature of the posterior.

        The posterior is proportional to the prior times the likelihood;
        a dense trapezoid grid gives the mean to high accuracy, and the
        ergodic average must agree within Monte Carlo error.
        """
        rng = np.random.default_rng(21)
        X = rng.standard_normal((12, 1))
        y = (rng.random(12) < 0.5).astype(float)
        data = Dataset(X, y)
        prior = Prior.isotropic(1, variance=4.0)

        grid = np.linspace(-8.0, 8.0, 20_001)
        eta = np.outer(X[:, 0], grid)
        log_post = (y @ eta) - np.logaddexp(0.0, eta).sum(axis=0)
        log_post += -0.5 * grid**2 / 4.0
        dens = np.exp(log_post - log_post.max())
        target_mean = float(np.trapezoid(grid * dens, grid) / np.trapezoid(dens, grid))

        summary = run_chain(data, prior, ChainConfig(22_000, 2_000, seed=3))
        se = float(np.sqrt(summary.covariance[0, 0] / 20_000.0))
        # kept draws are autocorrelated; allow a generous factor on the
        # iid standard error
        assert abs(summary.mean[0] - target_mean) < 10.0 * se

    def test_conjugate_step_replays_its_two_conditionals(self):
        """A conjugate step is exactly beta | w followed by w' | beta."""
        from pggap.logit_model import sample_beta

        rng = np.random.default_rng(31)
        X = rng.standard_normal((15, 2))
        y = (rng.random(15) < 0.5).astype(float)
        model = LogitModel(Dataset(X, y), Prior.isotropic(2, variance=9.0))
        w = rng.random(15) + 0.05

        stream = np.random.default_rng(99)
        w_next = conjugate_step(model, w, stream)

        replay = np.random.default_rng(99)
        beta = sample_beta(model.cond_normal(w), replay)
        np.testing.assert_array_equal(w_next, model.sample_w(beta, replay))

    def test_gibbs_step_changes_state(self):
        rng = np.random.default_rng(41)
        X = rng.standard_normal((10, 2))
        y = (rng.random(10) < 0.5).astype(float)
        model = LogitModel(Dataset(X, y), Prior.isotropic(2))
        beta = np.zeros(2)
        nxt = gibbs_step(model, beta, rng)
        assert nxt.shape == (2,)
        assert not np.array_equal(nxt, beta)

"""The two-block Gibbs sampler for the augmented logistic model.

One step of the beta-chain draws w | beta then beta' | w; the conjugate
w-chain interleaves the same conditionals in the opposite order.  Both
chains are exact: every conditional draw uses the exact Polya-Gamma and
Gaussian samplers, so the stationary laws are the exact marginals.
"""

from __future__ import annotations

import csv
import sys
from dataclasses import dataclass, field

import numpy as np

from .logit_model import Dataset, LogitModel, Prior, sample_beta
from .moments import RunningMoments


def rng_stream(seed, *key):
    """Independent generator for a (seed, key...) address.

    Distinct keys give statistically independent streams; a fixed
    (seed, key) pair is bit-reproducible.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


@dataclass(frozen=True)
class ChainConfig:
    total_iterations: int
    burn_in: int
    seed: int = 0
    chain_id: int = 0
    init_beta: np.ndarray | None = None
    progress_every: int | None = None

    def __post_init__(self):
        if self.total_iterations <= self.burn_in:
            raise ValueError("total_iterations must exceed burn_in")
        if self.burn_in < 0:
            raise ValueError("burn_in must be non-negative")


@dataclass
class ChainSummary:
    mean: np.ndarray
    covariance: np.ndarray
    iterations: int
    burn_in: int
    seed: int
    kept_draws: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self):
        return {
            "mean": self.mean.tolist(),
            "covariance": self.covariance.tolist(),
            "iterations": self.iterations,
            "burn_in": self.burn_in,
            "seed": self.seed,
        }


def gibbs_step(model: LogitModel, beta, rng):
    """One step of the beta-chain: w | beta, then beta' | w."""
    w = model.sample_w(beta, rng)
    cn = model.cond_normal(w)
    return sample_beta(cn, rng)


def conjugate_step(model: LogitModel, w, rng):
    """One step of the conjugate w-chain: beta | w, then w' | beta."""
    cn = model.cond_normal(w)
    beta = sample_beta(cn, rng)
    return model.sample_w(beta, rng)


# kept draws above this many floats go to disk, not memory
DEFAULT_MEMORY_BUDGET = 50_000_000


def run_chain(
    data: Dataset,
    prior: Prior,
    config: ChainConfig,
    draws_path=None,
    keep_draws=False,
    memory_budget=DEFAULT_MEMORY_BUDGET,
) -> ChainSummary:
    """Run the beta-chain and stream moments over the kept iterations.

    The posterior mean and covariance accumulate in one pass; kept draws
    are optionally written as CSV rows while the chain runs and are only
    retained in memory when they fit the budget.
    """
    model = LogitModel(data, prior)
    rng = rng_stream(config.seed, config.chain_id)
    beta = (
        np.zeros(data.p)
        if config.init_beta is None
        else np.asarray(config.init_beta, dtype=float).reshape(data.p)
    )
    kept = config.total_iterations - config.burn_in
    moments = RunningMoments(data.p)

    store = None
    if keep_draws:
        if kept * data.p > memory_budget:
            raise ValueError(
                "kept draws exceed the memory budget; pass draws_path instead"
            )
        store = np.empty((kept, data.p))

    writer = None
    handle = None
    if draws_path is not None:
        handle = open(draws_path, "w", newline="")
        writer = csv.writer(handle)
        writer.writerow(["beta_%d" % (j + 1) for j in range(data.p)])

    try:
        for it in range(config.total_iterations):
            beta = gibbs_step(model, beta, rng)
            if it >= config.burn_in:
                moments.update(beta)
                if store is not None:
                    store[it - config.burn_in] = beta
                if writer is not None:
                    writer.writerow(["%.17g" % v for v in beta])
            if config.progress_every and (it + 1) % config.progress_every == 0:
                print(
                    "chain %d: %d/%d iterations"
                    % (config.chain_id, it + 1, config.total_iterations),
                    file=sys.stderr,
                )
    finally:
        if handle is not None:
            handle.close()

    # a single kept draw has no spread to report
    covariance = (
        moments.covariance if kept > 1 else np.zeros((data.p, data.p))
    )
    return ChainSummary(
        mean=moments.mean,
        covariance=covariance,
        iterations=config.total_iterations,
        burn_in=config.burn_in,
        seed=config.seed,
        kept_draws=store,
    )

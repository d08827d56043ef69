"""Monte Carlo lower bounds on the spectral gap of the Gibbs chain.

For the two-block Gibbs chain with conditionals pi1(w | beta) and
pi2(beta | w), the trace of the l-th power of the beta-chain operator
is s_l = sum_i lambda_i^l (including the unit eigenvalue).  It admits
the unbiased estimator

    s_hat = (1/N) sum_i pi2(beta*_i | w*_i) / h(beta*_i),

where beta* ~ h, one auxiliary vector is drawn from pi1(. | beta*), and
w* is the state after l - 1 steps of the conjugate w-chain.  Both
conditional w-densities cancel from the ratio, so no Polya-Gamma
density evaluation appears in the hot loop.

Since s_l - 1 >= lambda_*^l, u = (s_hat - 1)^{1/l} estimates an upper
bound on the second-largest eigenvalue lambda_*, and 1 minus its upper
confidence limit is a probabilistic lower bound on the spectral gap
1 - lambda_*.

The importance density h is a multivariate Student's t, which keeps the
estimator variance finite; its parameters are tuned from a pilot run of
the chain itself.
"""

from __future__ import annotations

import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import linalg, special, stats

from .gibbs_chain import ChainConfig, rng_stream, run_chain
from .logit_model import Dataset, LogitModel, Prior, logistic_mle
from .moments import RunningMoments
from .polya_gamma import sample_pg_vector


@dataclass(frozen=True)
class StudentT:
    """Multivariate Student's t importance density."""

    location: np.ndarray
    scale: np.ndarray
    dof: float

    def __post_init__(self):
        loc = np.asarray(self.location, dtype=float)
        scale = np.asarray(self.scale, dtype=float)
        if loc.ndim != 1 or scale.shape != (loc.size, loc.size):
            raise ValueError("location and scale shapes disagree")
        if not self.dof > 0:
            raise ValueError("degrees of freedom must be positive")
        object.__setattr__(self, "location", loc)
        object.__setattr__(self, "scale", scale)
        try:
            chol = np.linalg.cholesky(scale)
        except np.linalg.LinAlgError:
            raise ValueError("scale matrix must be positive definite") from None
        object.__setattr__(self, "_chol", chol)
        half_logdet = float(np.sum(np.log(np.diag(chol))))
        p = loc.size
        norm = (
            special.gammaln(0.5 * (self.dof + p))
            - special.gammaln(0.5 * self.dof)
            - 0.5 * p * math.log(self.dof * math.pi)
            - half_logdet
        )
        object.__setattr__(self, "_log_norm", float(norm))

    @property
    def dim(self):
        return self.location.size

    def log_density(self, beta):
        """Log density at one point (p,) or a batch (m, p)."""
        beta = np.asarray(beta, dtype=float)
        one = beta.ndim == 1
        resid = np.atleast_2d(beta) - self.location
        y = linalg.solve_triangular(
            self._chol, resid.T, lower=True, check_finite=False
        )
        quad = np.sum(y * y, axis=0)
        out = self._log_norm - 0.5 * (self.dof + self.dim) * np.log1p(quad / self.dof)
        return float(out[0]) if one else out

    def sample(self, rng, size):
        z = rng.standard_normal((int(size), self.dim))
        g = rng.chisquare(self.dof, int(size))
        return self.location + (z @ self._chol.T) / np.sqrt(g / self.dof)[:, None]


def student_t_log_density(h: StudentT, beta):
    """Log of the p-variate Student's t density at beta."""
    return h.log_density(beta)


@dataclass(frozen=True)
class EstimatorConfig:
    l: int = 5
    n_samples: int = 100_000
    seed: int = 0
    workers: int = 1
    batch_size: int = 256
    confidence_level: float = 0.95
    progress_every: int | None = None

    def __post_init__(self):
        if self.l < 1:
            raise ValueError("chain power l must be a positive integer")
        if self.n_samples < 2:
            raise ValueError("need at least two samples")
        if self.workers < 1:
            raise ValueError("workers must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if not 0.0 < self.confidence_level < 1.0:
            raise ValueError("confidence_level must lie in (0, 1)")


@dataclass
class GapEstimate:
    """Power-trace estimate and the derived eigenvalue/gap bounds.

    When s_hat <= 1 the Monte Carlo noise has swamped the signal (the
    true s_l always exceeds 1 because the unit eigenvalue contributes);
    u and the gap bound are then undefined and reported as NaN with
    ``u_defined`` False rather than clamped.
    """

    s_hat: float
    s_se: float
    u_hat: float
    u_se: float
    ci_low: float
    ci_high: float
    gap_lower_bound: float
    u_defined: bool
    l: int
    n_terms: int
    max_log_ratio: float

    def to_dict(self):
        def _clean(v):
            return None if isinstance(v, float) and math.isnan(v) else v

        return {
            "s_hat": self.s_hat,
            "s_se": self.s_se,
            "u_hat": _clean(self.u_hat),
            "u_se": _clean(self.u_se),
            "ci_low": _clean(self.ci_low),
            "ci_high": _clean(self.ci_high),
            "gap_lower_bound": _clean(self.gap_lower_bound),
            "u_defined": self.u_defined,
            "l": self.l,
            "n_terms": self.n_terms,
            "max_log_ratio": self.max_log_ratio,
        }


def _batch_terms(model: LogitModel, h: StudentT, l, rng, size):
    """One batch of log importance ratios and the log-ratio diagnostics."""
    beta_star = h.sample(rng, size)
    w = sample_pg_vector(np.abs(beta_star @ model.Xt), rng)
    for _ in range(l - 1):
        means, chols, _ = model.cond_normal_batch(w)
        z = rng.standard_normal((size, model.data.p))
        beta = means + _solve_upper_batch(chols, z)
        w = sample_pg_vector(np.abs(beta @ model.Xt), rng)
    means, chols, log_dets = model.cond_normal_batch(w)
    resid = beta_star - means
    half = np.einsum("bij,bi->bj", chols, resid)
    quad = np.sum(half * half, axis=1)
    log_num = -0.5 * model.data.p * math.log(2.0 * math.pi) + 0.5 * log_dets - 0.5 * quad
    log_terms = log_num - h.log_density(beta_star)
    return log_terms, log_terms - 0.5 * log_dets


def _solve_upper_batch(chols, z):
    out = np.empty_like(z)
    for i in range(z.shape[0]):
        out[i] = linalg.solve_triangular(
            chols[i].T, z[i], lower=False, check_finite=False
        )
    return out


def _accumulate(data, prior, h, l, seed, worker_id, n_draws, batch_size,
                progress_every=None):
    model = LogitModel(data, prior)
    rng = rng_stream(seed, worker_id)
    moments = RunningMoments(1)
    max_log_ratio = -np.inf
    done = 0
    while done < n_draws:
        size = min(batch_size, n_draws - done)
        log_terms, log_ratios = _batch_terms(model, h, l, rng, size)
        if not np.all(np.isfinite(log_terms) | (log_terms == -np.inf)):
            bad = int(np.argmax(~(np.isfinite(log_terms) | (log_terms == -np.inf))))
            raise RuntimeError(
                "non-finite estimator term at draw %d of worker %d (seed %d)"
                % (done + bad, worker_id, seed)
            )
        with np.errstate(under="ignore"):
            moments.update_batch(np.exp(log_terms)[:, None])
        max_log_ratio = max(max_log_ratio, float(log_ratios.max()))
        done += size
        if progress_every and (done // progress_every) > ((done - size) // progress_every):
            print("estimator: %d/%d draws" % (done, n_draws), file=sys.stderr)
    return moments, max_log_ratio


def _accumulate_remote(args):
    (X, y, b, B, loc, scale, dof, l, seed, worker_id, n_draws, batch) = args
    data = Dataset(X, y)
    prior = Prior(b, B)
    h = StudentT(loc, scale, dof)
    moments, mlr = _accumulate(data, prior, h, l, seed, worker_id, n_draws, batch)
    return moments.state(), mlr


def estimate_s_l(data: Dataset, prior: Prior, h: StudentT,
                 config: EstimatorConfig) -> GapEstimate:
    """Estimate the power trace s_l and the implied spectral gap bound.

    Work is split over ``config.workers`` deterministic substreams, one
    per worker, and the streaming moments merge exactly, so a fixed
    (seed, workers) pair is bit-reproducible.
    """
    if h.dim != data.p:
        raise ValueError("importance density dimension differs from the model")
    counts = [
        config.n_samples // config.workers
        + (1 if w < config.n_samples % config.workers else 0)
        for w in range(config.workers)
    ]
    total = RunningMoments(1)
    max_log_ratio = -np.inf
    if config.workers == 1:
        total, max_log_ratio = _accumulate(
            data, prior, h, config.l, config.seed, 0, counts[0],
            config.batch_size, config.progress_every,
        )
    else:
        jobs = [
            (
                np.asarray(data.X), np.asarray(data.y), np.asarray(prior.b),
                np.asarray(prior.B), np.asarray(h.location), np.asarray(h.scale),
                h.dof, config.l, config.seed, w, counts[w], config.batch_size,
            )
            for w in range(config.workers)
        ]
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            for state, mlr in pool.map(_accumulate_remote, jobs):
                total.merge(RunningMoments.from_state(state))
                max_log_ratio = max(max_log_ratio, mlr)

    s_hat = float(total.mean[0])
    s_se = float(np.sqrt(total.covariance[0, 0] / total.count))
    z = float(stats.norm.ppf(0.5 + 0.5 * config.confidence_level))
    if s_hat > 1.0:
        root = 1.0 / config.l
        u_hat = (s_hat - 1.0) ** root
        u_se = s_se * root * (s_hat - 1.0) ** (root - 1.0)
        ci_low = u_hat - z * u_se
        ci_high = u_hat + z * u_se
        return GapEstimate(
            s_hat=s_hat, s_se=s_se, u_hat=u_hat, u_se=u_se,
            ci_low=ci_low, ci_high=ci_high,
            gap_lower_bound=1.0 - ci_high, u_defined=True,
            l=config.l, n_terms=config.n_samples, max_log_ratio=max_log_ratio,
        )
    nan = float("nan")
    return GapEstimate(
        s_hat=s_hat, s_se=s_se, u_hat=nan, u_se=nan, ci_low=nan, ci_high=nan,
        gap_lower_bound=nan, u_defined=False,
        l=config.l, n_terms=config.n_samples, max_log_ratio=max_log_ratio,
    )


def draw_pair(data: Dataset, prior: Prior, h: StudentT, l, rng):
    """One (beta*, w*) draw of the estimator's importance scheme.

    beta* comes from h; one auxiliary vector w is drawn from its
    conditional given beta*; for l = 1, w* is that w, otherwise w* is
    the state after l - 1 conjugate-chain steps started at w.
    """
    if l < 1:
        raise ValueError("chain power l must be a positive integer")
    model = LogitModel(data, prior)
    beta_star = h.sample(rng, 1)
    w = sample_pg_vector(np.abs(beta_star @ model.Xt), rng)
    for _ in range(l - 1):
        means, chols, _ = model.cond_normal_batch(w)
        z = rng.standard_normal((1, model.data.p))
        beta = means + _solve_upper_batch(chols, z)
        w = sample_pg_vector(np.abs(beta @ model.Xt), rng)
    return beta_star[0], w[0]


def tune_auxiliary(data: Dataset, prior: Prior, cfg: ChainConfig | None = None,
                   nu=5.0) -> StudentT:
    """Fit the Student's t importance density from a pilot chain.

    The pilot chain runs under ``cfg`` (default: 25,000 iterations with
    5,000 burn-in).  When ``cfg.init_beta`` is unset the chain starts at
    the logistic MLE, or at zero when the MLE does not exist (separated
    or degenerate designs).  The t density takes the pilot posterior
    mean and covariance as location and scale; a covariance that fails
    its Cholesky factorization is nudged by a relative ridge before the
    result is built.
    """
    if cfg is None:
        cfg = ChainConfig(total_iterations=25_000, burn_in=5_000)
    if cfg.total_iterations - cfg.burn_in < 2:
        raise ValueError("tuning chain needs at least two kept draws")
    if cfg.init_beta is None:
        try:
            init_beta = logistic_mle(data)
        except RuntimeError:
            init_beta = np.zeros(data.p)
        cfg = ChainConfig(
            total_iterations=cfg.total_iterations,
            burn_in=cfg.burn_in,
            seed=cfg.seed,
            chain_id=cfg.chain_id,
            init_beta=init_beta,
            progress_every=cfg.progress_every,
        )
    summary = run_chain(data, prior, cfg)
    scale = summary.covariance
    try:
        np.linalg.cholesky(scale)
    except np.linalg.LinAlgError:
        ridge = 1e-8 * np.trace(scale) / data.p
        scale = scale + ridge * np.eye(data.p)
    return StudentT(location=summary.mean, scale=scale, dof=nu)


def u_monotone_check(s_values):
    """Whether (l, s_l) pairs imply a nonincreasing u_l = (s_l - 1)^{1/l}.

    Exact power sums always satisfy this; noisy estimates need not, so
    the check belongs to oracle-level validation only.  Entries with
    s_l <= 1 are rejected.  Comparisons allow 1e-12 relative slack so
    that fractional-power roundoff cannot flip a tie.
    """
    pairs = sorted((int(l), float(s)) for l, s in s_values)
    us = []
    for l, s in pairs:
        if l < 1:
            raise ValueError("powers must be positive integers")
        if s <= 1.0:
            raise ValueError("power sums must exceed 1")
        us.append((s - 1.0) ** (1.0 / l))
    return all(b <= a * (1.0 + 1e-12) for a, b in zip(us, us[1:]))


def sweep_l(data: Dataset, prior: Prior, h: StudentT, l_values,
            config: EstimatorConfig):
    """Run the estimator across several chain powers with one tuning.

    Returns a list of GapEstimate objects in the order of ``l_values``.
    Estimates share the base seed but use distinct substreams per l.
    """
    out = []
    for k, l in enumerate(l_values):
        cfg = EstimatorConfig(
            l=int(l),
            n_samples=config.n_samples,
            seed=config.seed + 7919 * k,
            workers=config.workers,
            batch_size=config.batch_size,
            confidence_level=config.confidence_level,
            progress_every=config.progress_every,
        )
        out.append(estimate_s_l(data, prior, h, cfg))
    return out

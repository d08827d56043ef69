"""Polya-Gamma Gibbs sampling for Bayesian logistic regression, with
Monte Carlo lower bounds on the sampler's spectral gap.

The package has three layers: the numerical core (`polya_gamma`,
`logit_model`, `gibbs_chain`, `spectral_gap`, `birth_death`, `credit`),
an HTTP service exposing it (`pggap.service`), and a CLI client
(`pggap.cli`, installed as the ``pggap`` script).
"""

from .birth_death import (
    BirthDeathSpec,
    Spectrum,
    TraceSum,
    build_truncated,
    demo_sequences,
    exact_spectrum,
    mc_estimate_s_l_discrete,
    trace_sum,
)
from .credit import EncodingSpec, RawCreditRecord, encode, load_dataset, parse_german_data
from .gibbs_chain import ChainConfig, ChainSummary, rng_stream, run_chain
from .logit_model import Dataset, LogitModel, Prior, logistic_mle
from .moments import RunningMoments
from .polya_gamma import pg_density, pg_log_density, pg_mean, sample_pg
from .spectral_gap import (
    EstimatorConfig,
    GapEstimate,
    StudentT,
    draw_pair,
    estimate_s_l,
    student_t_log_density,
    sweep_l,
    tune_auxiliary,
    u_monotone_check,
)

__version__ = "0.1.0"

__all__ = [
    "BirthDeathSpec",
    "ChainConfig",
    "ChainSummary",
    "Dataset",
    "EncodingSpec",
    "EstimatorConfig",
    "GapEstimate",
    "LogitModel",
    "Prior",
    "RawCreditRecord",
    "RunningMoments",
    "Spectrum",
    "StudentT",
    "TraceSum",
    "build_truncated",
    "demo_sequences",
    "draw_pair",
    "encode",
    "estimate_s_l",
    "exact_spectrum",
    "load_dataset",
    "logistic_mle",
    "mc_estimate_s_l_discrete",
    "parse_german_data",
    "pg_density",
    "pg_log_density",
    "pg_mean",
    "rng_stream",
    "run_chain",
    "sample_pg",
    "student_t_log_density",
    "sweep_l",
    "trace_sum",
    "tune_auxiliary",
    "u_monotone_check",
    "__version__",
]

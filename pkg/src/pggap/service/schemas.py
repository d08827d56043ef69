"""Request and response bodies for the HTTP endpoints.

Field names and defaults mirror the CLI flags one to one, so a config
file, a CLI invocation, and a raw HTTP call all speak the same schema.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field


class DataSource(BaseModel):
    """Where the design matrix comes from.

    ``path`` points at a file in the UCI german.data layout (20
    whitespace-separated attributes plus an outcome code per line).
    When omitted, the PGGAP_GERMAN_DATA environment variable is
    consulted, and failing that a bundled synthetic sample with the
    same layout and marginals is used.
    """

    path: str | None = None
    standardize: bool = False


class PriorSpec(BaseModel):
    """Isotropic normal prior: b = mean * 1, B = variance * I."""

    mean: float = 0.0
    variance: float = Field(10.0, gt=0.0)


class ChainRunRequest(BaseModel):
    data: DataSource = DataSource()
    prior: PriorSpec = PriorSpec()
    iterations: int = Field(25_000, ge=1)
    burn_in: int = Field(5_000, ge=0)
    seed: int = 0
    init: Literal["mle", "zero"] = "mle"
    draws_path: str | None = None
    progress_every: int | None = Field(None, ge=1)


class ChainRunResponse(BaseModel):
    mean: list[float]
    covariance: list[list[float]]
    iterations: int
    burn_in: int
    seed: int
    data_source: str
    draws_path: str | None = None


class GapEstimateRequest(BaseModel):
    data: DataSource = DataSource()
    prior: PriorSpec = PriorSpec()
    tuning_iterations: int = Field(25_000, ge=2)
    tuning_burn_in: int = Field(5_000, ge=0)
    tuning_seed: int = 0
    tuning_init: Literal["mle", "zero"] = "mle"
    nu: float = Field(5.0, gt=0.0)
    l: int = Field(5, ge=1)
    n_samples: int = Field(100_000, ge=2)
    seed: int = 0
    workers: int = Field(1, ge=1)
    batch_size: int = Field(256, ge=1)
    confidence_level: float = Field(0.95, gt=0.0, lt=1.0)
    progress_every: int | None = Field(None, ge=1)


class GapEstimateModel(BaseModel):
    """One estimate of the power trace and the eigenvalue bound.

    ``u_hat``, its standard error, the confidence interval, and the gap
    lower bound are null when the trace estimate lands at or below 1
    (``u_defined`` false): Monte Carlo noise pushed the estimate under
    the theoretical floor, and the caller should raise the sample size
    or the power.
    """

    s_hat: float
    s_se: float
    u_hat: float | None = None
    u_se: float | None = None
    ci_low: float | None = None
    ci_high: float | None = None
    gap_lower_bound: float | None = None
    u_defined: bool
    l: int
    n_terms: int
    max_log_ratio: float


class GapEstimateResponse(GapEstimateModel):
    config: GapEstimateRequest
    data_source: str


class SweepRequest(BaseModel):
    data: DataSource = DataSource()
    prior: PriorSpec = PriorSpec()
    tuning_iterations: int = Field(25_000, ge=2)
    tuning_burn_in: int = Field(5_000, ge=0)
    tuning_seed: int = 0
    tuning_init: Literal["mle", "zero"] = "mle"
    nu: float = Field(5.0, gt=0.0)
    l_values: list[int] = Field(default=[1, 2, 3, 4, 5, 6, 7, 8], min_length=1)
    n_samples: int = Field(2_000, ge=2)
    seed: int = 0
    workers: int = Field(1, ge=1)
    batch_size: int = Field(256, ge=1)
    confidence_level: float = Field(0.95, gt=0.0, lt=1.0)
    progress_every: int | None = Field(None, ge=1)


class SweepResponse(BaseModel):
    results: list[GapEstimateModel]
    config: SweepRequest
    data_source: str


class BirthDeathDemoRequest(BaseModel):
    m: int = Field(200, ge=2)
    l_values: list[int] = Field(default=[1, 2, 3, 4, 5, 6, 7, 8], min_length=1)
    mc_samples: int = Field(20_000, ge=0)
    seed: int = 0


class BirthDeathPowerRow(BaseModel):
    l: int
    s_l: float
    u_l: float


class BirthDeathMcRow(BaseModel):
    l: int
    estimate: float
    se: float
    z_score: float


class BirthDeathDemoResponse(BaseModel):
    m: int
    trace_sum: float
    is_trace_class: bool
    trace_terms: int
    tail_half_width: float
    lambda_star: float
    powers: list[BirthDeathPowerRow]
    mc_checks: list[BirthDeathMcRow]


class CheckModel(BaseModel):
    name: str
    passed: bool
    detail: str


class ValidateResponse(BaseModel):
    passed: bool
    n_passed: int
    n_checks: int
    checks: list[CheckModel]

"""FastAPI application wiring the library into HTTP endpoints.

Endpoints run synchronously; the heavy ones (chain runs, gap
estimates) block for their full compute time, which suits the
single-user workflow this service is built for.  Input problems map to
400, unexpected numerical failures to 500.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import credit
from ..birth_death import (
    demo_sequences,
    exact_spectrum,
    mc_estimate_s_l_discrete,
    trace_sum,
)
from ..gibbs_chain import ChainConfig, rng_stream, run_chain
from ..logit_model import Prior, logistic_mle
from ..spectral_gap import EstimatorConfig, estimate_s_l, sweep_l, tune_auxiliary
from ..validation import run_self_checks
from . import schemas


def _load_dataset(source: schemas.DataSource):
    spec = credit.EncodingSpec(standardize=True) if source.standardize else None
    try:
        return credit.load_dataset(source.path, spec)
    except FileNotFoundError as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc))


def _init_beta(kind, data, prior):
    if kind == "zero":
        return None
    try:
        return logistic_mle(data)
    except RuntimeError:
        # separable or rank-deficient design; the zero vector is always valid
        return None


def _estimate(est):
    return schemas.GapEstimateModel(**est.to_dict())


def create_app() -> FastAPI:
    app = FastAPI(
        title="pggap",
        description=(
            "Polya-Gamma Gibbs sampling for Bayesian logistic regression and "
            "Monte Carlo lower bounds on the sampler's spectral gap."
        ),
    )

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/chain/run", response_model=schemas.ChainRunResponse)
    def chain_run(req: schemas.ChainRunRequest):
        data, source = _load_dataset(req.data)
        prior = Prior.isotropic(data.p, mean=req.prior.mean, variance=req.prior.variance)
        try:
            config = ChainConfig(
                total_iterations=req.iterations,
                burn_in=req.burn_in,
                seed=req.seed,
                init_beta=_init_beta(req.init, data, prior),
                progress_every=req.progress_every,
            )
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        try:
            summary = run_chain(data, prior, config, draws_path=req.draws_path)
        except OSError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except RuntimeError as exc:
            raise HTTPException(status_code=500, detail=str(exc))
        return schemas.ChainRunResponse(
            **summary.to_dict(), data_source=source, draws_path=req.draws_path
        )

    def _tuned_auxiliary(req, data, prior):
        try:
            chain_cfg = ChainConfig(
                total_iterations=req.tuning_iterations,
                burn_in=req.tuning_burn_in,
                seed=req.tuning_seed,
                init_beta=_init_beta(req.tuning_init, data, prior),
                progress_every=req.progress_every,
            )
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        try:
            return tune_auxiliary(data, prior, chain_cfg, nu=req.nu)
        except RuntimeError as exc:
            raise HTTPException(status_code=500, detail=str(exc))

    @app.post("/gap/estimate", response_model=schemas.GapEstimateResponse)
    def gap_estimate(req: schemas.GapEstimateRequest):
        data, source = _load_dataset(req.data)
        prior = Prior.isotropic(data.p, mean=req.prior.mean, variance=req.prior.variance)
        h = _tuned_auxiliary(req, data, prior)
        config = EstimatorConfig(
            l=req.l,
            n_samples=req.n_samples,
            seed=req.seed,
            workers=req.workers,
            batch_size=req.batch_size,
            confidence_level=req.confidence_level,
            progress_every=req.progress_every,
        )
        try:
            est = estimate_s_l(data, prior, h, config)
        except RuntimeError as exc:
            raise HTTPException(status_code=500, detail=str(exc))
        return schemas.GapEstimateResponse(
            **est.to_dict(), config=req, data_source=source
        )

    @app.post("/gap/sweep", response_model=schemas.SweepResponse)
    def gap_sweep(req: schemas.SweepRequest):
        if any(l < 1 for l in req.l_values):
            raise HTTPException(status_code=400, detail="every power must be >= 1")
        data, source = _load_dataset(req.data)
        prior = Prior.isotropic(data.p, mean=req.prior.mean, variance=req.prior.variance)
        h = _tuned_auxiliary(req, data, prior)
        config = EstimatorConfig(
            l=1,
            n_samples=req.n_samples,
            seed=req.seed,
            workers=req.workers,
            batch_size=req.batch_size,
            confidence_level=req.confidence_level,
            progress_every=req.progress_every,
        )
        try:
            results = sweep_l(data, prior, h, req.l_values, config)
        except RuntimeError as exc:
            raise HTTPException(status_code=500, detail=str(exc))
        return schemas.SweepResponse(
            results=[_estimate(e) for e in results], config=req, data_source=source
        )

    @app.post("/birth-death/demo", response_model=schemas.BirthDeathDemoResponse)
    def birth_death_demo(req: schemas.BirthDeathDemoRequest):
        if any(l < 1 for l in req.l_values):
            raise HTTPException(status_code=400, detail="every power must be >= 1")
        if req.mc_samples == 1:
            raise HTTPException(
                status_code=400,
                detail="mc_samples must be 0 (skip) or at least 2",
            )
        spec = demo_sequences()
        ts = trace_sum(spec)
        spectrum = exact_spectrum(spec, req.m)
        powers = [
            schemas.BirthDeathPowerRow(
                l=l, s_l=spectrum.power_sum(l), u_l=spectrum.u_value(l)
            )
            for l in req.l_values
        ]
        mc_checks = []
        if req.mc_samples > 0:
            for l in req.l_values:
                est, se = mc_estimate_s_l_discrete(
                    spec, req.m, l, req.mc_samples, rng_stream(req.seed, l)
                )
                mc_checks.append(
                    schemas.BirthDeathMcRow(
                        l=l,
                        estimate=est,
                        se=se,
                        z_score=(est - spectrum.power_sum(l)) / se,
                    )
                )
        return schemas.BirthDeathDemoResponse(
            m=req.m,
            trace_sum=ts.value,
            is_trace_class=ts.is_trace_class,
            trace_terms=ts.n_terms,
            tail_half_width=ts.tail_half_width,
            lambda_star=spectrum.lambda_star,
            powers=powers,
            mc_checks=mc_checks,
        )

    @app.post("/validate", response_model=schemas.ValidateResponse)
    def validate():
        checks = run_self_checks()
        n_passed = sum(c.passed for c in checks)
        return schemas.ValidateResponse(
            passed=n_passed == len(checks),
            n_passed=n_passed,
            n_checks=len(checks),
            checks=[
                schemas.CheckModel(name=c.name, passed=c.passed, detail=c.detail)
                for c in checks
            ],
        )

    return app

"""Fast self-checks wiring each numerical component to an independent oracle.

Each check recomputes a quantity two ways (closed form vs quadrature,
series vs matrix, streaming vs two-pass) and reports the discrepancy.
The suite is intentionally small and quick; the full test suite covers
the same ground at much higher resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import birth_death, polya_gamma
from .logit_model import Dataset, Prior, cond_normal
from .moments import RunningMoments
from .spectral_gap import StudentT


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _check(name, value, tol, detail_fmt="discrepancy %.3e (tol %.1e)"):
    return CheckResult(
        name=name, passed=bool(value <= tol), detail=detail_fmt % (value, tol)
    )


def run_self_checks() -> list[CheckResult]:
    checks = []

    val, _ = integrate.quad(
        lambda z: polya_gamma.pg_density(z, 1.0), 0.0, np.inf, limit=200
    )
    checks.append(_check("pg_density normalizes (d=1)", abs(val - 1.0), 1e-8))

    closed = polya_gamma.pg_mean(2.0)
    quad = polya_gamma.pg_mean_quadrature(2.0)
    checks.append(_check("pg mean closed form vs quadrature (d=2)", abs(closed - quad), 1e-10))

    cdf = polya_gamma.pg_cdf_quadrature(1.0, n_knots=256)
    idx = np.searchsorted(cdf.knots, [0.1, 0.3, 1.0])
    zs = cdf.knots[idx]
    gap = float(np.max(np.abs(polya_gamma.pg_cdf_series(zs, 1.0) - cdf.values[idx])))
    checks.append(_check("pg cdf series vs quadrature (d=1)", gap, 1e-9))

    rng = np.random.default_rng(7)
    X = rng.standard_normal((5, 2))
    y = np.array([1, 0, 1, 1, 0])
    w = rng.random(5) + 0.1
    prior = Prior.isotropic(2, variance=4.0)
    cn = cond_normal(Dataset(X, y), prior, w)
    prec = X.T @ (w[:, None] * X) + np.linalg.inv(prior.B)
    dense_cov = np.linalg.inv(prec)
    dense_mean = dense_cov @ (X.T @ (y - 0.5) + np.linalg.inv(prior.B) @ prior.b)
    gap = max(
        float(np.max(np.abs(cn.covariance - dense_cov))),
        float(np.max(np.abs(cn.mean - dense_mean))),
    )
    checks.append(_check("gaussian conditional vs dense inversion", gap, 1e-10))

    spec = birth_death.demo_sequences()
    tk = birth_death.build_truncated(spec, 50)
    gap = float(np.max(np.abs(tk.K.sum(axis=1) - 1.0)))
    checks.append(_check("birth-death rows are stochastic (m=50)", gap, 1e-14))

    ts = birth_death.trace_sum(spec)
    tk200 = birth_death.build_truncated(spec, 200)
    lo, hi = spec.r_tail(200)
    p_m = float(birth_death.pqr(spec, np.array([200]))[0][0])
    matrix_route = float(np.trace(tk200.K)) + 0.5 * (lo + hi) - p_m
    checks.append(
        _check("diagonal sum vs truncated trace plus tail", abs(ts.value - matrix_route), 1e-10)
    )

    spectrum = birth_death.exact_spectrum(spec, 200)
    est, se = birth_death.mc_estimate_s_l_discrete(
        spec, 200, 3, 20_000, np.random.default_rng(12)
    )
    zscore = abs(est - spectrum.power_sum(3)) / se
    checks.append(
        CheckResult(
            name="lattice power-trace estimate matches spectrum (l=3)",
            passed=bool(zscore < 4.0),
            detail="z-score %.2f (threshold 4)" % zscore,
        )
    )

    rows = rng.standard_normal((500, 3))
    rm = RunningMoments(3)
    for row in rows[:200]:
        rm.update(row)
    rm.update_batch(rows[200:])
    gap = max(
        float(np.max(np.abs(rm.mean - rows.mean(axis=0)))),
        float(np.max(np.abs(rm.covariance - np.cov(rows.T, ddof=1)))),
    )
    checks.append(_check("streaming moments vs two-pass", gap, 1e-10))

    h = StudentT(np.zeros(1), np.eye(1), 1.0)
    gap = abs(h.log_density(np.zeros(1)) + math.log(math.pi))
    checks.append(_check("student t density (cauchy point value)", gap, 1e-12))

    return checks

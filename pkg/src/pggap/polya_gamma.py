"""Polya-Gamma PG(1, d) density evaluation and exact sampling.

A PG(1, d) variable has density

    f(z; d) = cosh(d/2) * exp(-d^2 z / 2) * g(z),    z > 0,

where g is the PG(1, 0) density.  g admits two alternating series
expansions.  One has terms

    a_k(z) = (2k+1) / sqrt(2 pi z^3) * exp(-(2k+1)^2 / (8 z)),

which decrease in k for z < 1/ln 3, and the dual has terms

    b_k(z) = 4 pi (k + 1/2) * exp(-2 pi^2 (k + 1/2)^2 z),

which decrease for z > ln 3 / (4 pi^2).  Each expansion is used only
where its terms decrease, so consecutive partial sums bracket g and the
truncation error is bounded by the first omitted term.

Sampling is exact rejection from a two-piece envelope built from the
leading terms: a tilted inverse-Gaussian kernel on (0, t] and a shifted
exponential on (t, inf).  Acceptance is decided by the alternating
partial sums after finitely many terms almost surely, so no series is
ever truncated approximately.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, interpolate, special

from .errors import SamplerConvergenceError, SeriesTruncationError

# Both families have decreasing terms on [ln3/(4 pi^2), 1/ln3]; the
# density switches families inside that window.
Z_SWITCH = 4.0 / math.pi**2

# Envelope split for the sampler, near the crossing of the two
# leading-term bounds on g.
T_SPLIT = 0.64

_MAX_SERIES_TERMS = 200
_MAX_REJECTION_ROUNDS = 1000
_LAMBDA = 0.25  # inverse-Gaussian shape matching the a_0 kernel


def _log_cosh(x):
    x = np.abs(x)
    return x + np.log1p(np.exp(-2.0 * x)) - math.log(2.0)


def _validate_z(z):
    if not np.all(np.isfinite(z)) or np.any(z <= 0.0):
        raise ValueError("density argument z must be finite and positive")


def _validate_tilt(d):
    if not np.all(np.isfinite(d)) or np.any(d < 0.0):
        raise ValueError("tilt d must be finite and non-negative")


def _log_series_sum(z, switch_at=Z_SWITCH, max_terms=_MAX_SERIES_TERMS):
    """log g(z), evaluated with the series family selected by ``switch_at``.

    Valid for any switch point inside the window where both families
    have decreasing terms.  Returns an array of the broadcast shape.
    """
    z = np.asarray(z, dtype=float)
    small = z <= switch_at
    with np.errstate(over="ignore", divide="ignore"):
        log_lead = np.where(
            small,
            -0.5 * np.log(2.0 * math.pi * z**3) - 1.0 / (8.0 * z),
            math.log(2.0 * math.pi) - 0.5 * math.pi**2 * z,
        )
        decay = np.where(small, 0.5 / z, 2.0 * math.pi**2 * z)
    s = np.ones_like(z)
    sign = -1.0
    for k in range(1, max_terms + 1):
        ratio = (2 * k + 1) * np.exp(-decay * (k * k + k))
        s = s + sign * ratio
        sign = -sign
        if ratio.max() < 1e-17:
            break
    else:
        raise SeriesTruncationError(
            "series for g(z) did not converge within %d terms" % max_terms
        )
    return log_lead + np.log(s)


def pg_log_density(z, d=0.0, max_terms=_MAX_SERIES_TERMS):
    """Log density of PG(1, d) at z.  Broadcasts over z and d."""
    z = np.asarray(z, dtype=float)
    d = np.asarray(d, dtype=float)
    _validate_z(z)
    _validate_tilt(d)
    out = _log_cosh(0.5 * d) - 0.5 * d**2 * z + _log_series_sum(z, max_terms=max_terms)
    if out.ndim == 0:
        return float(out)
    return out


def pg_density(z, d=0.0, max_terms=_MAX_SERIES_TERMS):
    """Density of PG(1, d) at z.  Broadcasts over z and d."""
    return np.exp(pg_log_density(z, d, max_terms=max_terms))


def g_density(z, max_terms=_MAX_SERIES_TERMS):
    """Density of the untilted base distribution, g(z) = PG(1, 0)."""
    return pg_density(z, 0.0, max_terms=max_terms)


def pg_mean(d):
    """E[Z] for Z ~ PG(1, d): tanh(d/2) / (2 d), continuous at d = 0."""
    d = np.asarray(d, dtype=float)
    _validate_tilt(d)
    small = np.abs(d) < 1e-4
    safe = np.where(small, 1.0, d)
    out = np.where(small, 0.25 - d * d / 48.0, np.tanh(0.5 * safe) / (2.0 * safe))
    if out.ndim == 0:
        return float(out)
    return out


def pg_mean_quadrature(d):
    """E[Z] by adaptive quadrature of z * f(z; d) over (0, inf)."""
    _validate_tilt(np.asarray(d, float))
    f = lambda z: z * pg_density(z, d)
    knots = [0.0, 0.05, 0.25, 1.0, 5.0]
    total = 0.0
    for a, b in zip(knots[:-1], knots[1:]):
        val, _ = integrate.quad(f, a, b, epsabs=1e-14, epsrel=1e-12, limit=200)
        total += val
    tail, _ = integrate.quad(f, knots[-1], np.inf, epsabs=1e-14, epsrel=1e-12, limit=200)
    return total + tail


def pg_mean_series(d, n_terms=40000):
    """E[Z] by termwise integration of the large-z expansion.

    Each dual-series term integrates in closed form against z, giving

        E[Z] = cosh(d/2) * sum_n (-1)^n 4 pi (n + 1/2) / K_n^2,
        K_n = 2 pi^2 (n + 1/2)^2 + d^2 / 2.

    Independent of the quadrature route and of pg_mean.
    """
    _validate_tilt(np.asarray(d, float))
    n = np.arange(n_terms, dtype=float)
    k_n = 2.0 * math.pi**2 * (n + 0.5) ** 2 + 0.5 * d * d
    terms = 4.0 * math.pi * (n + 0.5) / k_n**2
    s = np.sum(np.where(n % 2 == 0, terms, -terms))
    return float(np.exp(_log_cosh(0.5 * np.asarray(d)) + math.log(s)))


def pg_cdf_series(z, d, n_terms=2000):
    """CDF of PG(1, d) by termwise integration of the large-z expansion.

    Written as one minus the integrated upper tail, whose terms carry
    the factor exp(-K_n z) and so converge superexponentially; the
    direct form converges only conditionally.  Values below roundoff of
    1 are reported as 0.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    _validate_z(z)
    _validate_tilt(np.asarray(d, float))
    log_cosh = float(_log_cosh(0.5 * np.asarray(d)))
    n = np.arange(n_terms, dtype=float)
    k_n = 2.0 * math.pi**2 * (n + 0.5) ** 2 + 0.5 * d * d
    coef = np.where(n % 2 == 0, 1.0, -1.0) * 4.0 * math.pi * (n + 0.5) / k_n
    with np.errstate(under="ignore"):
        tail = np.sum(coef[None, :] * np.exp(log_cosh - np.outer(z, k_n)), axis=1)
    out = np.clip(1.0 - tail, 0.0, 1.0)
    return out if out.size > 1 else float(out[0])


class QuadratureCdf:
    """CDF of PG(1, d) built from piecewise quadrature of the density.

    The cumulative values at the knots carry only quadrature error;
    between knots a monotone cubic interpolant is used, which is plenty
    for goodness-of-fit testing.  ``knots`` and ``values`` expose the
    interpolation-free grid for oracle comparisons.
    """

    def __init__(self, d, n_knots=1024):
        d = float(d)
        _validate_tilt(np.asarray(d, float))
        self.d = d
        rate = 0.5 * (math.pi**2 + d * d)
        # envelope tail: 1 - F(Z) <= cosh(d/2) 2 pi exp(-rate Z) / rate
        log_tail_scale = float(_log_cosh(0.5 * np.asarray(d))) + math.log(
            2.0 * math.pi / rate
        )
        z_hi = max((log_tail_scale + math.log(1e13)) / rate, 2.0)
        self.z_hi = z_hi
        self.knots = np.concatenate([[0.0], np.geomspace(1e-4, z_hi, n_knots)])
        cum = np.zeros(self.knots.size)
        dens = lambda z: pg_density(z, d)
        for i in range(1, self.knots.size):
            val, _ = integrate.quad(
                dens, self.knots[i - 1], self.knots[i], epsabs=1e-13, epsrel=1e-10
            )
            cum[i] = cum[i - 1] + val
        self.values = np.clip(cum, 0.0, 1.0)
        with np.errstate(divide="ignore", over="ignore"):
            self._pchip = interpolate.PchipInterpolator(self.knots, self.values)

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        return np.clip(self._pchip(np.clip(z, 0.0, self.z_hi)), 0.0, 1.0)


def pg_cdf_quadrature(d, n_knots=1024):
    """CDF oracle for PG(1, d); see QuadratureCdf."""
    return QuadratureCdf(d, n_knots=n_knots)


def _trunc_ig_cdf_mass(d):
    """P(IG(mu=1/(2d), lambda=1/4) <= T_SPLIT), vectorized over d."""
    sqrt_t = math.sqrt(T_SPLIT)
    a = (2.0 * d * T_SPLIT - 1.0) / (2.0 * sqrt_t)
    b = (2.0 * d * T_SPLIT + 1.0) / (2.0 * sqrt_t)
    return special.ndtr(a) + np.exp(d + special.log_ndtr(-b))


def _sample_trunc_ig(d, rng, max_rounds=_MAX_REJECTION_ROUNDS):
    """Draw from IG(1/(2d), 1/4) conditioned on (0, T_SPLIT], elementwise.

    For mu > T_SPLIT the proposal is the truncated stable kernel
    z^{-3/2} exp(-1/(8z)) thinned by exp(-d^2 z / 2); otherwise the
    usual transform method with retry until the draw lands below the
    truncation point.
    """
    out = np.full(d.shape, np.nan)
    big_mu = d < 1.0 / (2.0 * T_SPLIT)

    idx = np.flatnonzero(big_mu)
    alpha_sq = _LAMBDA / T_SPLIT
    rounds = 0
    while idx.size:
        rounds += 1
        if rounds > max_rounds:
            raise SamplerConvergenceError("truncated stable proposal failed to accept")
        e1 = rng.standard_exponential(idx.size)
        e2 = rng.standard_exponential(idx.size)
        ok = e1 * e1 <= 2.0 * alpha_sq * e2
        z = T_SPLIT / (1.0 + 4.0 * T_SPLIT * e1) ** 2
        ok &= rng.random(idx.size) <= np.exp(-0.5 * d[idx] ** 2 * z)
        out[idx[ok]] = z[ok]
        idx = idx[~ok]

    idx = np.flatnonzero(~big_mu)
    mu = np.where(big_mu, 1.0, 1.0 / (2.0 * np.maximum(d, 1e-300)))
    rounds = 0
    while idx.size:
        rounds += 1
        if rounds > max_rounds:
            raise SamplerConvergenceError("inverse-Gaussian proposal failed to accept")
        m = mu[idx]
        y = rng.standard_normal(idx.size) ** 2
        x = m * (1.0 + 2.0 * m * y - 2.0 * np.sqrt(m * y + (m * y) ** 2))
        flip = rng.random(idx.size) > m / (m + x)
        x = np.where(flip, m * m / x, x)
        ok = x <= T_SPLIT
        out[idx[ok]] = x[ok]
        idx = idx[~ok]
    return out


def _series_accept(z, rng, max_terms=_MAX_SERIES_TERMS):
    """Alternating-series acceptance test against the leading-term envelope.

    The tilt factor multiplies every series term equally, so the test
    reduces to comparing a uniform against partial sums of the term
    ratios r_k = (2k+1) exp(-decay(z) k(k+1)).
    """
    small = z <= T_SPLIT
    decay = np.where(small, 0.5 / z, 2.0 * math.pi**2 * z)
    u = rng.random(z.size)
    s = np.ones_like(z)
    accept = np.zeros(z.size, dtype=bool)
    undecided = np.ones(z.size, dtype=bool)
    sign = -1.0
    for k in range(1, max_terms + 1):
        ratio = (2 * k + 1) * np.exp(-decay * (k * k + k))
        s = s + sign * ratio
        if sign < 0.0:
            hit = undecided & (u <= s)
            accept[hit] = True
            undecided &= ~hit
        else:
            undecided &= ~(undecided & (u > s))
        collapsed = undecided & (ratio < 1e-16)
        if collapsed.any():
            accept[collapsed & (u <= s)] = True
            undecided &= ~collapsed
        if not undecided.any():
            return accept
        sign = -sign
    raise SeriesTruncationError("acceptance series did not terminate")


_SQRT2 = math.sqrt(2.0)
_LOG_2PI = math.log(2.0 * math.pi)


def _scalar_trunc_ig(d, rng, max_rounds):
    t = T_SPLIT
    if d < 1.0 / (2.0 * t):
        for _ in range(max_rounds):
            e1 = rng.standard_exponential()
            if e1 * e1 > rng.standard_exponential() / (2.0 * t):
                continue
            z = t / (1.0 + 4.0 * t * e1) ** 2
            if rng.random() <= math.exp(-0.5 * d * d * z):
                return z
    else:
        mu = 1.0 / (2.0 * d)
        for _ in range(max_rounds):
            my = mu * rng.standard_normal() ** 2
            x = mu * (1.0 + 2.0 * my - 2.0 * math.sqrt(my + my * my))
            if rng.random() > mu / (mu + x):
                x = mu * mu / x
            if x <= t:
                return x
    raise SamplerConvergenceError("truncated proposal failed to accept")


def _scalar_pg_draw(d, rng, max_rounds):
    """Single PG(1, d) draw; same algorithm as the vector path without
    the array overhead."""
    t = T_SPLIT
    rate = 0.5 * (math.pi**2 + d * d)
    log_cosh = 0.5 * d + math.log1p(math.exp(-d)) - math.log(2.0)
    log_p_exp = log_cosh + math.log(2.0 * math.pi / rate) - rate * t
    p_exp = math.exp(log_p_exp) if log_p_exp > -700.0 else 0.0
    sqrt_t = math.sqrt(t)
    a = (2.0 * d * t - 1.0) / (2.0 * sqrt_t)
    b = (2.0 * d * t + 1.0) / (2.0 * sqrt_t)
    ndtr_a = 0.5 * math.erfc(-a / _SQRT2)
    if d < 30.0:
        upper = math.exp(d) * 0.5 * math.erfc(b / _SQRT2)
    else:
        upper = math.exp(d - 0.5 * b * b - math.log(b) - 0.5 * _LOG_2PI)
    p_ig = (1.0 + math.exp(-d)) * (ndtr_a + upper)
    exp_prob = p_exp / (p_exp + p_ig)

    for _ in range(max_rounds):
        if rng.random() < exp_prob:
            z = t + rng.standard_exponential() / rate
        else:
            z = _scalar_trunc_ig(d, rng, max_rounds)
        decay = 0.5 / z if z <= t else 2.0 * math.pi**2 * z
        u = rng.random()
        s = 1.0
        sign = -1.0
        k = 1
        accept = False
        decided = False
        while k <= _MAX_SERIES_TERMS:
            r = (2 * k + 1) * math.exp(-decay * (k * k + k))
            s += sign * r
            if sign < 0.0 and u <= s:
                accept, decided = True, True
                break
            if sign > 0.0 and u > s:
                decided = True
                break
            if r < 1e-16:
                accept, decided = u <= s, True
                break
            sign = -sign
            k += 1
        if not decided:
            raise SeriesTruncationError("acceptance series did not terminate")
        if accept:
            return z
    raise SamplerConvergenceError("rejection sampler exceeded %d rounds" % max_rounds)


def sample_pg_vector(d, rng, max_rounds=_MAX_REJECTION_ROUNDS):
    """Exact PG(1, d_i) draws for an array of tilts.

    Parameters
    ----------
    d : array_like of non-negative tilts, any shape
    rng : numpy.random.Generator
    max_rounds : iteration cap for the outer rejection loop

    Returns an array of draws with the same shape as ``d``.
    """
    d = np.asarray(d, dtype=float)
    _validate_tilt(d)
    shape = d.shape
    d = np.ravel(d)
    if d.size <= 8:
        out = np.array([_scalar_pg_draw(float(x), rng, max_rounds) for x in d])
        return out.reshape(shape)

    rate = 0.5 * (math.pi**2 + d * d)
    log_p_exp = _log_cosh(0.5 * d) + np.log(2.0 * math.pi / rate) - rate * T_SPLIT
    with np.errstate(under="ignore"):
        p_exp = np.exp(log_p_exp)
    p_ig = (1.0 + np.exp(-d)) * _trunc_ig_cdf_mass(d)
    exp_prob = p_exp / (p_exp + p_ig)

    out = np.empty(d.size)
    idx = np.arange(d.size)
    rounds = 0
    while idx.size:
        rounds += 1
        if rounds > max_rounds:
            raise SamplerConvergenceError(
                "rejection sampler exceeded %d rounds" % max_rounds
            )
        da = d[idx]
        take_exp = rng.random(idx.size) < exp_prob[idx]
        z = np.empty(idx.size)
        n_exp = int(take_exp.sum())
        if n_exp:
            z[take_exp] = T_SPLIT + rng.standard_exponential(n_exp) / rate[idx][take_exp]
        if n_exp < idx.size:
            z[~take_exp] = _sample_trunc_ig(da[~take_exp], rng, max_rounds)
        acc = _series_accept(z, rng)
        out[idx[acc]] = z[acc]
        idx = idx[~acc]
    return out.reshape(shape)


def sample_pg(d, rng, size=None):
    """Exact PG(1, d) draws for a scalar tilt d."""
    d = float(d)
    if size is None:
        return float(sample_pg_vector(np.array([d]), rng)[0])
    return sample_pg_vector(np.full(int(size), d), rng)

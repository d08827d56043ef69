"""Bayesian logistic regression via Polya-Gamma data augmentation.

The model is y_i ~ Bernoulli(expit(x_i' beta)) with a N(b, B) prior on
beta.  Augmenting each observation with w_i ~ PG(1, |x_i' beta|) makes
the conditional of beta given w exactly Gaussian:

    Sigma(w) = (X' diag(w) X + B^{-1})^{-1}
    mu(w)    = Sigma(w) (X'(y - 1/2) + B^{-1} b)

Everything here works with the precision matrix and its Cholesky
factor; covariances are only materialized on demand, through triangular
solves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, special

from .polya_gamma import pg_log_density, sample_pg_vector


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Design matrix and binary responses, immutable after construction."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = _frozen(self.X)
        y = _frozen(self.y)
        if X.ndim != 2:
            raise ValueError("X must be a 2-d array")
        if y.shape != (X.shape[0],):
            raise ValueError("y must have one entry per row of X")
        if not np.all(np.isfinite(X)):
            raise ValueError("X contains non-finite entries")
        if not np.all((y == 0.0) | (y == 1.0)):
            raise ValueError("y must be 0/1 valued")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]


@dataclass(frozen=True)
class Prior:
    """Gaussian prior N(b, B) on the coefficients; B must be SPD."""

    b: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        b = _frozen(self.b)
        B = _frozen(self.B)
        if b.ndim != 1 or B.shape != (b.size, b.size):
            raise ValueError("prior mean and covariance shapes disagree")
        if not np.allclose(B, B.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(B).max())):
            raise ValueError("prior covariance must be symmetric")
        try:
            np.linalg.cholesky(B)
        except np.linalg.LinAlgError:
            raise ValueError("prior covariance must be positive definite") from None
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "B", B)

    @classmethod
    def isotropic(cls, p, mean=0.0, variance=10.0):
        """N(mean * 1, variance * I) prior in p dimensions."""
        return cls(np.full(p, float(mean)), float(variance) * np.eye(p))


@dataclass
class CondNormal:
    """Gaussian conditional for beta, parameterized by its precision factor.

    ``chol_precision`` is the lower Cholesky factor L of the precision
    matrix; the covariance property solves against L on first access.
    """

    mean: np.ndarray
    chol_precision: np.ndarray
    log_det_precision: float
    _covariance: np.ndarray | None = field(default=None, repr=False)

    @property
    def covariance(self):
        if self._covariance is None:
            p = self.mean.size
            self._covariance = linalg.cho_solve(
                (self.chol_precision, True), np.eye(p), check_finite=False
            )
        return self._covariance


def _validate_aux(w, n):
    w = np.asarray(w, dtype=float)
    if w.shape != (n,):
        raise ValueError("auxiliary vector must have one entry per observation")
    if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
        raise ValueError("auxiliary vector entries must be finite and positive")
    return w


class LogitModel:
    """Caches the w-independent pieces of the conditional updates.

    The right-hand side X'(y - 1/2) + B^{-1} b and the prior precision
    never change along a chain, so they are computed once.
    """

    def __init__(self, data: Dataset, prior: Prior):
        if prior.b.size != data.p:
            raise ValueError("prior dimension does not match the design matrix")
        self.data = data
        self.prior = prior
        self.Xt = np.ascontiguousarray(data.X.T)
        chol_B = np.linalg.cholesky(prior.B)
        eye = np.eye(data.p)
        self.B_inv = linalg.cho_solve((chol_B, True), eye, check_finite=False)
        self.rhs = self.Xt @ (data.y - 0.5) + self.B_inv @ prior.b
        # row-wise outer products, flattened for batched precision builds
        self._xxt_flat = None
        if data.p == 1:
            self._x_sq = np.ascontiguousarray(data.X[:, 0] ** 2)

    def tilts(self, beta):
        return np.abs(self.data.X @ beta)

    def cond_normal(self, w) -> CondNormal:
        if self.data.p == 1:
            prec = float(self._x_sq @ w) + self.B_inv[0, 0]
            return CondNormal(
                mean=np.array([float(self.rhs[0]) / prec]),
                chol_precision=np.array([[np.sqrt(prec)]]),
                log_det_precision=float(np.log(prec)),
            )
        prec = (self.Xt * w) @ self.data.X + self.B_inv
        try:
            chol = np.linalg.cholesky(prec)
        except np.linalg.LinAlgError:
            raise RuntimeError(
                "conditional precision is not positive definite "
                "(w in [%g, %g]); this signals a bug, not bad data"
                % (float(np.min(w)), float(np.max(w)))
            ) from None
        half = linalg.solve_triangular(chol, self.rhs, lower=True, check_finite=False)
        mean = linalg.solve_triangular(
            chol.T, half, lower=False, check_finite=False
        )
        log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
        return CondNormal(mean=mean, chol_precision=chol, log_det_precision=log_det)

    def sample_w(self, beta, rng):
        return sample_pg_vector(self.tilts(beta), rng)

    def _xxt(self):
        if self._xxt_flat is None:
            X = self.data.X
            self._xxt_flat = np.ascontiguousarray(
                (X[:, :, None] * X[:, None, :]).reshape(self.data.n, -1)
            )
        return self._xxt_flat

    def cond_normal_batch(self, W):
        """Conditional means, precision factors and log-dets for rows of W.

        W has shape (batch, n).  Returns (means, chols, log_dets) with
        shapes (batch, p), (batch, p, p), (batch,).
        """
        batch = W.shape[0]
        p = self.data.p
        prec = (W @ self._xxt()).reshape(batch, p, p) + self.B_inv
        chols = np.linalg.cholesky(prec)
        log_dets = 2.0 * np.sum(np.log(np.diagonal(chols, axis1=1, axis2=2)), axis=1)
        means = np.empty((batch, p))
        for i in range(batch):
            means[i] = linalg.cho_solve((chols[i], True), self.rhs, check_finite=False)
        return means, chols, log_dets


def cond_normal(data: Dataset, prior: Prior, w) -> CondNormal:
    """Gaussian conditional of beta given the auxiliary vector w."""
    w = _validate_aux(w, data.n)
    return LogitModel(data, prior).cond_normal(w)


def sample_beta(cn: CondNormal, rng):
    """Exact draw from a CondNormal via its cached precision factor."""
    if cn.mean.size == 1:
        return np.array(
            [cn.mean[0] + rng.standard_normal() / cn.chol_precision[0, 0]]
        )
    z = rng.standard_normal(cn.mean.size)
    return cn.mean + linalg.solve_triangular(
        cn.chol_precision.T, z, lower=False, check_finite=False
    )


def log_cond_beta_density(cn: CondNormal, beta):
    """Log density of the Gaussian conditional at beta."""
    beta = np.asarray(beta, dtype=float)
    p = cn.mean.size
    resid = cn.chol_precision.T @ (beta - cn.mean)
    return float(
        -0.5 * p * np.log(2.0 * np.pi)
        + 0.5 * cn.log_det_precision
        - 0.5 * resid @ resid
    )


def sample_w(data: Dataset, beta, rng):
    """Draw the auxiliary vector: w_i ~ PG(1, |x_i' beta|)."""
    return sample_pg_vector(np.abs(data.X @ np.asarray(beta, float)), rng)


def log_cond_w_density(data: Dataset, beta, w):
    """Log density of w given beta: a product of PG(1, tilt) terms."""
    w = _validate_aux(w, data.n)
    tilts = np.abs(data.X @ np.asarray(beta, float))
    return float(np.sum(pg_log_density(w, tilts)))


def logistic_mle(data: Dataset, tol=1e-10, max_iter=100):
    """Maximum-likelihood coefficients by Newton iteration.

    Uses step halving on the log likelihood; raises if the gradient
    does not vanish within ``max_iter`` iterations (for example under
    complete separation).
    """
    X, y = data.X, data.y
    beta = np.zeros(data.p)

    def loglik(b):
        eta = X @ b
        return float(y @ eta - np.logaddexp(0.0, eta).sum())

    ll = loglik(beta)
    for _ in range(max_iter):
        eta = X @ beta
        mu = special.expit(eta)
        grad = X.T @ (y - mu)
        if np.max(np.abs(grad)) < tol * max(1.0, data.n / 100.0):
            return beta
        H = (X.T * (mu * (1.0 - mu))) @ X
        try:
            chol = np.linalg.cholesky(H)
        except np.linalg.LinAlgError:
            raise RuntimeError("Newton step failed: singular Hessian") from None
        step = linalg.cho_solve((chol, True), grad, check_finite=False)
        scale = 1.0
        for _ in range(50):
            cand = beta + scale * step
            ll_cand = loglik(cand)
            if ll_cand > ll - 1e-12:
                break
            scale *= 0.5
        beta = beta + scale * step
        ll = ll_cand
    raise RuntimeError("Newton iteration did not converge; data may be separable")

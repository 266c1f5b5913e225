"""Normal / inverse-gamma priors and the conjugate theta update."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, NumericalPDError


@dataclass(frozen=True)
class NIGPrior:
    """``beta ~ N(mu0, Sigma0)``, ``sigma2 ~ IG(a0, b0)``.

    With ``conjugate=True`` the coefficient prior is conditional on the
    variance, ``beta | sigma2 ~ N(mu0, sigma2 * Sigma0)``, and the posterior
    can be drawn exactly in one step.  Otherwise the two blocks are
    independent a priori and the update is a two-block Gibbs sweep.
    """

    mu0: np.ndarray
    Sigma0: np.ndarray
    a0: float
    b0: float
    conjugate: bool = False

    def __post_init__(self):
        mu0 = np.atleast_1d(np.asarray(self.mu0, dtype=float))
        S = np.atleast_2d(np.asarray(self.Sigma0, dtype=float))
        if S.shape != (mu0.size, mu0.size):
            raise ConfigError(f"Sigma0 shape {S.shape} does not match mu0 of length {mu0.size}")
        if not np.allclose(S, S.T, rtol=1e-12, atol=0.0):
            raise ConfigError("Sigma0 must be symmetric")
        if np.linalg.eigvalsh(S).min() <= 0:
            raise ConfigError("Sigma0 must be positive definite")
        if not (self.a0 > 0 and self.b0 > 0):
            raise ConfigError("a0 and b0 must be positive")
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "Sigma0", S)

    @property
    def p(self) -> int:
        return self.mu0.size

    @property
    def precision(self) -> np.ndarray:
        return np.linalg.inv(self.Sigma0)

    @classmethod
    def scalar(cls, mean, sd, a0, b0, conjugate=False) -> "NIGPrior":
        return cls(np.array([mean]), np.array([[sd * sd]]), a0, b0, conjugate)

    def with_b0(self, b0) -> "NIGPrior":
        return NIGPrior(self.mu0, self.Sigma0, self.a0, b0, self.conjugate)


@dataclass(frozen=True)
class ThetaState:
    beta: np.ndarray
    sigma2: float

    def __post_init__(self):
        object.__setattr__(self, "beta", np.atleast_1d(np.asarray(self.beta, dtype=float)))
        if not self.sigma2 > 0:
            raise ConfigError("sigma2 must be positive")


@dataclass(frozen=True)
class ConjugatePosterior:
    """Closed-form posterior under a conjugate prior."""

    mean: np.ndarray
    precision: np.ndarray
    a: float
    b: float

    def beta_mean(self):
        return self.mean

    def beta_cov(self):
        return self.b / (self.a - 1.0) * np.linalg.inv(self.precision)

    def sigma2_mean(self):
        return self.b / (self.a - 1.0)

    def sigma2_var(self):
        return self.b**2 / ((self.a - 1.0) ** 2 * (self.a - 2.0))


def conjugate_posterior(y, X, prior: NIGPrior) -> ConjugatePosterior:
    if not prior.conjugate:
        raise ConfigError("closed-form posterior needs a conjugate prior")
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float).reshape(y.shape[0], prior.p)
    P0 = prior.precision
    Pn = P0 + X.T @ X
    mn = np.linalg.solve(Pn, P0 @ prior.mu0 + X.T @ y)
    an = prior.a0 + 0.5 * y.shape[0]
    bn = prior.b0 + 0.5 * (y @ y + prior.mu0 @ P0 @ prior.mu0 - mn @ Pn @ mn)
    return ConjugatePosterior(mn, Pn, an, bn)


def _mvn_from_precision(mean, precision, rng, scale=1.0):
    """Draw from ``N(mean, scale * precision^{-1})``."""
    try:
        L = np.linalg.cholesky(precision)
    except np.linalg.LinAlgError:
        raise NumericalPDError("posterior precision is not positive definite") from None
    z = rng.standard_normal(mean.shape[0])
    return mean + np.sqrt(scale) * np.linalg.solve(L.T, z)


def draw_inverse_gamma(a, b, rng):
    return b / rng.gamma(a)


def gibbs_theta_normal(y, X, prior: NIGPrior, rng: np.random.Generator, current: ThetaState | None = None,
                       weights=None) -> ThetaState:
    """Draw ``(beta, sigma2)`` given a complete dataset under the normal model.

    Parameters
    ----------
    y, X : complete data (observed or augmented)
    prior : NIGPrior
    rng : numpy Generator
    current : ThetaState, optional
        Required for the independent prior, where ``beta | sigma2`` and
        ``sigma2 | beta`` are drawn in turn starting from ``current.sigma2``.
    weights : array_like, optional
        Per-observation precision multipliers (``y_i ~ N(x_i^T beta, sigma2 / w_i)``);
        used by the Student-t scale-mixture sampler.
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    X = np.asarray(X, dtype=float).reshape(n, prior.p)
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    Xw = X * w[:, None]
    XtWX = Xw.T @ X
    XtWy = Xw.T @ y
    P0 = prior.precision

    if prior.conjugate:
        Pn = P0 + XtWX
        try:
            mn = np.linalg.solve(Pn, P0 @ prior.mu0 + XtWy)
        except np.linalg.LinAlgError:
            raise NumericalPDError("posterior precision is singular") from None
        an = prior.a0 + 0.5 * n
        bn = prior.b0 + 0.5 * ((w * y) @ y + prior.mu0 @ P0 @ prior.mu0 - mn @ Pn @ mn)
        sigma2 = draw_inverse_gamma(an, bn, rng)
        beta = _mvn_from_precision(mn, Pn, rng, scale=sigma2)
        return ThetaState(beta, sigma2)

    if current is None:
        raise ConfigError("the independent prior needs the current sigma2 for its Gibbs sweep")
    sigma2 = current.sigma2
    Pn = P0 + XtWX / sigma2
    try:
        mn = np.linalg.solve(Pn, P0 @ prior.mu0 + XtWy / sigma2)
    except np.linalg.LinAlgError:
        raise NumericalPDError("posterior precision is singular") from None
    beta = _mvn_from_precision(mn, Pn, rng)
    resid = y - X @ beta
    sigma2 = draw_inverse_gamma(prior.a0 + 0.5 * n, prior.b0 + 0.5 * (w * resid) @ resid, rng)
    return ThetaState(beta, sigma2)

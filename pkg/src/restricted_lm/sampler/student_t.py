"""Student-t regression baseline via its normal scale-mixture representation."""

from __future__ import annotations

import numpy as np

from ..dataset import Dataset
from ..errors import ConfigError
from .chain import STUDENT_T, ChainConfig, ChainOutput
from .priors import NIGPrior, ThetaState, gibbs_theta_normal


def t_prior_adjustment(prior: NIGPrior, nu: float) -> NIGPrior:
    """Rescale ``b0`` by ``(nu - 2) / nu``.

    The t model's variance is ``sigma2 * nu / (nu - 2)``, so this keeps the
    prior on the error variance the same as under the normal model.
    """
    return prior.with_b0(prior.b0 * (nu - 2.0) / nu)


def t_loglik(y, X, beta, sigma2, nu) -> float:
    from scipy.stats import t as student_t

    return float(student_t.logpdf(y, nu, loc=X @ beta, scale=np.sqrt(sigma2)).sum())


def run_student_t_baseline(y, X, prior: NIGPrior, nu: float, config: ChainConfig,
                           match_variance: bool = True) -> ChainOutput:
    """Gibbs sampler for ``y_i ~ t_nu(x_i^T beta, sigma2)``.

    Latent precisions ``lambda_i ~ Gamma(nu/2, rate nu/2)`` make the model
    conditionally normal with variance ``sigma2 / lambda_i``; a sweep draws
    ``lambda | theta`` and then ``theta | lambda`` from the weighted normal
    conditionals.  With ``match_variance`` the prior is passed through
    :func:`t_prior_adjustment` first.
    """
    if not nu > 2:
        raise ConfigError("nu must exceed 2 for the t model to have a variance")
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if match_variance:
        prior = t_prior_adjustment(prior, nu)
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    n = y.shape[0]

    beta = np.linalg.lstsq(X, y, rcond=None)[0]
    resid = y - X @ beta
    theta = ThetaState(beta, max(float(resid @ resid) / max(n - X.shape[1], 1), 1e-12))

    S = config.n_kept
    betas, sig2 = np.empty((S, X.shape[1])), np.empty(S)
    ll = np.empty(config.iterations)
    k = 0
    for it in range(config.iterations):
        r = y - X @ theta.beta
        lam = rng.gamma(0.5 * (nu + 1.0), 1.0, size=n) / (0.5 * (nu + r * r / theta.sigma2))
        theta = gibbs_theta_normal(y, X, prior, rng, current=theta, weights=lam)
        ll[it] = t_loglik(y, X, theta.beta, theta.sigma2, nu)
        if config.kept(it):
            betas[k], sig2[k] = theta.beta, theta.sigma2
            k += 1

    return ChainOutput(
        beta=betas, sigma2=sig2, family=STUDENT_T, nu=float(nu),
        augmented_final=Dataset(y.copy(), X), log_lik_trace=ll, config=config.as_dict(),
    )

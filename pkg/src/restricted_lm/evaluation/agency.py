"""Synthetic stand-in for grouped agency performance data and its TLM comparison.

Each synthetic state has a prior-period dataset and a current dataset.  Most
cases follow a through-the-origin line ``y = beta x + noise`` ("type 1"); a
second contract type follows a different slope, and a fraction of cases are
closed agencies with ``y = 0``.  None of this is real data.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..estimators import EstimatorSpec, irls_solve
from ..sampler.chain import ChainConfig, run_chain
from ..sampler.priors import NIGPrior
from ..sampler.student_t import run_student_t_baseline
from .predictive import PredictiveDensity, predictive_density
from .tlm import TLMReport, crossval_split, tlm_score


@dataclass(frozen=True)
class AgencyState:
    x: np.ndarray
    y: np.ndarray
    kind: np.ndarray          # 1 = type 1 open, 2 = type 2 open, 0 = closed
    x_prior: np.ndarray
    y_prior: np.ndarray

    @property
    def n(self) -> int:
        return self.y.shape[0]


def synthetic_agency(rng: np.random.Generator, n: int = 60, n_prior: int = 200, beta: float = 1.0,
                     beta_type2: float = 0.6, sigma: float = 0.25, p_type2: float = 0.2,
                     p_closed: float = 0.1) -> AgencyState:
    """One synthetic state.  Covariates are on a square-root count scale."""

    def draw(m):
        x = np.sqrt(rng.gamma(2.0, 1.0, size=m))
        u = rng.uniform(size=m)
        kind = np.where(u < p_closed, 0, np.where(u < p_closed + p_type2, 2, 1))
        slope = np.where(kind == 2, beta_type2, beta)
        y = slope * x + sigma * rng.standard_normal(m)
        y = np.where(kind == 0, 0.0, y)
        return x, y, kind

    xp, yp, _ = draw(n_prior)
    x, y, kind = draw(n)
    return AgencyState(x, y, kind, xp, yp)


def robust_prior(x_prior, y_prior, spec: EstimatorSpec, a0: float = 5.0) -> NIGPrior:
    """Prior from a robust fit to an earlier period.

    ``mu0 = beta_hat``, ``sigma0^2 = n_p se(beta_hat)^2`` and
    ``b0 = sigma_hat^2 (a0 - 1)`` so the prior mean of ``sigma2`` is ``sigma_hat^2``.
    The standard error is the usual M-estimator sandwich.
    """
    X = np.asarray(x_prior, dtype=float)[:, None]
    st = irls_solve(X, y_prior, spec)
    r = (y_prior - X @ st.b) / st.s
    psi, dpsi = spec.psi.psi(r), spec.psi.dpsi(r)
    n_p = X.shape[0]
    var = st.s**2 * np.mean(psi**2) / np.mean(dpsi) ** 2 / float(X[:, 0] @ X[:, 0])
    return NIGPrior(st.b, np.array([[n_p * var]]), a0, st.s**2 * (a0 - 1.0))


def tlm_compare(y, X, prior: NIGPrior, fraction: float, splits: int, config: ChainConfig, seed: int,
                alpha: float = 0.3, base: str = "student_t", nu: float = 5.0, efficiency: float = 0.95,
                strata=None) -> TLMReport:
    """Repeated train/holdout comparison scored by TLM.

    Methods: normal-model Bayes, Huber- and Tukey-restricted Bayes,
    Student-t Bayes, and plug-in OLS, Huber and Tukey fits.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    huber, tukey = EstimatorSpec.huber(efficiency), EstimatorSpec.tukey(efficiency)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    per_split = []
    for _ in range(splits):
        tr, ho = crossval_split(y.shape[0], fraction, strata=strata, rng=rng)
        cfg = replace(config, seed=int(rng.integers(2**32)))
        Xt, yt, Xh, yh = X[tr], y[tr], X[ho], y[ho]

        scores = {}
        bayes = {
            "normal": run_chain(yt, Xt, prior, None, cfg),
            "huber_restricted": run_chain(yt, Xt, prior, huber, cfg),
            "tukey_restricted": run_chain(yt, Xt, prior, tukey, cfg),
            "student_t": run_student_t_baseline(yt, Xt, prior, nu, cfg),
        }
        for name, out in bayes.items():
            scores[name] = np.array([predictive_density(out, xr).logpdf(v) for xr, v in zip(Xh, yh)])
        for name, spec in (("ols", EstimatorSpec.least_squares()), ("huber", huber), ("tukey", tukey)):
            st = irls_solve(Xt, yt, spec)
            s2 = st.s**2
            if name == "ols":
                # unbiased residual variance for the classical least-squares fit
                s2 = s2 * yt.shape[0] / (yt.shape[0] - Xt.shape[1])
            scores[name] = np.array([PredictiveDensity.plug_in(xr @ st.b, s2).logpdf(v) for xr, v in zip(Xh, yh)])
        per_split.append(scores)
    return tlm_score(per_split, base, alpha)


def agency_tlm(state: AgencyState, fraction: float, splits: int, config: ChainConfig, seed: int,
               alpha: float = 0.3, base: str = "student_t", nu: float = 5.0,
               efficiency: float = 0.95) -> TLMReport:
    """TLM comparison on one synthetic state, prior taken from its earlier period."""
    prior = robust_prior(state.x_prior, state.y_prior, EstimatorSpec.huber(efficiency))
    return tlm_compare(state.y, state.x[:, None], prior, fraction, splits, config, seed, alpha, base, nu,
                       efficiency)

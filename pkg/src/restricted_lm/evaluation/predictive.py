"""Posterior predictive densities and Kullback-Leibler scoring against the good-data law."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize
from scipy.special import logsumexp
from scipy.stats import norm
from scipy.stats import t as student_t

from ..errors import ConfigError, QuadratureFailure, TooFewDraws

MIN_DRAWS = 100
KL_TOL = 1e-5
KL_WIDTH = 10.0


@dataclass(frozen=True)
class PredictiveDensity:
    """Equal-weight mixture ``(1/S) sum_s f(y | loc_s, scale_s)``.

    Components are normal, or Student-t with ``nu`` degrees of freedom.
    A single component gives a plug-in predictive.
    """

    loc: np.ndarray
    scale: np.ndarray
    nu: float | None = None

    def __post_init__(self):
        loc = np.atleast_1d(np.asarray(self.loc, dtype=float))
        scale = np.atleast_1d(np.asarray(self.scale, dtype=float))
        if loc.shape != scale.shape or loc.ndim != 1:
            raise ConfigError("loc and scale must be 1-d arrays of the same length")
        if not np.all(scale > 0):
            raise ConfigError("component scales must be positive")
        object.__setattr__(self, "loc", loc)
        object.__setattr__(self, "scale", scale)

    @classmethod
    def plug_in(cls, loc: float, sigma2: float) -> "PredictiveDensity":
        return cls(np.array([loc]), np.array([np.sqrt(sigma2)]))

    @property
    def n_components(self) -> int:
        return self.loc.shape[0]

    def _component_logpdf(self, y):
        y = np.asarray(y, dtype=float)[..., None]
        if self.nu is None:
            return norm.logpdf(y, self.loc, self.scale)
        return student_t.logpdf(y, self.nu, self.loc, self.scale)

    def logpdf(self, y):
        out = logsumexp(self._component_logpdf(y), axis=-1) - np.log(self.n_components)
        return out if np.ndim(out) else float(out)

    def pdf(self, y):
        return np.exp(self.logpdf(y))

    def cdf(self, y):
        y = np.asarray(y, dtype=float)[..., None]
        if self.nu is None:
            c = norm.cdf(y, self.loc, self.scale)
        else:
            c = student_t.cdf(y, self.nu, self.loc, self.scale)
        out = c.mean(axis=-1)
        return out if np.ndim(out) else float(out)

    def _bounds(self, width=KL_WIDTH):
        spread = width * self.scale.max() * (1.0 if self.nu is None else 10.0)
        return float(self.loc.min() - spread), float(self.loc.max() + spread)

    def ppf(self, q: float) -> float:
        lo, hi = self._bounds(40.0)
        return float(optimize.brentq(lambda v: self.cdf(v) - q, lo, hi, xtol=1e-10))

    def interval(self, level: float = 0.95):
        """Central interval holding ``level`` predictive probability."""
        a = 0.5 * (1.0 - level)
        return self.ppf(a), self.ppf(1.0 - a)

    def mean(self) -> float:
        return float(self.loc.mean())

    def total_mass(self, lo=None, hi=None) -> float:
        """Quadrature integral of the density, for normalization checks."""
        if lo is None:
            lo, hi = self._bounds()
        pts = np.unique(np.clip(self.loc, lo, hi))
        pts = pts[:: max(1, pts.size // 50)]
        val, _ = integrate.quad(self.pdf, lo, hi, points=pts, limit=500, epsabs=1e-9)
        return float(val)


def predictive_density(out, x_new=None) -> PredictiveDensity:
    """Monte Carlo predictive at covariate ``x_new`` from posterior draws.

    ``out`` is a :class:`~restricted_lm.sampler.ChainOutput`; a t-family
    output produces t components.  ``x_new`` defaults to the intercept-only
    row for location models.
    """
    S = out.sigma2.shape[0]
    if S < MIN_DRAWS:
        raise TooFewDraws(f"predictive needs at least {MIN_DRAWS} draws, got {S}")
    p = out.beta.shape[1]
    x = np.ones(p) if x_new is None else np.atleast_1d(np.asarray(x_new, dtype=float))
    if x.shape[0] != p:
        raise ConfigError(f"x_new has length {x.shape[0]}, expected {p}")
    nu = out.nu if getattr(out, "family", "normal") == "t" else None
    return PredictiveDensity(out.beta @ x, np.sqrt(out.sigma2), nu)


def group_predictive(out, group: int) -> PredictiveDensity:
    """Predictive for one group of a hierarchical fit."""
    S = out.sigma2.shape[0]
    if S < MIN_DRAWS:
        raise TooFewDraws(f"predictive needs at least {MIN_DRAWS} draws, got {S}")
    return PredictiveDensity(out.theta[:, group], np.sqrt(out.sigma2[:, group]))


def kl_good_data(pred: PredictiveDensity, theta: float, sigma2: float, tol: float = KL_TOL) -> float:
    """``KL(N(theta, sigma2) || pred)`` by adaptive quadrature on ``theta ± 10 sigma``.

    Raises
    ------
    QuadratureFailure
        The integrator reports an error estimate above ``tol`` or a
        non-finite value.
    """
    if not sigma2 > 0:
        raise ConfigError("truth variance must be positive")
    sd = np.sqrt(sigma2)

    def integrand(v):
        lf = norm.logpdf(v, theta, sd)
        return np.exp(lf) * (lf - pred.logpdf(v))

    lo, hi = theta - KL_WIDTH * sd, theta + KL_WIDTH * sd
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(integrand, lo, hi, points=[theta], epsabs=tol, epsrel=0.0, limit=200)
        except integrate.IntegrationWarning as exc:
            raise QuadratureFailure(f"KL quadrature did not converge: {exc}") from None
    if not np.isfinite(val) or err > tol:
        raise QuadratureFailure(f"KL quadrature error estimate {err:.3g} exceeds {tol:g}")
    return float(val)

"""Contaminated-mixture simulation study scored by KL divergence to the good-data law.

Data for group ``i`` are drawn from ``(1 - p_i) N(theta_i, sigma2) + p_i N(theta_i, m_i sigma2)``
with ``theta_i ~ N(mu, tau2)``.  Every fitter produces a predictive density
per group and is scored by ``KL(N(theta_i, sigma2) || predictive)``.
"""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import ConfigError, RestrictedLikelihoodError
from ..estimators import EstimatorSpec, irls_solve
from ..sampler.chain import ChainConfig
from ..sampler.hierarchical import run_hierarchical
from .predictive import PredictiveDensity, group_predictive, kl_good_data

log = logging.getLogger(__name__)

NORMAL = "normal"
HUBER_RESTRICTED, TUKEY_RESTRICTED = "huber_restricted", "tukey_restricted"
HUBER_CLASSICAL, TUKEY_CLASSICAL = "huber_classical", "tukey_classical"
FITTERS = (NORMAL, HUBER_RESTRICTED, TUKEY_RESTRICTED, HUBER_CLASSICAL, TUKEY_CLASSICAL)
# plug-in of the generating good-data law; a calibration check, not a method
TRUTH = "truth"
FACTORS = ("n", "p", "m")


@dataclass(frozen=True)
class SimulationDesign:
    mu: float = 0.0
    tau2: float = 1.0
    sigma2: float = 4.0
    p_levels: tuple = (0.1, 0.2, 0.3)
    m_levels: tuple = (9.0, 25.0)
    n_levels: tuple = (25, 50, 100)
    replicates: int = 5

    def __post_init__(self):
        if not (self.tau2 > 0 and self.sigma2 > 0):
            raise ConfigError("tau2 and sigma2 must be positive")
        if any(not 0.0 <= p < 1.0 for p in self.p_levels):
            raise ConfigError("contamination probabilities must lie in [0, 1)")
        if any(not m > 1.0 for m in self.m_levels):
            raise ConfigError("variance inflation m must exceed 1")
        if any(int(n) < 3 for n in self.n_levels):
            raise ConfigError("group sizes must be at least 3")
        if self.replicates < 1:
            raise ConfigError("replicates must be positive")

    def cells(self):
        """Factor levels of every group, in a fixed order."""
        return [(p, m, int(n)) for p, m, n in itertools.product(self.p_levels, self.m_levels, self.n_levels)
                for _ in range(self.replicates)]

    @property
    def n_groups(self) -> int:
        return len(self.p_levels) * len(self.m_levels) * len(self.n_levels) * self.replicates


@dataclass(frozen=True)
class SimGroup:
    theta: float
    p: float
    m: float
    n: int
    y: np.ndarray


def simulate_contaminated(design: SimulationDesign, rng: np.random.Generator, K: int = 1):
    """Draw ``K`` datasets, each a list of groups covering the full factorial."""
    out = []
    sd = np.sqrt(design.sigma2)
    for _ in range(K):
        groups = []
        for p, m, n in design.cells():
            theta = design.mu + np.sqrt(design.tau2) * rng.standard_normal()
            bad = rng.uniform(size=n) < p
            scale = np.where(bad, sd * np.sqrt(m), sd)
            groups.append(SimGroup(float(theta), p, m, n, theta + scale * rng.standard_normal(n)))
        out.append(groups)
    return out


def prior_from(a_s: float, c: float) -> tuple:
    """``(a_s, b_s)`` with ``b_s = 4 a_s c``."""
    return a_s, 4.0 * a_s * c


@dataclass
class KLReport:
    """Per-group KL values with design factors.

    ``records`` rows are ``(fitter, a_s, c, k, group, p, m, n, kl)``.
    """

    records: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    K: int = 0
    config: dict = field(default_factory=dict)

    def _values(self, fitter, prior, by=None):
        rows = [r for r in self.records if r[0] == fitter and (r[1], r[2]) == tuple(prior)]
        if by is not None:
            key, level = by
            j = {"p": 5, "m": 6, "n": 7}[key]
            rows = [r for r in rows if r[j] == level]
        return rows

    def replicate_means(self, fitter, prior, by=None) -> np.ndarray:
        rows = self._values(fitter, prior, by)
        ks = sorted({r[3] for r in rows})
        return np.array([np.mean([r[8] for r in rows if r[3] == k]) for k in ks])

    def mean(self, fitter, prior, by=None) -> float:
        return float(self.replicate_means(fitter, prior, by).mean())

    def se(self, fitter, prior, by=None) -> float:
        """``sqrt(sum_k (KLbar_k - KLbar)^2 / (K (K - 1)))`` over replicate datasets."""
        v = self.replicate_means(fitter, prior, by)
        K = v.shape[0]
        if K < 2:
            return float("nan")
        return float(np.sqrt(np.sum((v - v.mean()) ** 2) / (K * (K - 1))))

    @property
    def fitters(self):
        return list(dict.fromkeys(r[0] for r in self.records))

    @property
    def priors(self):
        return list(dict.fromkeys((r[1], r[2]) for r in self.records))

    def main_effects(self, fitter, prior):
        """``{factor: [(level, mean, se), ...]}`` for n, p and m."""
        rows = self._values(fitter, prior)
        out = {}
        for f in FACTORS:
            j = {"p": 5, "m": 6, "n": 7}[f]
            levels = sorted({r[j] for r in rows})
            out[f] = [(lv, self.mean(fitter, prior, (f, lv)), self.se(fitter, prior, (f, lv))) for lv in levels]
        return out

    def table(self):
        """Rows ``(method, group, metric, value, se)`` for serialization."""
        rows = []
        for fitter in self.fitters:
            for prior in self.priors:
                tag = f"{fitter}[a_s={prior[0]:g},c={prior[1]:g}]"
                rows.append((tag, "all", "mean_kl", self.mean(fitter, prior), self.se(fitter, prior)))
                for f, levels in self.main_effects(fitter, prior).items():
                    for lv, m, s in levels:
                        rows.append((tag, f"{f}={lv:g}", "mean_kl", m, s))
        return rows


def _spec_for(fitter: str, efficiency: float) -> EstimatorSpec | None:
    if fitter == NORMAL:
        return None
    if fitter in (HUBER_RESTRICTED, HUBER_CLASSICAL):
        return EstimatorSpec.huber(efficiency)
    if fitter in (TUKEY_RESTRICTED, TUKEY_CLASSICAL):
        return EstimatorSpec.tukey(efficiency)
    raise ConfigError(f"unknown fitter {fitter!r}")


def _fit_cell(args):
    """Score one (dataset, prior, fitter) cell; returns per-group KL values."""
    groups, sigma2, fitter, a_s, b_s, config, efficiency = args
    if fitter == TRUTH:
        return [kl_good_data(PredictiveDensity.plug_in(g.theta, sigma2), g.theta, sigma2) for g in groups]
    spec = _spec_for(fitter, efficiency)
    if fitter in (HUBER_CLASSICAL, TUKEY_CLASSICAL):
        preds = []
        for g in groups:
            st = irls_solve(np.ones((g.n, 1)), g.y, spec)
            preds.append(PredictiveDensity.plug_in(st.b[0], st.s**2))
    else:
        out = run_hierarchical([g.y for g in groups], a_s, b_s, spec, config)
        preds = [group_predictive(out, i) for i in range(len(groups))]
    return [kl_good_data(pr, g.theta, sigma2) for pr, g in zip(preds, groups)]


def _cell_seed(seed: int, *key) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=key).generate_state(1)[0])


def run_simulation_study(design: SimulationDesign, priors, fitters=FITTERS, K: int = 5,
                         config: ChainConfig | None = None, seed: int = 0, workers: int = 1,
                         efficiency: float = 0.95) -> KLReport:
    """Generate ``K`` datasets and score every (fitter, prior) cell.

    Parameters
    ----------
    design : SimulationDesign
    priors : sequence of (a_s, c)
        Group-variance priors, ``b_s = 4 a_s c``.
    fitters : sequence of str
        Any of :data:`FITTERS`.
    K : int
        Number of simulated datasets.
    config : ChainConfig
        Chain settings for the Bayesian fitters; its seed is replaced per cell.
    seed : int
        Master seed for data generation and chain substreams.
    workers : int
        Process pool size; 1 runs serially.  Results do not depend on it.

    A cell whose fit raises a library error is recorded in ``failures`` and
    left out of the averages.
    """
    if K < 1:
        raise ConfigError("K must be positive")
    config = config or ChainConfig(iterations=2000, burn_in=500, thin=1)
    data_rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    datasets = simulate_contaminated(design, data_rng, K)

    jobs, keys = [], []
    for k, groups in enumerate(datasets):
        for ip, (a_s, c) in enumerate(priors):
            _, b_s = prior_from(a_s, c)
            for jf, fitter in enumerate(fitters):
                cfg = replace(config, seed=_cell_seed(seed, 1, k, ip, jf))
                jobs.append((groups, design.sigma2, fitter, a_s, b_s, cfg, efficiency))
                keys.append((fitter, a_s, c, k))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_safe_cell, jobs))
    else:
        results = [_safe_cell(j) for j in jobs]

    report = KLReport(K=K, config={"design": design.__dict__.copy(), "priors": [list(p) for p in priors],
                                   "fitters": list(fitters), "K": K, "seed": seed,
                                   "chain": config.as_dict(), "efficiency": efficiency})
    for (fitter, a_s, c, k), res in zip(keys, results):
        if isinstance(res, Exception):
            log.warning("cell %s a_s=%g c=%g k=%d failed: %s", fitter, a_s, c, k, res)
            report.failures.append((fitter, a_s, c, k, f"{type(res).__name__}: {res}"))
            continue
        for i, (g, kl) in enumerate(zip(datasets[k], res)):
            report.records.append((fitter, a_s, c, k, i, g.p, g.m, g.n, kl))
    return report


def _safe_cell(job):
    try:
        return _fit_cell(job)
    except RestrictedLikelihoodError as exc:
        return exc

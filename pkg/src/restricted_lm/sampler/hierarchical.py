"""Two-level normal model with a data-augmentation step per group.

Model::

    theta_i ~ N(mu, tau2),  sigma2_i ~ IG(a_s, b_s),  y_ij ~ N(theta_i, sigma2_i)

with the improper hyperprior ``pi(mu, tau2) ∝ 1 / tau2``.  Under restricted
conditioning each group only reveals its own statistic ``T(y_i)``; a sweep
updates every group's augmented data, then the group parameters, then
``(mu, tau2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..dataset import Dataset
from ..errors import ChainStalled, ConfigError, ImproperPosterior
from ..estimators import EstimatorSpec
from ..geometry import build_geometry
from .chain import ChainConfig
from .priors import draw_inverse_gamma
from .proposal import AugmentedState, Constraint, mh_augment_step

MIN_GROUPS = 3


@dataclass
class HierarchicalOutput:
    theta: np.ndarray       # (S, G)
    sigma2: np.ndarray      # (S, G)
    mu: np.ndarray          # (S,)
    tau2: np.ndarray        # (S,)
    accepted: np.ndarray    # (G,)
    attempted: int = 0
    failures: np.ndarray | None = None
    augmented_final: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def acceptance_rate(self) -> np.ndarray:
        if not self.attempted:
            return np.full(self.accepted.shape, np.nan)
        return self.accepted / self.attempted

    @property
    def n_groups(self) -> int:
        return self.theta.shape[1]


def _as_group(g) -> np.ndarray:
    y = g.y if isinstance(g, Dataset) else np.asarray(g, dtype=float)
    if y.ndim != 1 or y.shape[0] < 3:
        raise ConfigError("every group needs at least 3 observations")
    return np.asarray(y, dtype=float)


def run_hierarchical(groups, a_s: float, b_s: float, spec: EstimatorSpec | None,
                     config: ChainConfig) -> HierarchicalOutput:
    """Gibbs sampler for the two-level model, optionally conditioning each group on ``T(y_i)``.

    Parameters
    ----------
    groups : sequence of Dataset or 1-d arrays
        Location-scale data, one entry per group.
    a_s, b_s : float
        Inverse-gamma hyperparameters of the group variances.
    spec : EstimatorSpec or None
        Conditioning statistic; ``None`` fits the full-data normal model.
    config : ChainConfig

    Each group owns a random substream for its augmentation step, so group
    updates are independent of each other within a sweep; the shared
    hyperparameters draw from a separate stream after all groups are done.
    """
    ys = [_as_group(g) for g in groups]
    G = len(ys)
    if G < MIN_GROUPS:
        raise ImproperPosterior(f"the tau2 conditional needs at least {MIN_GROUPS} groups, got {G}")
    if not (a_s > 0 and b_s > 0):
        raise ConfigError("a_s and b_s must be positive")

    ss = np.random.SeedSequence(config.seed)
    streams = [np.random.default_rng(s) for s in ss.spawn(G + 1)]
    hyper_rng = streams[-1]

    cons, states = [], []
    theta = np.empty(G)
    sigma2 = np.empty(G)
    for i, y in enumerate(ys):
        if spec is not None:
            X = np.ones((y.shape[0], 1))
            c = Constraint.from_observed(X, y, spec, build_geometry(X))
            cons.append(c)
            states.append(AugmentedState.at(y, c, config.coarea))
            theta[i], sigma2[i] = c.target.b[0], c.target.s**2
        else:
            theta[i], sigma2[i] = y.mean(), max(y.var(), 1e-12)
    mu = theta.mean()
    tau2 = max(theta.var(ddof=1), 1e-6)

    S = config.n_kept
    out_theta, out_sig = np.empty((S, G)), np.empty((S, G))
    out_mu, out_tau = np.empty(S), np.empty(S)
    accepted = np.zeros(G, dtype=int)
    failures = np.zeros(G, dtype=int)
    consecutive = np.zeros(G, dtype=int)
    n_i = np.array([y.shape[0] for y in ys], dtype=float)
    k = 0

    for it in range(config.iterations):
        cur = ys
        if spec is not None:
            cur = []
            for i in range(G):
                st, acc, failed = mh_augment_step(states[i], np.array([theta[i]]), sigma2[i], cons[i],
                                                  streams[i], config.proposal, config.kappa, config.coarea)
                states[i] = st
                accepted[i] += acc
                failures[i] += failed
                consecutive[i] = consecutive[i] + 1 if failed else 0
                if consecutive[i] >= config.max_consecutive_failures:
                    raise ChainStalled(f"group {i}: {consecutive[i]} consecutive proposals failed")
                cur.append(st.y)

        for i in range(G):
            rng = streams[i]
            y = cur[i]
            prec = 1.0 / tau2 + n_i[i] / sigma2[i]
            mean = (mu / tau2 + y.sum() / sigma2[i]) / prec
            theta[i] = mean + rng.standard_normal() / np.sqrt(prec)
            r = y - theta[i]
            sigma2[i] = draw_inverse_gamma(a_s + 0.5 * n_i[i], b_s + 0.5 * (r @ r), rng)

        d = theta - mu
        # tau2 | mu, theta under the 1/tau2 prior
        tau2 = draw_inverse_gamma(0.5 * G, 0.5 * (d @ d), hyper_rng)
        mu = theta.mean() + np.sqrt(tau2 / G) * hyper_rng.standard_normal()

        if config.kept(it):
            out_theta[k], out_sig[k], out_mu[k], out_tau[k] = theta, sigma2, mu, tau2
            k += 1

    return HierarchicalOutput(
        theta=out_theta, sigma2=out_sig, mu=out_mu, tau2=out_tau, accepted=accepted,
        attempted=config.iterations if spec is not None else 0, failures=failures,
        augmented_final=[s.y.copy() for s in states], config=config.as_dict(),
    )

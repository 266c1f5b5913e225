"""Trimmed log marginal pseudo-likelihood and train/holdout splitting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..dataset import Dataset
from ..errors import ConfigError, EmptyAfterTrim, StratumTooSmall


@dataclass
class TLMReport:
    """TLM scores per method, one entry per split."""

    base: str
    alpha: float
    scores: dict = field(default_factory=dict)
    trimmed: list = field(default_factory=list)

    @property
    def methods(self) -> list:
        return list(self.scores)

    def mean(self, method: str) -> float:
        return float(np.mean(self.scores[method]))

    def sd(self, method: str) -> float:
        v = np.asarray(self.scores[method])
        return float(v.std(ddof=1)) if v.size > 1 else 0.0

    def rows(self):
        for m in self.scores:
            yield m, self.mean(m), self.sd(m)


def n_trimmed(alpha: float, M: int) -> int:
    # 0.29 * 100 evaluates to 28.999...; the nudge keeps floor() at 29
    return int(math.floor(alpha * M + 1e-9))


def trim_order(base_values, alpha: float) -> np.ndarray:
    """Indices of the cases kept after trimming the lowest ``floor(alpha M)`` base values.

    Ties are broken by case index, so the earlier case is trimmed first.
    """
    v = np.asarray(base_values, dtype=float)
    if not 0.0 <= alpha < 1.0:
        raise ConfigError("alpha must lie in [0, 1)")
    M = v.shape[0]
    k = n_trimmed(alpha, M)
    if k >= M:
        raise EmptyAfterTrim(f"trimming {k} of {M} cases leaves nothing to score")
    order = np.argsort(v, kind="stable")
    return np.sort(order[k:])


def _single_split(logdens: Mapping[str, Sequence[float]], base: str, alpha: float):
    if base not in logdens:
        raise ConfigError(f"base method {base!r} not among scored methods")
    arrs = {m: np.asarray(v, dtype=float) for m, v in logdens.items()}
    M = arrs[base].shape[0]
    if any(a.shape != (M,) for a in arrs.values()):
        raise ConfigError("all methods must be scored on the same holdout cases")
    keep = trim_order(arrs[base], alpha)
    return {m: float(a[keep].mean()) for m, a in arrs.items()}, M - keep.shape[0]


def tlm_score(holdout_logdens, base: str, alpha: float) -> TLMReport:
    """Trimmed mean of holdout log predictive densities.

    Parameters
    ----------
    holdout_logdens : mapping or list of mappings
        ``method -> log predictive density per holdout case``; a list holds
        one mapping per train/holdout split.
    base : str
        Method whose log densities decide which cases are trimmed.
    alpha : float
        Trimming fraction; ``floor(alpha * M)`` cases are dropped.
    """
    splits = [holdout_logdens] if isinstance(holdout_logdens, Mapping) else list(holdout_logdens)
    report = TLMReport(base=base, alpha=float(alpha))
    for sp in splits:
        scores, k = _single_split(sp, base, alpha)
        for m, v in scores.items():
            report.scores.setdefault(m, []).append(v)
        report.trimmed.append(k)
    report.scores = {m: np.asarray(v) for m, v in report.scores.items()}
    return report


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def crossval_split(data, fraction: float, strata=None, rng: np.random.Generator | None = None):
    """Random train/holdout partition, optionally stratified.

    Each stratum contributes ``round(fraction * n_stratum)`` training cases
    (halves round up).  Returns sorted index arrays ``(train, holdout)``.

    Parameters
    ----------
    data : Dataset, array or int
        The cases to split, or their count.
    fraction : float
        Training fraction in (0, 1).
    strata : array_like, optional
        Group label per case.
    rng : numpy Generator
    """
    if isinstance(data, Dataset):
        n = data.n
    elif np.isscalar(data):
        n = int(data)
    else:
        n = len(data)
    if not 0.0 < fraction < 1.0:
        raise ConfigError("fraction must lie in (0, 1)")
    if rng is None:
        raise ConfigError("crossval_split needs an explicit random generator")
    labels = np.zeros(n, dtype=int) if strata is None else np.asarray(strata)
    if labels.shape[0] != n:
        raise ConfigError("strata must have one label per case")

    train = []
    for lab in np.unique(labels):
        idx = np.flatnonzero(labels == lab)
        if idx.shape[0] < 2:
            raise StratumTooSmall(f"stratum {lab!r} has {idx.shape[0]} case(s), need 2")
        k = _round_half_up(fraction * idx.shape[0])
        train.append(rng.permutation(idx)[:k])
    train = np.sort(np.concatenate(train))
    holdout = np.setdiff1d(np.arange(n), train)
    return train, holdout

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

OBSERVED, AUGMENTED = "observed", "augmented"


@dataclass(frozen=True)
class Dataset:
    """Response vector and design matrix.

    ``provenance`` marks whether ``y`` was observed or produced by the
    data-augmentation step.
    """

    y: np.ndarray
    X: np.ndarray
    provenance: str = OBSERVED

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if y.ndim != 1:
            raise ConfigError("y must be one-dimensional")
        if X.shape[0] != y.shape[0]:
            raise ConfigError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        if self.provenance not in (OBSERVED, AUGMENTED):
            raise ConfigError(f"unknown provenance {self.provenance!r}")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @classmethod
    def location(cls, y, provenance=OBSERVED) -> "Dataset":
        y = np.asarray(y, dtype=float)
        return cls(y, np.ones((y.shape[0], 1)), provenance)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.y[idx], self.X[idx], self.provenance)

"""Proposals of complete datasets on the constraint manifold and their densities.

The manifold ``A = {y : T(y) = T(y_obs)}`` is reached from the unit sphere in
``C(X)^perp`` by a scale-then-shift map ``h``.  The density a proposal puts
on ``A`` is the sphere density times three Jacobian factors: the radial
scaling ``r^{-(n-p-1)}``, the attenuation ``|cos gamma|`` between the sphere
normal and the gradient of the scale statistic, and the volume ratio of
projecting the tangent space of ``A`` onto ``C(X)^perp``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import (
    ConfigError,
    DegenerateProjection,
    NearTangentDegeneracy,
    NumericalError,
    PostConditionViolated,
    ZeroScale,
)
from ..estimators import (
    EstimatorSpec,
    SummaryStatistic,
    gradients_from_residuals,
    irls_solve,
)
from ..geometry import GeometryCache, build_geometry, log_sphere_area, orthonormalize, sample_sphere, vol_P

UNIFORM, VMF = "uniform", "vmf"


@dataclass(frozen=True)
class Constraint:
    """Everything that defines the manifold ``A``: design, statistic and its observed value."""

    X: np.ndarray
    geom: GeometryCache
    spec: EstimatorSpec
    target: SummaryStatistic

    @classmethod
    def from_observed(cls, X, y_obs, spec: EstimatorSpec, geom: GeometryCache | None = None) -> "Constraint":
        y_obs = np.asarray(y_obs, dtype=float)
        geom = geom if geom is not None else build_geometry(X)
        if np.linalg.norm(geom.project_complement(y_obs)) <= 1e-12:
            raise DegenerateProjection("observed response lies in the column space of X")
        target = irls_solve(geom.X, y_obs, spec)
        return cls(geom.X, geom, spec, target)

    @property
    def n(self) -> int:
        return self.geom.n

    @property
    def p(self) -> int:
        return self.geom.p

    @property
    def manifold_dim(self) -> int:
        return self.geom.n - self.geom.p - 1

    def satisfied_by(self, y, factor=10.0) -> bool:
        stat = irls_solve(self.X, y, self.spec, init=(self.target.b, self.target.s))
        return stat.deviation(self.target) <= factor * self.spec.tol

    def residuals(self, y) -> np.ndarray:
        """Standardized residuals of ``y`` at the target statistic."""
        return (np.asarray(y, dtype=float) - self.X @ self.target.b) / self.target.s


@dataclass(frozen=True)
class ProposalEvaluation:
    r: float
    log_cos_gamma: float
    log_vol_P: float
    log_base: float
    log_density: float
    z_star: np.ndarray

    @property
    def log_jacobian(self) -> float:
        """Log density minus the sphere density term."""
        return self.log_density - self.log_base


def _transform(z, c: Constraint):
    """``h(z)`` plus the standardized residuals shared by ``z`` and ``h(z)``."""
    stat = irls_solve(c.X, z, c.spec)
    if stat.s <= 1e-12:
        raise ZeroScale("scale statistic of z* is below 1e-12")
    r = c.target.s / stat.s
    # b(r z) = r b(z) by scale equivariance
    y = r * z + c.X @ (c.target.b - r * stat.b)
    e = (z - c.X @ stat.b) / stat.s
    return y, e


def h_transform(z_star, constraint: Constraint, check: bool = True) -> np.ndarray:
    """Map any ``z*`` with positive scale statistic onto the manifold ``A``.

    ``y = r z* + X (b_obs - b(r z*))`` with ``r = s_obs / s(z*)``.

    Raises
    ------
    PostConditionViolated
        When ``check`` is set and ``T(y)`` misses the target by more than
        ten times the solver tolerance.
    """
    z_star = np.asarray(z_star, dtype=float)
    y, _ = _transform(z_star, constraint)
    if check:
        stat = irls_solve(constraint.X, y, constraint.spec)
        dev = stat.deviation(constraint.target)
        if dev > 10.0 * constraint.spec.tol:
            raise PostConditionViolated(f"T(h(z*)) misses the target by {dev:.3g}")
    return y


def inverse_h(y, geom: GeometryCache) -> np.ndarray:
    """The unique sphere point mapped to ``y``: ``Q y / ||Q y||``."""
    q = geom.project_complement(np.asarray(y, dtype=float))
    nq = np.linalg.norm(q)
    if nq <= 1e-12:
        raise DegenerateProjection("||Q y|| is below 1e-12")
    return q / nq


def uniform_log_base(geom: GeometryCache) -> float:
    """Log density of the uniform distribution on the unit sphere of ``C(X)^perp``."""
    return -log_sphere_area(geom.n - geom.p)


def _log_jacobian(c: Constraint, e, z, with_coarea: bool = False):
    """Return ``(log r, log|cos gamma|, log Vol(P))`` for the manifold point with
    standardized residuals ``e`` whose projection onto ``C(X)^perp`` is ``z``.

    With ``with_coarea`` a fourth entry ``0.5 log det(G^T G)``, ``G = [grad b, grad s]``,
    is appended.
    """
    grad_b, grad_s = gradients_from_residuals(c.X, e, c.spec)
    r = np.linalg.norm(z)
    cos_g = abs(grad_s @ z) / (np.linalg.norm(grad_s) * r)
    if not cos_g >= 1e-12:
        raise NearTangentDegeneracy(f"|cos gamma| = {cos_g:.3g}")
    B = orthonormalize(np.column_stack([grad_b, grad_s]))
    vol = vol_P(c.geom, B)
    out = float(np.log(r)), float(np.log(cos_g)), vol.log_vol
    if with_coarea:
        G = np.column_stack([grad_b, grad_s])
        out += (0.5 * float(np.linalg.slogdet(G.T @ G)[1]),)
    return out


def proposal_log_density(y, constraint: Constraint, log_base: float | Callable | None = None) -> ProposalEvaluation:
    """Log density, on ``A``, of the dataset ``y`` under the sphere-then-``h`` proposal.

    Parameters
    ----------
    y : array_like, shape (n,)
        A point of the manifold, i.e. ``T(y)`` equals the target.
    constraint : Constraint
    log_base : float or callable, optional
        Log density of the sphere distribution at ``z* = inverse_h(y)``
        (a constant, or a function of ``z*``).  Defaults to uniform.

    Notes
    -----
    Because ``s(Qy) = s_obs`` and ``s`` is scale equivariant, the radius
    ``r = s_obs / s(z*)`` equals ``||Q y||`` and no extra solve is needed.
    """
    y = np.asarray(y, dtype=float)
    c = constraint
    z = c.geom.project_complement(y)
    z_star = inverse_h(y, c.geom)
    log_r, log_cos, log_vol = _log_jacobian(c, c.residuals(y), z)
    if log_base is None:
        lb = uniform_log_base(c.geom)
    elif callable(log_base):
        lb = float(log_base(z_star))
    else:
        lb = float(log_base)
    total = lb - c.manifold_dim * log_r + log_cos + log_vol
    return ProposalEvaluation(
        r=float(np.exp(log_r)), log_cos_gamma=log_cos, log_vol_P=log_vol, log_base=lb, log_density=total,
        z_star=z_star,
    )


# ---------------------------------------------------------------------------
# sphere proposals
# ---------------------------------------------------------------------------


def _wood_cosine(kappa: float, dim: int, rng: np.random.Generator) -> float:
    """Cosine to the mean direction of a von Mises-Fisher draw on ``S^{dim-1}`` (Wood, 1994)."""
    m1 = dim - 1.0
    b = m1 / (2.0 * kappa + np.sqrt(4.0 * kappa * kappa + m1 * m1))
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + m1 * np.log(1.0 - x0 * x0)
    while True:
        zb = rng.beta(0.5 * m1, 0.5 * m1)
        w = (1.0 - (1.0 + b) * zb) / (1.0 - (1.0 - b) * zb)
        if kappa * w + m1 * np.log(1.0 - x0 * w) - c >= np.log(rng.uniform()):
            return float(w)


def sample_vmf_step(z_current, kappa: float, geom: GeometryCache, rng: np.random.Generator) -> np.ndarray:
    """von Mises-Fisher draw on the unit sphere of ``C(X)^perp`` centred at ``z_current``.

    The kernel depends on the two points only through their inner product, so
    it is symmetric and cancels from the acceptance ratio.
    """
    if not kappa > 0:
        raise ConfigError("vMF concentration must be positive")
    mu = np.asarray(z_current, dtype=float)
    dim = geom.n - geom.p
    t = _wood_cosine(kappa, dim, rng)
    for _ in range(100):
        v = geom.project_complement(rng.standard_normal(geom.n))
        v -= (v @ mu) * mu
        nv = np.linalg.norm(v)
        if nv > 1e-12:
            break
    z = t * mu + np.sqrt(max(0.0, 1.0 - t * t)) * (v / nv)
    return z / np.linalg.norm(z)


# ---------------------------------------------------------------------------
# Metropolis-Hastings step on A
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AugmentedState:
    """A point of ``A`` with its cached proposal log-Jacobian.

    ``log_coarea`` is ``0.5 log det(G^T G)`` for the statistic Jacobian ``G``
    at ``y``; it is only filled in (and only used) by coarea-corrected chains.
    """

    y: np.ndarray
    z_star: np.ndarray
    log_jacobian: float
    log_coarea: float = 0.0

    @classmethod
    def at(cls, y, constraint: Constraint, coarea: bool = False) -> "AugmentedState":
        ev = proposal_log_density(y, constraint)
        y = np.asarray(y, dtype=float).copy()
        lc = log_coarea(y, constraint) if coarea else 0.0
        return cls(y, ev.z_star, ev.log_jacobian, lc)


def log_coarea(y, constraint: Constraint) -> float:
    """``0.5 log det(G^T G)`` with ``G`` the n x (p+1) gradient matrix of ``T`` at ``y``."""
    c = constraint
    z = c.geom.project_complement(np.asarray(y, dtype=float))
    return _log_jacobian(c, c.residuals(y), z, with_coarea=True)[3]


def propose(current: AugmentedState, constraint: Constraint, rng: np.random.Generator,
            proposal: str = UNIFORM, kappa: float | None = None, coarea: bool = False) -> AugmentedState:
    c = constraint
    if proposal == UNIFORM:
        z_star = sample_sphere(c.geom, rng)
    elif proposal == VMF:
        z_star = sample_vmf_step(current.z_star, kappa, c.geom, rng)
    else:
        raise ConfigError(f"unknown proposal {proposal!r}")
    y, e = _transform(z_star, c)
    z = c.geom.project_complement(y)
    parts = _log_jacobian(c, e, z, with_coarea=coarea)
    log_r, log_cos, log_vol = parts[:3]
    return AugmentedState(y, z / np.linalg.norm(z), -c.manifold_dim * log_r + log_cos + log_vol,
                          parts[3] if coarea else 0.0)


def normal_loglik(y, X, beta, sigma2) -> float:
    resid = y - X @ beta
    return float(-0.5 * y.shape[0] * np.log(2.0 * np.pi * sigma2) - 0.5 * (resid @ resid) / sigma2)


def log_acceptance_ratio(current: AugmentedState, proposed: AugmentedState, X, beta, sigma2) -> float:
    """``log f(y_p|theta) - log f(y_c|theta) + log p(y_c) - log p(y_p)``.

    Sphere base densities cancel for both the uniform and the vMF kernel.
    The ``log_coarea`` fields enter as ``log J_c - log J_p``; they are zero
    unless the states were built with the coarea correction.
    """
    return (normal_loglik(proposed.y, X, beta, sigma2) - normal_loglik(current.y, X, beta, sigma2)
            + current.log_jacobian - proposed.log_jacobian
            + current.log_coarea - proposed.log_coarea)


def mh_augment_step(current: AugmentedState, beta, sigma2, constraint: Constraint, rng: np.random.Generator,
                    proposal: str = UNIFORM, kappa: float | None = None, coarea: bool = False):
    """One Metropolis-Hastings update of the augmented dataset.

    With ``coarea`` the target on ``A`` is ``f(y|theta) / J(y)``,
    ``J = sqrt(det(G^T G))``, the exact conditional law of ``y`` given
    ``T(y)``.  Without it the target is ``f(y|theta)`` alone, which agrees
    whenever ``J`` is constant on ``A`` (least squares with the residual sd).

    Returns ``(state, accepted, failed)``.  A proposal for which the statistic
    or its Jacobian cannot be evaluated (zero scale, no convergence, singular
    implicit system, degenerate tangent) counts as a rejection and sets
    ``failed``.
    """
    try:
        prop = propose(current, constraint, rng, proposal, kappa, coarea)
    except NumericalError:
        # keep the uniform draw consumed so the stream stays aligned
        rng.uniform()
        return current, False, True
    log_r = log_acceptance_ratio(current, prop, constraint.X, beta, sigma2)
    if np.log(rng.uniform()) < log_r:
        return prop, True, False
    return current, False, False

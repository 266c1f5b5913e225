"""Simultaneous M-estimators of regression coefficients and scale.

The conditioning statistic ``T(y) = (b, s)`` solves

    sum_i psi(r_i) x_i = 0,    sum_i chi(r_i) = 0,    r_i = (y_i - x_i^T b) / s.

Gradients of ``(b, s)`` with respect to ``y`` follow from implicit
differentiation of the same system.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize, stats

from .errors import (
    ConfigError,
    NoBracket,
    NoConvergence,
    SingularImplicitSystem,
    TooFewRows,
    ZeroScale,
)
from .geometry import GeometryCache, orthonormalize

MAD_CONSISTENCY = 1.4826
DEFAULT_EFFICIENCY = 0.95

HUBER, TUKEY, LEAST_SQUARES = "huber", "tukey", "ls"
PROPOSAL2, SD_MOMENT = "proposal2", "sd"


# ---------------------------------------------------------------------------
# psi / chi families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PsiFamily:
    """Location/regression score function.

    ``kind`` is one of ``"huber"``, ``"tukey"`` or ``"ls"``; ``tuning`` is
    ignored for least squares.
    """

    kind: str
    tuning: float = float("nan")

    def __post_init__(self):
        if self.kind not in (HUBER, TUKEY, LEAST_SQUARES):
            raise ConfigError(f"unknown psi family {self.kind!r}")
        if self.kind != LEAST_SQUARES and not self.tuning > 0:
            raise ConfigError(f"{self.kind} psi needs a positive tuning constant")

    def psi(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == HUBER:
            return np.clip(u, -self.tuning, self.tuning)
        if self.kind == TUKEY:
            t = (u / self.tuning) ** 2
            return np.where(t <= 1.0, u * (1.0 - t) ** 2, 0.0)
        return u

    def dpsi(self, u):
        # at the Huber/Tukey kinks the derivative is taken from the inside
        u = np.asarray(u, dtype=float)
        if self.kind == HUBER:
            return (np.abs(u) <= self.tuning).astype(float)
        if self.kind == TUKEY:
            t = (u / self.tuning) ** 2
            return np.where(t <= 1.0, (1.0 - t) * (1.0 - 5.0 * t), 0.0)
        return np.ones_like(u)

    def weights(self, u):
        """``psi(u) / u`` with the limit value 1 at ``u = 0``."""
        u = np.asarray(u, dtype=float)
        if self.kind == HUBER:
            a = np.abs(u)
            return np.where(a <= self.tuning, 1.0, self.tuning / np.where(a == 0, 1.0, a))
        if self.kind == TUKEY:
            t = (u / self.tuning) ** 2
            return np.where(t <= 1.0, (1.0 - t) ** 2, 0.0)
        return np.ones_like(u)


@dataclass(frozen=True)
class ChiFamily:
    """Scale score function ``chi(u) = rho(u) - centering``.

    ``"proposal2"`` uses ``rho(u) = min(|u|, k)^2`` with the normal-consistency
    centering ``E[min(|Z|, k)^2]``; ``"sd"`` uses ``rho(u) = u^2`` and centering 1,
    which gives the n-denominator residual standard deviation.
    """

    kind: str
    tuning: float = float("nan")
    centering: float = field(default=float("nan"))

    def __post_init__(self):
        if self.kind == PROPOSAL2:
            if not self.tuning > 0:
                raise ConfigError("proposal-2 chi needs a positive tuning constant")
            if np.isnan(self.centering):
                object.__setattr__(self, "centering", chi_centering(self.tuning))
        elif self.kind == SD_MOMENT:
            object.__setattr__(self, "centering", 1.0)
        else:
            raise ConfigError(f"unknown chi family {self.kind!r}")

    def rho(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == PROPOSAL2:
            return np.minimum(np.abs(u), self.tuning) ** 2
        return u * u

    def chi(self, u):
        return self.rho(u) - self.centering

    def dchi(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == PROPOSAL2:
            return np.where(np.abs(u) <= self.tuning, 2.0 * u, 0.0)
        return 2.0 * u


@dataclass(frozen=True)
class EstimatorSpec:
    psi: PsiFamily
    chi: ChiFamily
    tol: float = 1e-10
    max_iter: int = 200

    def __post_init__(self):
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if int(self.max_iter) < 1:
            raise ConfigError("max_iter must be at least 1")

    @classmethod
    def huber(cls, efficiency=DEFAULT_EFFICIENCY, scale_tuning=None, **kw) -> "EstimatorSpec":
        """Huber psi with Huber proposal-2 scale, both tuned for ``efficiency``."""
        k = solve_tuning(HUBER, efficiency)
        return cls(PsiFamily(HUBER, k), ChiFamily(PROPOSAL2, scale_tuning or k), **kw)

    @classmethod
    def tukey(cls, efficiency=DEFAULT_EFFICIENCY, scale_tuning=None, **kw) -> "EstimatorSpec":
        """Tukey bisquare psi with Huber proposal-2 scale.

        The scale tuning defaults to the Huber constant at the same efficiency.
        """
        c = solve_tuning(TUKEY, efficiency)
        k = scale_tuning or solve_tuning(HUBER, efficiency)
        return cls(PsiFamily(TUKEY, c), ChiFamily(PROPOSAL2, k), **kw)

    @classmethod
    def least_squares(cls, **kw) -> "EstimatorSpec":
        """Least-squares coefficients with the n-denominator residual sd."""
        return cls(PsiFamily(LEAST_SQUARES), ChiFamily(SD_MOMENT), **kw)

    @classmethod
    def from_name(cls, name: str, efficiency=DEFAULT_EFFICIENCY, **kw) -> "EstimatorSpec":
        name = name.lower()
        if name == HUBER:
            return cls.huber(efficiency, **kw)
        if name == TUKEY:
            return cls.tukey(efficiency, **kw)
        if name in (LEAST_SQUARES, "ols", "least_squares"):
            return cls.least_squares(**kw)
        raise ConfigError(f"unknown estimator {name!r}")


@dataclass(frozen=True)
class SummaryStatistic:
    b: np.ndarray
    s: float

    def __post_init__(self):
        object.__setattr__(self, "b", np.atleast_1d(np.asarray(self.b, dtype=float)))
        if not self.s > 0:
            raise ZeroScale(f"scale statistic must be positive, got {self.s}")

    def deviation(self, other: "SummaryStatistic") -> float:
        """Max absolute difference over all p + 1 components."""
        return max(float(np.max(np.abs(self.b - other.b))), abs(self.s - other.s))


@dataclass(frozen=True)
class StatisticGradients:
    grad_b: np.ndarray  # (n, p); column j is the gradient of b_j
    grad_s: np.ndarray  # (n,)

    def matrix(self) -> np.ndarray:
        return np.column_stack([self.grad_b, self.grad_s])


# ---------------------------------------------------------------------------
# tuning constants
# ---------------------------------------------------------------------------


def chi_centering(k: float) -> float:
    """``E[min(|Z|, k)^2]`` for standard normal ``Z``."""
    Phi_k = stats.norm.cdf(k)
    tail = stats.norm.sf(k)
    return float(2.0 * Phi_k - 1.0 - 2.0 * k * stats.norm.pdf(k) + 2.0 * k * k * tail)


def efficiency(kind: str, tuning: float) -> float:
    """Asymptotic efficiency at the normal of the location M-estimator,
    ``(E psi'(Z))^2 / E psi(Z)^2``."""
    fam = PsiFamily(kind, tuning)
    if kind == HUBER:
        k = tuning
        a = 2.0 * stats.norm.cdf(k) - 1.0
        b = a - 2.0 * k * stats.norm.pdf(k) + 2.0 * k * k * stats.norm.sf(k)
        return float(a * a / b)
    if kind == TUKEY:
        c = tuning
        a = integrate.quad(lambda u: fam.dpsi(u) * stats.norm.pdf(u), -c, c, epsabs=1e-13)[0]
        b = integrate.quad(lambda u: fam.psi(u) ** 2 * stats.norm.pdf(u), -c, c, epsabs=1e-13)[0]
        return float(a * a / b)
    if kind == LEAST_SQUARES:
        return 1.0
    raise ConfigError(f"unknown psi family {kind!r}")


@lru_cache(maxsize=64)
def solve_tuning(kind: str, efficiency_target: float) -> float:
    """Tuning constant giving the requested efficiency at the normal, by bisection."""
    if not 0.5 < efficiency_target < 0.9999:
        raise NoBracket(f"efficiency {efficiency_target} outside (0.5, 0.9999)")
    if kind == HUBER:
        lo, hi = 1e-3, 20.0
    elif kind == TUKEY:
        lo, hi = 1.0, 40.0
    else:
        raise NoBracket(f"no tuning constant for psi family {kind!r}")
    f = lambda t: efficiency(kind, t) - efficiency_target  # noqa: E731
    if f(lo) * f(hi) > 0:
        raise NoBracket(f"efficiency {efficiency_target} not attainable for {kind}")
    # efficiency is smooth and increasing in t, so 1e-9 in t is far below 1e-6 in efficiency
    return float(optimize.bisect(f, lo, hi, xtol=1e-9, maxiter=200))


# ---------------------------------------------------------------------------
# solver
# ---------------------------------------------------------------------------


def _as_design(X, n=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if n is not None and X.shape[0] != n:
        raise ConfigError(f"design has {X.shape[0]} rows, response has {n}")
    return X


def _mad(v):
    return float(np.median(np.abs(v - np.median(v))))


def equation_residual(X, y, spec: EstimatorSpec, b, s) -> float:
    """Max-norm of the estimating equations divided by n."""
    r = (y - X @ b) / s
    f1 = X.T @ spec.psi.psi(r)
    f2 = np.sum(spec.chi.chi(r))
    return max(float(np.max(np.abs(f1))), abs(float(f2))) / len(y)


def _jacobian(X, r, spec):
    """``-s`` times the Jacobian of the estimating equations in ``(b, s)``."""
    dp = spec.psi.dpsi(r)
    dc = spec.chi.dchi(r)
    p = X.shape[1]
    M = np.empty((p + 1, p + 1))
    Xd = X * dp[:, None]
    M[:p, :p] = X.T @ Xd
    M[:p, p] = Xd.T @ r
    M[p, :p] = dc @ X
    M[p, p] = dc @ r
    return M, dp, dc


def _joint_root(X, y, spec: EstimatorSpec, b0, s0):
    n, p = X.shape

    def F(v):
        r = (y - X @ v[:p]) / np.exp(v[p])
        return np.append(X.T @ spec.psi.psi(r), np.sum(spec.chi.chi(r))) / n

    def J(v):
        # analytic, in (b, log s); numerical steps are relative and stall at b = 0
        s = np.exp(v[p])
        M = _jacobian(X, (y - X @ v[:p]) / s, spec)[0]
        return -np.column_stack([M[:, :p] / s, M[:, p]]) / n

    sol = optimize.root(F, np.append(b0, np.log(s0)), jac=J, method="lm")
    b, s = sol.x[:p], float(np.exp(sol.x[p]))
    if not (np.all(np.isfinite(b)) and np.isfinite(s) and s > 0):
        return b0, s0, np.inf
    return b, s, equation_residual(X, y, spec, b, s)


def irls_solve(X, y, spec: EstimatorSpec, init=None) -> SummaryStatistic:
    """Solve the simultaneous M-estimating equations.

    Alternates a weighted-least-squares coefficient step with the fixed-point
    scale step ``s^2 <- s^2 * mean(rho(r)) / centering``; once the equations are
    nearly satisfied, Newton steps on the joint system polish the root to
    machine precision.  Newton steps are only kept when they reduce the
    equation residual.

    Parameters
    ----------
    X : array_like, shape (n, p)
    y : array_like, shape (n,)
    spec : EstimatorSpec
    init : tuple (b0, s0), optional
        Starting values.  Defaults to least squares and ``1.4826 * MAD`` of
        the residuals (RMS of residuals if the MAD is zero).

    Raises
    ------
    ZeroScale
        Residual scale collapsed (below ``1e-12`` times the scale of ``y``).
    NoConvergence
        Equations not solved to ``spec.tol`` within ``spec.max_iter`` steps.
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    X = _as_design(X, n)
    p = X.shape[1]
    # the statistic itself only needs one residual degree of freedom;
    # sampling on {T(y) = t} needs n > p + 1 and is checked by the geometry
    if n <= p:
        raise TooFewRows(f"need n > p, got n={n}, p={p}")

    yscale = _mad(y) or float(np.max(np.abs(y)))
    floor = 1e-12 * yscale
    if yscale == 0.0:
        raise ZeroScale("response is identically zero")

    b_ls = np.linalg.lstsq(X, y, rcond=None)[0]
    res = y - X @ b_ls
    s_ls = MAD_CONSISTENCY * _mad(res)
    if s_ls <= floor:
        s_ls = float(np.sqrt(np.mean(res * res)))
    if init is None:
        b, s = b_ls.copy(), s_ls
    else:
        b = np.atleast_1d(np.asarray(init[0], dtype=float)).copy()
        s = float(init[1])
        if not s > 0:
            raise ConfigError("initial scale must be positive")
    if s <= floor:
        raise ZeroScale("residuals collapse: scale statistic is zero")

    psi, chi = spec.psi, spec.chi
    tol = spec.tol
    newton_zone = 1e-3
    resid = np.inf
    best = (np.inf, b, s)
    for _ in range(int(spec.max_iter)):
        r = (y - X @ b) / s
        f1 = X.T @ psi.psi(r)
        f2 = float(np.sum(chi.chi(r)))
        resid = max(float(np.max(np.abs(f1))), abs(f2)) / n
        if resid <= tol:
            break
        if resid < best[0]:
            best = (resid, b.copy(), s)
        if resid < newton_zone:
            M, _, _ = _jacobian(X, r, spec)
            try:
                step = np.linalg.solve(M, np.append(f1, f2)) * s
            except np.linalg.LinAlgError:
                step = None
            if step is not None and np.all(np.isfinite(step)) and s + step[p] > 0:
                b_new, s_new = b + step[:p], s + step[p]
                if equation_residual(X, y, spec, b_new, s_new) < resid:
                    b, s = b_new, s_new
                    continue
        # fixed-point scale step followed by a weighted least squares step
        s = s * np.sqrt(np.mean(chi.rho(r)) / chi.centering)
        if not s > floor:
            raise ZeroScale("residuals collapse: scale statistic is zero")
        r = (y - X @ b) / s
        w = psi.weights(r)
        Xw = X * w[:, None]
        try:
            b = np.linalg.solve(Xw.T @ X, Xw.T @ y)
        except np.linalg.LinAlgError:
            # every redescending weight hit zero
            break
    else:
        resid = np.inf
    if not resid <= tol:
        # the alternating scheme can cycle between location branches when a
        # few points cluster; a joint root search from the best iterate
        # usually still finds the solution
        # (redescending psi has several location branches, so retry from the
        # least-squares fit at a few scales; the MAD can be tiny when a few
        # points cluster, so the RMS residual is tried as well)
        rms = float(np.sqrt(np.mean(res * res)))
        starts = [(best[1], best[2]), (b_ls, s_ls)] + [(b_ls, f * rms) for f in 2.0 ** np.linspace(-2, 2, 9)]
        for b0, s0 in starts:
            b, s, resid = _joint_root(X, y, spec, b0, s0)
            if resid <= tol:
                break
        if not resid <= tol:
            raise NoConvergence(
                f"estimating equations residual {resid:.3g} > tol {tol:g} after {spec.max_iter} iterations"
            )

    # one more Newton step usually takes the residual to rounding level
    r = (y - X @ b) / s
    M, _, _ = _jacobian(X, r, spec)
    try:
        step = np.linalg.solve(M, np.append(X.T @ psi.psi(r), np.sum(chi.chi(r)))) * s
        if np.all(np.isfinite(step)) and s + step[p] > 0:
            b_new, s_new = b + step[:p], s + step[p]
            if equation_residual(X, y, spec, b_new, s_new) <= resid:
                b, s = b_new, s_new
    except np.linalg.LinAlgError:
        pass
    if not s > floor:
        raise ZeroScale("residuals collapse: scale statistic is zero")
    return SummaryStatistic(b=b, s=float(s))


# ---------------------------------------------------------------------------
# gradients
# ---------------------------------------------------------------------------

MAX_CONDITION = 1e12


def gradients_from_residuals(X, r, spec: EstimatorSpec):
    """Gradients of ``(b, s)`` in ``y`` given the standardized residuals at the root.

    Differentiating the estimating equations in ``y_j`` gives, for every j,
    ``M [db/dy_j; ds/dy_j] = [psi'(r_j) x_j; chi'(r_j)]``; the scale ``s``
    cancels.  Returns ``(grad_b, grad_s)`` with shapes (n, p) and (n,).
    """
    M, dp, dc = _jacobian(X, r, spec)
    cond = np.linalg.cond(M)
    if not cond < MAX_CONDITION:
        raise SingularImplicitSystem(f"implicit-function system has condition number {cond:.3g}")
    rhs = np.vstack([(X * dp[:, None]).T, dc])
    G = np.linalg.solve(M, rhs)
    p = X.shape[1]
    return G[:p].T, G[p]


def statistic_gradients(X, y, spec: EstimatorSpec, stat: SummaryStatistic) -> StatisticGradients:
    """Gradients of the coefficient and scale statistics with respect to ``y``."""
    y = np.asarray(y, dtype=float)
    X = _as_design(X, y.shape[0])
    r = (y - X @ stat.b) / stat.s
    grad_b, grad_s = gradients_from_residuals(X, r, spec)
    return StatisticGradients(grad_b=grad_b, grad_s=grad_s)


def normal_space_basis(grads: StatisticGradients, geom: GeometryCache | None = None) -> np.ndarray:
    """Orthonormal basis of the normal space of the constraint manifold.

    The p + 1 gradient vectors span it; ``geom`` is accepted for symmetry with
    the other geometry helpers and is only used to check dimensions.
    """
    G = grads.matrix()
    if geom is not None and G.shape[0] != geom.n:
        raise ConfigError("gradient length does not match the geometry")
    return orthonormalize(G)

"""Independent reference computations used by the tests.

Nothing here calls into the package's solver, geometry or proposal code; each
oracle reaches its answer by a different route (finite differences, explicit
null-space construction, hand change of variables, brute-force simulation).
"""

from __future__ import annotations

import numpy as np
from scipy import linalg, optimize, stats

HUBER_K95 = 1.3449975  # 95% efficiency constant, computed independently in test_estimators


def central_jacobian(f, y, h):
    """Central finite-difference Jacobian of ``f: R^n -> R^m``; returns (n, m)."""
    y = np.asarray(y, dtype=float)
    rows = []
    for j in range(y.shape[0]):
        e = np.zeros_like(y)
        e[j] = h
        rows.append((np.asarray(f(y + e)) - np.asarray(f(y - e))) / (2.0 * h))
    return np.array(rows)


def full_tangent_log_volume(X, B):
    """``log sqrt(det(P^T P))`` with ``A = null(B^T)`` and ``P = (I - H) A``.

    ``H`` is the hat matrix built from a pseudo-inverse, not from a QR.
    """
    X = np.asarray(X, dtype=float)
    A = linalg.null_space(np.asarray(B).T)
    H = X @ np.linalg.pinv(X)
    P = A - H @ A
    return 0.5 * np.linalg.slogdet(P.T @ P)[1]


def huber_location_scale(y, k=HUBER_K95):
    """Huber location with proposal-2 scale for a single sample, via scipy root finding."""
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    beta_k = stats.norm.expect(lambda z: min(abs(z), k) ** 2)

    def eqs(v):
        b, log_s = v
        r = (y - b) / np.exp(log_s)
        return [np.clip(r, -k, k).sum() / n, (np.minimum(np.abs(r), k) ** 2).mean() - beta_k]

    med = np.median(y)
    mad = 1.4826 * np.median(np.abs(y - med))
    sol = optimize.root(eqs, [med, np.log(mad)], method="hybr", tol=1e-14)
    assert sol.success
    return sol.x[0], float(np.exp(sol.x[1]))


def batch_huber_location_scale(Y, k=HUBER_K95, beta_k=None, iters=2000, tol=1e-13):
    """Vectorized fixed-point Huber/proposal-2 fit for many small samples (rows of ``Y``).

    Rows drop out of the iteration once both updates move less than ``tol``
    relative to the scale.
    """
    if beta_k is None:
        beta_k = stats.norm.expect(lambda z: min(abs(z), k) ** 2)
    med = np.median(Y, axis=1)
    s = 1.4826 * np.median(np.abs(Y - med[:, None]), axis=1)
    s = np.where(s > 0, s, Y.std(axis=1) + 1e-300)
    b = med.copy()
    active = np.arange(Y.shape[0])
    for _ in range(iters):
        if active.size == 0:
            break
        Ya, ba, sa = Y[active], b[active], s[active]
        r = (Ya - ba[:, None]) / sa[:, None]
        s_new = sa * np.sqrt(np.mean(np.minimum(np.abs(r), k) ** 2, axis=1) / beta_k)
        r = (Ya - ba[:, None]) / s_new[:, None]
        w = np.minimum(1.0, k / np.maximum(np.abs(r), 1e-300))
        b_new = (w * Ya).sum(axis=1) / w.sum(axis=1)
        done = (np.abs(b_new - ba) < tol * s_new) & (np.abs(s_new - sa) < tol * s_new)
        b[active], s[active] = b_new, s_new
        active = active[~done]
    return b, s


def vm_log_density(phi, kappa, mu):
    """von Mises log density on the unit circle."""
    from scipy.special import i0e

    return kappa * np.cos(phi - mu) - np.log(2.0 * np.pi * i0e(kappa)) - kappa


def circle_density_by_hand(y, kappa, mu):
    """Density on ``A = {y : mean(y) = b, sd_n(y) = s}`` for n = 3 induced by a
    von Mises angle on the unit circle of ``1^perp``.

    ``A`` is a circle of radius ``R = sqrt(3) s``; the map from the unit
    circle is a dilation by ``R`` (plus a shift), so arc length is multiplied
    by ``R`` and the density is divided by it.
    """
    e1 = np.array([1.0, -1.0, 0.0]) / np.sqrt(2.0)
    e2 = np.array([1.0, 1.0, -2.0]) / np.sqrt(6.0)
    c = y - y.mean()
    R = np.sqrt(np.sum(c * c))
    phi = np.arctan2(c @ e2, c @ e1)
    return vm_log_density(phi, kappa, mu) - np.log(R), phi


def manifold_log_density_fd(h, z0, E, log_base, eps=1e-6):
    """Log density at ``h(z0)`` of the push-forward of a sphere density through ``h``.

    ``E`` holds an orthonormal basis of the sphere's tangent space at ``z0``.
    Local coordinates ``u -> normalize(z0 + E u)`` are pushed through ``h`` and
    both Gram determinants come from central differences, so the density is
    ``p(z0) * sqrt(det Gz) / sqrt(det Gy)`` without any analytic Jacobian.
    """
    def z_of(u):
        v = z0 + E @ u
        return v / np.linalg.norm(v)

    d = E.shape[1]
    Jz = np.empty((z0.shape[0], d))
    Jy = np.empty((z0.shape[0], d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = eps
        zp, zm = z_of(e), z_of(-e)
        Jz[:, j] = (zp - zm) / (2 * eps)
        Jy[:, j] = (h(zp) - h(zm)) / (2 * eps)
    gz = np.linalg.slogdet(Jz.T @ Jz)[1]
    gy = np.linalg.slogdet(Jy.T @ Jy)[1]
    return log_base(z0) + 0.5 * (gz - gy)


def vmf_cosine_cdf(kappa, dim):
    """CDF of ``t = mu^T z`` for a von Mises-Fisher draw on ``S^{dim-1}``, by quadrature."""
    from scipy import integrate

    dens = lambda t: np.exp(kappa * (t - 1.0)) * (1.0 - t * t) ** (0.5 * (dim - 3))  # noqa: E731
    total = integrate.quad(dens, -1.0, 1.0, epsabs=1e-13)[0]
    return lambda x: np.array([integrate.quad(dens, -1.0, v, epsabs=1e-13)[0] for v in np.atleast_1d(x)]) / total


def standardized_huber_stats(n, n_fits, rng, k=HUBER_K95, chunk=200_000):
    """``(b(e), s(e))`` for ``n_fits`` standard normal samples ``e`` of size ``n``."""
    beta_k = stats.norm.expect(lambda z: min(abs(z), k) ** 2)
    bs, ss = [], []
    for start in range(0, n_fits, chunk):
        m = min(chunk, n_fits - start)
        b, s = batch_huber_location_scale(rng.standard_normal((m, n)), k, beta_k)
        bs.append(b)
        ss.append(s)
    return np.concatenate(bs), np.concatenate(ss)


def abc_location_scale(t_obs, b_e, s_e, prior_draw, rng, reps, keep):
    """Rejection ABC for a location-scale model conditioned on an equivariant statistic.

    Each standardized fit ``(b_e, s_e)`` is paired with ``reps`` prior draws
    ``(beta, sigma)``; equivariance gives ``T = (beta + sigma b_e, sigma s_e)``
    without refitting.  The ``keep`` draws nearest to ``t_obs`` in the metric
    ``((b - b_obs) / s_obs)^2 + (log s - log s_obs)^2`` are returned as
    ``(beta, sigma2, distance)``.
    """
    b_obs, s_obs = t_obs
    best_d = np.empty(0)
    best_b = np.empty(0)
    best_s2 = np.empty(0)
    for _ in range(reps):
        beta, sigma = prior_draw(rng, b_e.shape[0])
        b = beta + sigma * b_e
        s = sigma * s_e
        d = np.hypot((b - b_obs) / s_obs, np.log(s) - np.log(s_obs))
        d_all = np.concatenate([best_d, d])
        idx = np.argpartition(d_all, keep)[:keep] if d_all.size > keep else np.arange(d_all.size)
        best_b = np.concatenate([best_b, beta])[idx]
        best_s2 = np.concatenate([best_s2, sigma * sigma])[idx]
        best_d = d_all[idx]
    return best_b, best_s2, best_d


def exact_location_scale_posterior(t_obs, b_e, s_e, log_prior_beta, log_prior_sigma2):
    """Importance-sampling representation of ``pi(beta, sigma2 | T = t_obs)``.

    For every standardized fit ``u = (b_e, s_e)`` the unique ``theta(u)``
    with ``T = t_obs`` is ``sigma = s_obs / s_e``, ``beta = b_obs - sigma b_e``.
    Changing variables from ``theta`` to ``u`` turns the posterior into
    ``f_U(u) * w(u)`` with ``w = pi(beta) pi(sigma2) / s_e^2`` (up to a
    constant), so the ``u`` draws themselves, weighted by ``w``, target the
    restricted posterior with no tolerance at all.
    """
    b_obs, s_obs = t_obs
    sigma = s_obs / s_e
    beta = b_obs - sigma * b_e
    lw = log_prior_beta(beta) + log_prior_sigma2(sigma * sigma) - 2.0 * np.log(s_e)
    w = np.exp(lw - lw.max())
    return beta, sigma * sigma, w / w.sum()

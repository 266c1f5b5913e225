"""Orthonormal bases for a design matrix and the volume terms of the proposal Jacobian.

The column space of ``X`` is spanned by ``U`` (n x p) and its orthogonal
complement by ``W`` (n x (n - p)).  All projections onto the complement are
applied in the factored form ``v - U (U^T v)`` so ``W`` only needs to exist
for diagnostics and tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateDraw,
    DegenerateTangent,
    LinearlyDependent,
    RankDeficient,
    TooFewRows,
)

#: Above this many rows ``W`` is not materialized.
MAX_DENSE_COMPLEMENT = 4096

#: Singular values of ``U^T B`` at or above ``1 - UNIT_SV_TOL`` count as unit.
UNIT_SV_TOL = 1e-9


def _fix_signs(Q: np.ndarray, tol: float = 1e-14) -> np.ndarray:
    """Flip columns so the first entry with magnitude above ``tol`` is positive."""
    if Q.size == 0:
        return Q
    big = np.abs(Q) > tol
    first = np.argmax(big, axis=0)
    signs = np.sign(Q[first, np.arange(Q.shape[1])])
    signs[signs == 0] = 1.0
    return Q * signs


@dataclass(frozen=True)
class GeometryCache:
    """Orthonormal bases for ``C(X)`` and ``C(X)^perp``.

    Attributes
    ----------
    U : ndarray, shape (n, p)
    W : ndarray, shape (n, n - p), or None when ``n > MAX_DENSE_COMPLEMENT``
    n, p : int
    X : ndarray, shape (n, p)
        The design the bases were built from.
    coef_map : ndarray, shape (p, n)
        Least-squares coefficient operator, ``coef_map @ y`` solves ``min ||y - Xb||``.
    """

    U: np.ndarray
    W: np.ndarray | None
    n: int
    p: int
    X: np.ndarray = field(repr=False)
    coef_map: np.ndarray = field(repr=False)

    def project_complement(self, v: np.ndarray) -> np.ndarray:
        """Apply ``Q = I - U U^T`` to a vector or to each column of a matrix."""
        return v - self.U @ (self.U.T @ v)

    def projector(self) -> np.ndarray:
        """Dense ``Q`` (n x n).  Only meant for small problems and tests."""
        return np.eye(self.n) - self.U @ self.U.T

    def complement_basis(self) -> np.ndarray:
        if self.W is None:
            raise ValueError(f"W is not stored for n = {self.n} > {MAX_DENSE_COMPLEMENT}")
        return self.W


def build_geometry(X) -> GeometryCache:
    """Build orthonormal bases for the column space of ``X`` and its complement.

    Uses a Householder QR factorization.  Columns of ``U`` and ``W`` follow
    the sign convention "first nonzero entry positive".

    Raises
    ------
    TooFewRows
        If ``n <= p + 1`` (the constraint manifold would be empty or a point).
    RankDeficient
        If the smallest diagonal entry of R is below ``1e-10`` times the largest.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, p = X.shape
    if n <= p + 1:
        raise TooFewRows(f"need n > p + 1, got n={n}, p={p}")
    if not np.all(np.isfinite(X)):
        raise RankDeficient("design matrix has non-finite entries")

    mode = "complete" if n <= MAX_DENSE_COMPLEMENT else "reduced"
    Qfull, R = np.linalg.qr(X, mode=mode)
    diag = np.abs(np.diag(R[:p, :p]))
    if diag.max() == 0.0 or diag.min() < 1e-10 * diag.max():
        raise RankDeficient(
            f"design matrix is numerically rank deficient (|R_ii| range {diag.min():.3g}..{diag.max():.3g})"
        )

    U_raw = Qfull[:, :p]
    U = _fix_signs(U_raw)
    # keep R consistent with the flipped columns so X = U R still holds
    flips = np.sign(np.sum(U * U_raw, axis=0))
    R = R[:p, :p] * flips[:, None]
    coef_map = np.linalg.solve(R, U.T)

    W = _fix_signs(Qfull[:, p:]) if mode == "complete" else None
    for arr in (U, W, coef_map):
        if arr is not None:
            arr.setflags(write=False)
    Xc = X.copy()
    Xc.setflags(write=False)
    return GeometryCache(U=U, W=W, n=n, p=p, X=Xc, coef_map=coef_map)


def sample_sphere(geom: GeometryCache, rng: np.random.Generator, max_tries: int = 100) -> np.ndarray:
    """Draw ``z*`` uniformly from the unit sphere in ``C(X)^perp``.

    A standard normal n-vector projected onto the complement and normalized is
    uniform on that sphere by rotational invariance.
    """
    for _ in range(max_tries):
        g = geom.project_complement(rng.standard_normal(geom.n))
        nrm = np.linalg.norm(g)
        if nrm > 1e-12:
            return g / nrm
    raise DegenerateDraw(f"projected normal draw had norm < 1e-12 in {max_tries} tries")


def log_sphere_area(dim: int) -> float:
    """Log surface area of the unit sphere ``S^{dim-1}`` sitting in ``R^dim``."""
    from scipy.special import gammaln

    return float(np.log(2.0) + 0.5 * dim * np.log(np.pi) - gammaln(0.5 * dim))


def orthonormalize(vectors, tol: float = 1e-10) -> np.ndarray:
    """Modified Gram-Schmidt with one re-orthogonalization pass.

    Parameters
    ----------
    vectors : array_like, shape (n, k), or a sequence of k n-vectors
        Columns to orthonormalize, in order.

    Returns
    -------
    ndarray, shape (n, k)
        Orthonormal columns spanning the same nested subspaces, with the first
        nonzero entry of every column positive.
    """
    if isinstance(vectors, (list, tuple)):
        V = np.column_stack([np.asarray(v, dtype=float) for v in vectors])
    else:
        V = np.array(vectors, dtype=float, copy=True)
        if V.ndim == 1:
            V = V[:, None]
    n, k = V.shape
    Q = np.empty((n, k))
    for j in range(k):
        v = V[:, j].copy()
        norm_in = np.linalg.norm(v)
        if norm_in == 0.0:
            raise LinearlyDependent(f"column {j} is zero")
        for _ in range(2):
            for i in range(j):
                v -= (Q[:, i] @ v) * Q[:, i]
        nv = np.linalg.norm(v)
        if nv < tol * norm_in:
            raise LinearlyDependent(f"column {j} lies in the span of the previous columns")
        Q[:, j] = v / nv
    return _fix_signs(Q)


@dataclass(frozen=True)
class TangentVolume:
    log_vol: float
    singular_values: np.ndarray


def vol_P(geom: GeometryCache, B: np.ndarray) -> TangentVolume:
    """Volume factor of projecting the tangent space of the constraint manifold.

    The nonzero principal angles between the tangent space and ``C(X)^perp``
    coincide with those between the normal space (spanned by ``B``) and ``C(X)``,
    so the volume is the product of the non-unit singular values of ``U^T B``.
    That avoids building an (n - p - 1)-column basis of the tangent space.
    """
    B = np.asarray(B, dtype=float)
    sv = np.linalg.svd(geom.U.T @ B, compute_uv=False)
    kept = sv[sv < 1.0 - UNIT_SV_TOL]
    if kept.size and kept.min() <= 1e-12:
        raise DegenerateTangent(
            f"singular value {kept.min():.3g} of U^T B: tangent space collapsed onto C(X)"
        )
    return TangentVolume(log_vol=float(np.sum(np.log(kept))), singular_values=kept)


def log_vol_P_full(geom: GeometryCache, B: np.ndarray) -> float:
    """Reference ``log sqrt(det(P^T P))`` with ``P = Q A`` built explicitly.

    ``A`` is an orthonormal basis of the orthogonal complement of ``span(B)``.
    Costs O(n^3); used to check :func:`vol_P`.
    """
    B = np.asarray(B, dtype=float)
    k = B.shape[1]
    Qb, _ = np.linalg.qr(B, mode="complete")
    A = Qb[:, k:]
    P = geom.project_complement(A)
    sign, logdet = np.linalg.slogdet(P.T @ P)
    if sign <= 0:
        raise DegenerateTangent("P^T P is not positive definite")
    return 0.5 * float(logdet)

"""Orthogonal matching pursuit.

Two interchangeable solvers: ``omp_naive`` re-fits a least-squares
problem on the selected columns each iteration and serves as the
reference, while ``omp_cholesky`` maintains an inverse Cholesky factor of
the selected-columns Gram matrix so each iteration costs O(d*k) instead
of a fresh solve. ``joint_recover`` reuses one support for two
right-hand sides whose nonzero patterns coincide by construction.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    CholeskyBreakdownError,
    DegenerateMatrixError,
    DegenerateSupportError,
    DimensionError,
    SparsityError,
)
from .sparsify import SparseVector

DEFAULT_GRAM_BUDGET = 2**24


class GramCache:
    """Columns of A^T A, precomputed or materialized on demand.

    Precomputing trades d*d memory for speed; by default it happens only
    when d*d stays within ``budget`` entries. The cache is read-only
    after construction and can be shared across concurrent recoveries.
    """

    def __init__(self, A, precompute=None, budget=DEFAULT_GRAM_BUDGET):
        A = np.asarray(A, dtype=np.float64)
        if A.ndim != 2:
            raise DimensionError(f"expected a matrix, got shape {A.shape}")
        self.A = A
        d = A.shape[1]
        if precompute is None:
            precompute = d * d <= budget
        if precompute:
            self.gram = A.T @ A
            self.diag = np.diagonal(self.gram).copy()
        else:
            self.gram = None
            self.diag = np.einsum("ij,ij->j", A, A)
        self.column_norms = np.sqrt(self.diag)

    @property
    def dim(self):
        return self.A.shape[1]

    def col(self, j):
        """Column j of A^T A."""
        if self.gram is not None:
            return self.gram[:, j]
        return self.A.T @ self.A[:, j]


@dataclass(frozen=True)
class RecoveryResult:
    """Output of one pursuit.

    ``estimate`` carries the solution with sorted support; ``support``
    preserves the greedy selection order. ``residual_norm`` is
    ||y - A densify(estimate)||_2.
    """

    estimate: SparseVector
    support: np.ndarray
    residual_norm: float
    iterations: int


def _default_tol(y):
    return 1e-10 * float(np.linalg.norm(y))


def _check_instance(A, y, s):
    k, d = A.shape
    if y.ndim != 1 or y.shape[0] != k:
        raise DimensionError(f"measurement length {y.shape} does not match {k} rows")
    if not 1 <= s <= k:
        raise SparsityError(f"s={s} outside [1, k={k}]")
    if k > d:
        raise DimensionError(f"expected k <= d, got {k} x {d}")


def _select(p, norms, taken):
    # residuals are orthogonal to selected columns in exact arithmetic, so
    # masking them only suppresses re-selection driven by roundoff noise
    with np.errstate(divide="ignore", invalid="ignore"):
        scores = np.abs(p) / norms
    scores[norms == 0.0] = -np.inf
    if not taken:
        if np.all(np.isneginf(scores)):
            raise DegenerateMatrixError("every column of A has zero norm")
    else:
        scores[taken] = -np.inf
    i = int(np.argmax(scores))
    if np.isneginf(scores[i]) or scores[i] == 0.0:
        return None  # residual carries no correlation with any remaining column
    return i


def _result(d, support, coef, residual_norm):
    support = np.asarray(support, dtype=np.int64)
    order = np.argsort(support)
    estimate = SparseVector(d, support[order], np.asarray(coef)[order])
    return RecoveryResult(estimate, support, float(residual_norm), len(support))


def omp_naive(A, y, s, tol=None):
    """Classical OMP: greedy column selection plus a full least-squares
    re-fit per iteration.

    Stops after s selections or once ||r|| <= tol (default
    1e-10 * ||y||). Preconditions: s <= k <= d.
    """
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_instance(A, y, s)
    if tol is None:
        tol = _default_tol(y)
    d = A.shape[1]
    norms = np.linalg.norm(A, axis=0)
    r = y.copy()
    support = []
    coef = np.zeros(0)
    while len(support) < s:
        if np.linalg.norm(r) <= tol:
            break
        pick = _select(A.T @ r, norms, support)
        if pick is None:
            break
        support.append(pick)
        cols = A[:, support]
        coef, _, rank, _ = np.linalg.lstsq(cols, y, rcond=None)
        if rank < len(support):
            raise DegenerateSupportError(
                f"selected columns rank deficient after {len(support)} picks"
            )
        r = y - cols @ coef
    return _result(d, support, coef, np.linalg.norm(r))


def omp_cholesky(A, gram, y, s, tol=None):
    """OMP maintaining an inverse Cholesky factor of the selected Gram block.

    Matches ``omp_naive`` on full-rank instances. ``gram`` must be a
    GramCache built from the same A. Early stopping uses the running
    identity ||r||^2 = ||y||^2 - ||a||^2; the reported residual_norm is
    recomputed explicitly at the end.
    """
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_instance(A, y, s)
    if gram.A is not A and gram.A.shape != A.shape:
        raise DimensionError("gram cache does not match A")
    if tol is None:
        tol = _default_tol(y)
    d = A.shape[1]
    norms = gram.column_norms

    p = A.T @ y
    resid2 = float(y @ y)
    support = []
    a = np.zeros(s)
    B = np.zeros((d, s))
    F = np.zeros((s, s))

    kk = 0
    while kk < s:
        if math.sqrt(max(resid2, 0.0)) <= tol:
            break
        if kk > 0:
            p = p - B[:, kk - 1] * a[kk - 1]
        lam = _select(p, norms, support)
        if lam is None:
            break
        c = B[lam, :kk].copy()
        pivot = float(gram.diag[lam] - c @ c)
        if pivot <= 0.0:
            raise CholeskyBreakdownError(kk, pivot)
        gamma = 1.0 / math.sqrt(pivot)
        a[kk] = gamma * p[lam]
        B[:, kk] = gamma * (gram.col(lam) - B[:, :kk] @ c)
        F[:kk, kk] = -gamma * (F[:kk, :kk] @ c)
        F[kk, kk] = gamma
        support.append(lam)
        resid2 -= a[kk] * a[kk]
        kk += 1

    coef = F[:kk, :kk] @ a[:kk]
    residual = y - A[:, support] @ coef if support else y
    return _result(d, support, coef, np.linalg.norm(residual))


def joint_recover(A, gram, m, v, s, tol=None, variant="cholesky"):
    """Recover two vectors that share one support.

    Runs OMP on ``m`` to find the support, then solves the restricted
    least-squares problem for ``v`` on those same columns, so both
    results carry identical supports.
    """
    A = np.asarray(A, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if variant == "cholesky":
        rm = omp_cholesky(A, gram, m, s, tol)
    elif variant == "naive":
        rm = omp_naive(A, m, s, tol)
    else:
        raise SparsityError(f"unknown variant {variant!r}")
    if v.shape != np.asarray(m).shape:
        raise DimensionError("m and v must have equal length")

    support = rm.support
    if len(support) == 0:
        rv = RecoveryResult(
            SparseVector(rm.estimate.dim, [], []),
            support.copy(),
            float(np.linalg.norm(v)),
            0,
        )
        return rm, rv
    cols = A[:, support]
    coef, _, rank, _ = np.linalg.lstsq(cols, v, rcond=None)
    if rank < len(support):
        raise DegenerateSupportError("restricted system for v is rank deficient")
    residual = v - cols @ coef
    rv = _result(rm.estimate.dim, support, coef, np.linalg.norm(residual))
    return rm, rv

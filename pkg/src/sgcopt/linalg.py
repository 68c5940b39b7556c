"""Dense kernels: seeded RNG, Gaussian measurement matrices, products,
truncated SVD, chunk views, and the vector/matrix text format.

Randomness runs through numpy's PCG64 generator; normal variates use its
ziggurat sampler. Both are documented, deterministic algorithms, so equal
seeds give equal streams on every platform (pinned per numpy's stream
compatibility policy).
"""

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DimensionError, RankError, ValidationError
from .sparsify import SparseVector


def make_rng(seed):
    """PCG64 generator for a 64-bit seed."""
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


def derive_seed(seed, *tokens):
    """Stable 64-bit sub-seed from a master seed and a label path.

    Uses BLAKE2s over the rendered tokens, so derivation does not depend
    on interpreter hash randomization.
    """
    h = hashlib.blake2s(digest_size=8)
    h.update(str(int(seed)).encode())
    for tok in tokens:
        h.update(b"/")
        h.update(str(tok).encode())
    return int.from_bytes(h.digest(), "big")


def gaussian_matrix(k, d, rng):
    """k x d matrix with i.i.d. N(0, 1/k) entries (standard deviation 1/sqrt(k)).

    Expected squared column norm is 1, the scaling under which s-sparse
    vectors are recoverable from k >= kappa * s measurements.
    """
    if k < 1 or d < 1:
        raise DimensionError(f"matrix dimensions must be positive, got {k} x {d}")
    return rng.normal(0.0, 1.0 / np.sqrt(k), size=(k, d))


def matvec(M, v):
    """Matrix-vector product with an explicit shape check."""
    M = np.asarray(M)
    v = np.asarray(v)
    if M.ndim != 2 or v.ndim != 1 or M.shape[1] != v.shape[0]:
        raise DimensionError(f"cannot multiply {M.shape} by {v.shape}")
    return M @ v


def sparse_matvec(M, x):
    """Product M @ densify(x) touching only the columns in x's support."""
    M = np.asarray(M)
    if M.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {M.shape}")
    if x.dim != M.shape[1]:
        raise DimensionError(f"matrix has {M.shape[1]} columns, vector dim {x.dim}")
    if x.nnz == 0:
        return np.zeros(M.shape[0])
    return M[:, x.support] @ x.values


def chunk_views(v, c):
    """Split v into c contiguous equal-length views; c must divide len(v)."""
    from .errors import ChunkingError

    v = np.asarray(v)
    if c < 1 or v.size % c != 0:
        raise ChunkingError(f"c={c} does not divide d={v.size}")
    width = v.size // c
    return [v[i * width : (i + 1) * width] for i in range(c)]


@dataclass(frozen=True)
class SvdResult:
    """Top-r singular triplets: M ~ U diag(sigma) V^T.

    ``left_vectors`` is m x r with orthonormal columns, ``singular_values``
    non-increasing and non-negative, ``right_vectors`` n x r.
    """

    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray


def _complete_orthonormal(U, cols_done, rng):
    # fill zero columns (rank-deficient input) with an orthonormal complement
    m, r = U.shape
    for j in range(r):
        if cols_done[j]:
            continue
        cand = rng.standard_normal(m)
        basis = U[:, cols_done]
        cand -= basis @ (basis.T @ cand)
        U[:, j] = cand / np.linalg.norm(cand)
        cols_done[j] = True
    return U


def truncated_svd(M, r, max_iters=200, tol=1e-10):
    """Top-r SVD by block power iteration with QR re-orthonormalization.

    Iterates the subspace until the singular-value estimates change by at
    most ``tol`` relatively, then extracts triplets by a Rayleigh-Ritz
    step on the converged subspace. Raises ConvergenceError (carrying the
    last relative change) if ``max_iters`` is exhausted.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {M.shape}")
    m, n = M.shape
    if not 1 <= r <= min(m, n):
        raise RankError(f"rank {r} outside [1, {min(m, n)}]")

    rng = make_rng(derive_seed(0x53564431, m, n, r))
    Q, _ = np.linalg.qr(rng.standard_normal((n, r)))
    prev = None
    change = np.inf
    for _ in range(max_iters):
        Z = M @ Q
        Qz, _ = np.linalg.qr(Z)
        W = M.T @ Qz
        Q, R = np.linalg.qr(W)
        # singular-value estimates from the r x r projected factor; invariant
        # under rotations inside clusters of near-equal singular values
        sigma = np.sqrt(np.clip(np.linalg.eigvalsh(R.T @ R), 0.0, None))[::-1]
        if prev is not None:
            scale = np.maximum(np.abs(sigma), np.finfo(float).tiny)
            change = float(np.max(np.abs(sigma - prev) / scale))
            if change <= tol:
                break
        prev = sigma
    else:
        raise ConvergenceError(
            f"singular values not converged in {max_iters} iterations", change
        )

    # Rayleigh-Ritz on the converged right subspace
    B = M @ Q
    T = B.T @ B
    evals, rot = np.linalg.eigh(T)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    rot = rot[:, order]
    sigma = np.sqrt(evals)
    V = Q @ rot
    U = np.zeros((m, r))
    floor = max(m, n) * np.finfo(float).eps * (sigma[0] if sigma[0] > 0 else 1.0)
    cols_done = sigma > floor
    if np.any(cols_done):
        U[:, cols_done] = (B @ rot)[:, cols_done] / sigma[cols_done]
    if not np.all(cols_done):
        U = _complete_orthonormal(U, cols_done.copy(), rng)
        sigma = np.where(cols_done, sigma, 0.0)
    return SvdResult(U, sigma, V)


# --- text format ------------------------------------------------------------
#
# One ASCII header line, then whitespace-separated decimal values:
#   dense-vector <d>
#   dense-matrix <k> <d>     (row-major)

def write_vector(path, v):
    v = np.asarray(v, dtype=np.float64)
    with open(path, "w") as fh:
        fh.write(f"dense-vector {v.size}\n")
        fh.write(" ".join(repr(x) for x in v.tolist()))
        fh.write("\n")


def write_matrix(path, M):
    M = np.asarray(M, dtype=np.float64)
    with open(path, "w") as fh:
        fh.write(f"dense-matrix {M.shape[0]} {M.shape[1]}\n")
        for row in M:
            fh.write(" ".join(repr(x) for x in row.tolist()))
            fh.write("\n")


def _read_payload(fh, expected, what, path):
    values = fh.read().split()
    if len(values) != expected:
        raise ValidationError(
            f"{path}: expected {expected} values for {what}, found {len(values)}"
        )
    try:
        return np.array([float(x) for x in values])
    except ValueError as exc:
        raise ValidationError(f"{path}: non-numeric value ({exc})") from exc


def read_vector(path):
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2 or header[0] != "dense-vector":
            raise ValidationError(f"{path}: expected 'dense-vector <d>' header")
        d = int(header[1])
        return _read_payload(fh, d, "dense-vector", path)


def read_matrix(path):
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3 or header[0] != "dense-matrix":
            raise ValidationError(f"{path}: expected 'dense-matrix <k> <d>' header")
        k, d = int(header[1]), int(header[2])
        return _read_payload(fh, k * d, "dense-matrix", path).reshape(k, d)

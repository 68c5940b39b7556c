"""Magnitude sparsification, globally and per chunk, with the worst-case chunking bound.

Top-s keeps the s entries of largest magnitude; ties break toward the
lowest index so results are reproducible. Chunked sparsification keeps
the top s_c entries inside each of c equal chunks, which is cheaper to
project but can differ from the global top-s when the large entries
cluster in few chunks; ``chunking_error`` measures that gap and
``theorem1_bound`` gives its worst-case expectation bound.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ChunkingError, SparsityError, ValidationError


@dataclass(frozen=True)
class SparseVector:
    """An s-sparse vector of dimension ``dim``.

    ``support`` holds the nonzero positions, strictly increasing;
    ``values`` holds the matching entries.
    """

    dim: int
    support: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "values", values)
        if self.dim < 0:
            raise ValidationError(f"dim must be >= 0, got {self.dim}")
        if support.ndim != 1 or values.ndim != 1 or support.size != values.size:
            raise ValidationError("support and values must be 1-D of equal length")
        if support.size > self.dim:
            raise SparsityError(f"{support.size} nonzeros in dimension {self.dim}")
        if support.size:
            if support[0] < 0 or support[-1] >= self.dim:
                raise ValidationError("support indices out of range")
            if np.any(np.diff(support) <= 0):
                raise ValidationError("support indices must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValidationError("values must be finite")

    @property
    def nnz(self):
        return int(self.support.size)

    def densify(self):
        """Full-length array with ``values`` scattered onto ``support``."""
        out = np.zeros(self.dim)
        out[self.support] = self.values
        return out


def _top_indices(v, s):
    # stable sort on descending magnitude; ties fall to the lowest index
    order = np.argsort(-np.abs(v), kind="stable")
    return np.sort(order[:s])


def sparsify_top_s(v, s):
    """Keep the s entries of v with largest magnitude, zeroing the rest.

    Ties break toward the lowest index. Raises SparsityError unless
    1 <= s <= len(v).
    """
    v = np.asarray(v, dtype=np.float64)
    d = v.size
    if not 1 <= s <= d:
        raise SparsityError(f"s={s} outside [1, {d}]")
    support = _top_indices(v, s)
    return SparseVector(d, support, v[support])


def square_support(g):
    """Element-wise square; the support is unchanged."""
    return SparseVector(g.dim, g.support, g.values**2)


def chunked_sparsify(v, c, s_c):
    """Top-s_c sparsification applied independently to each of c equal chunks.

    Entries selected with value exactly zero are pruned from the emitted
    support (an all-zero chunk contributes nothing); the total nonzero
    budget is still c * s_c.
    """
    v = np.asarray(v, dtype=np.float64)
    d = v.size
    if c < 1 or d % c != 0:
        raise ChunkingError(f"c={c} does not divide d={d}")
    width = d // c
    if not 1 <= s_c <= width:
        raise ChunkingError(f"s_c={s_c} outside [1, {width}]")
    support = []
    for i in range(c):
        chunk = v[i * width : (i + 1) * width]
        support.append(_top_indices(chunk, s_c) + i * width)
    support = np.concatenate(support)
    values = v[support]
    keep = values != 0.0
    return SparseVector(d, support[keep], values[keep])


def theorem1_bound(d, s, g_max):
    """Worst-case bound, in expectation, on the squared distance between
    chunk-based and global top-s sparsification: 2 * (1 - s/d) * g_max."""
    if not 1 <= s <= d:
        raise SparsityError(f"s={s} outside [1, {d}]")
    if g_max < 0:
        raise ValidationError("g_max must be non-negative")
    return 2.0 * (1.0 - s / d) * g_max


def chunking_error(v, c, s_c):
    """Squared L2 distance between chunked and global top-(c*s_c) sparsification."""
    chunked = chunked_sparsify(v, c, s_c).densify()
    top = sparsify_top_s(v, c * s_c).densify()
    diff = chunked - top
    return float(diff @ diff)

"""Optimizer steps with compressed moment states.

The baseline ``adamw_step`` keeps dense first/second moments. The
compressed variants keep both moments as k-dimensional vectors, k =
kappa * c * s_c, independent of the parameter count d:

- ``sgc_step``: single-chunk pipeline (sparsify, project, update the
  compressed moments, recover the update direction by OMP);
- ``mesgc_step``: the same pipeline per chunk with one small projection
  matrix shared across all c chunks;
- ``cesgc_step``: projects a matrix-shaped gradient through the top
  left-singular subspace first, then runs the chunked pipeline in the
  reduced space;
- ``sgca_resample``: periodically redraws the projection matrix and
  re-aligns the compressed moments to it.

States are mutated in place; a step on one state must not run
concurrently with another step on the same state. Distinct states may
step in parallel.
"""

import base64
import json
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import DimensionError, GradientError, RankError, ValidationError
from .linalg import derive_seed, gaussian_matrix, make_rng, sparse_matvec, truncated_svd
from .omp import DEFAULT_GRAM_BUDGET, GramCache, joint_recover
from .sparsify import sparsify_top_s, square_support

CHECKPOINT_VERSION = 1


@dataclass
class SgcConfig:
    """Hyperparameters shared by every optimizer variant.

    The compressed subspace has dimension k = kappa * c * s_c; each chunk
    contributes kappa * s_c measurements, which must not exceed the chunk
    length d / c.
    """

    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    alpha: float = 1.0
    eta: float = 1e-3
    s_c: int = 1
    c: int = 1
    kappa: int = 8
    rank_r: int = 0
    svd_refresh_T: int = 200
    resample_T: int = 0
    seed: int = 0
    projection: str = "gaussian"
    recovery_budget_multiplier: float = 1.0
    weight_decay: float = 0.0
    svd_max_iters: int = 200
    svd_tol: float = 1e-10
    gram_budget: int = DEFAULT_GRAM_BUDGET

    @property
    def k(self):
        """Total compressed state dimension per moment."""
        return self.kappa * self.c * self.s_c

    @property
    def s(self):
        """Total sparsity budget."""
        return self.c * self.s_c

    @property
    def k_chunk(self):
        """Measurements per chunk."""
        return self.kappa * self.s_c

    def recovery_budget(self):
        """Per-chunk OMP sparsity budget, clipped to the measurement count."""
        budget = math.ceil(self.s_c * self.recovery_budget_multiplier)
        return max(1, min(self.k_chunk, budget))

    def validate(self, d=None):
        if not 0.0 <= self.beta1 < 1.0 or not 0.0 <= self.beta2 < 1.0:
            raise ValidationError("beta1, beta2 must lie in [0, 1)")
        if self.epsilon <= 0 or self.alpha <= 0 or self.eta <= 0:
            raise ValidationError("epsilon, alpha, eta must be positive")
        if self.s_c < 1 or self.c < 1 or self.kappa < 1:
            raise ValidationError("s_c, c, kappa must be positive integers")
        if self.projection not in ("gaussian", "identity"):
            raise ValidationError(f"unknown projection {self.projection!r}")
        if self.recovery_budget_multiplier < 1.0:
            raise ValidationError("recovery_budget_multiplier must be >= 1")
        if d is not None:
            if d % self.c != 0:
                raise ValidationError(f"c={self.c} does not divide d={d}")
            if self.k_chunk > d // self.c:
                raise ValidationError(
                    f"kappa*s_c={self.k_chunk} exceeds chunk length {d // self.c}"
                )
            if self.projection == "identity" and self.k_chunk != d // self.c:
                raise ValidationError(
                    "identity projection requires kappa*s_c == d/c"
                )
        return self


@dataclass
class StepOutput:
    """One update direction.

    ``n`` has the full parameter length; entries off the recovered
    support are zero for the compressed variants. ``residual_norms`` are
    the OMP residuals for the two moments, aggregated over chunks
    (both zero for the dense baseline).
    """

    n: np.ndarray
    recovered_support_size: int
    residual_norms: tuple


@dataclass
class AdamWState:
    """Dense baseline moments, both full length."""

    m: np.ndarray
    v: np.ndarray
    step_t: int = 0

    @classmethod
    def create(cls, d):
        return cls(np.zeros(d), np.zeros(d))


class SgcState:
    """Compressed per-parameter-group optimizer state.

    ``m`` and ``v`` hold the compressed moments (length k, zero at step
    0), ``A`` the per-chunk measurement matrix shared by all chunks, and
    ``B`` the outer projection used only by the double-compressed
    variant. ``proj_epoch`` counts projection redraws so that A is always
    reproducible from (seed, epoch).
    """

    def __init__(self, cfg, d, shape=None, projection_override=None):
        cfg.validate(d)
        self.d = d
        self.shape = shape
        self.m = np.zeros(cfg.k)
        self.v = np.zeros(cfg.k)
        self.step_t = 0
        self.proj_epoch = 0
        self.seed = cfg.seed
        self.B = None
        self._projection_override = projection_override
        self.A = self._make_projection(cfg, 0) if projection_override is None \
            else np.asarray(projection_override, dtype=np.float64)
        if self.A.shape != (cfg.k_chunk, d // cfg.c):
            raise DimensionError(
                f"projection shape {self.A.shape} != {(cfg.k_chunk, d // cfg.c)}"
            )
        self._gram = None

    @classmethod
    def for_vector(cls, cfg, d, projection_override=None):
        """State for SGC/MESGC on a length-d gradient."""
        return cls(cfg, d, projection_override=projection_override)

    @classmethod
    def for_matrix(cls, cfg, rows, cols):
        """State for CESGC on a rows x cols gradient; the compressed
        pipeline operates on the rank_r x cols projected gradient."""
        if not 1 <= cfg.rank_r <= rows:
            raise RankError(f"rank_r={cfg.rank_r} outside [1, {rows}]")
        return cls(cfg, cfg.rank_r * cols, shape=(rows, cols))

    def _make_projection(self, cfg, epoch):
        k_c = cfg.k_chunk
        d_c = self.d // cfg.c
        if cfg.projection == "identity":
            return np.eye(k_c, d_c)
        rng = make_rng(derive_seed(cfg.seed, "projection", epoch))
        return gaussian_matrix(k_c, d_c, rng)

    def gram(self, cfg):
        if self._gram is None:
            self._gram = GramCache(self.A, budget=cfg.gram_budget)
        return self._gram

    def replace_projection(self, cfg, A_new, epoch):
        self.A = A_new
        self.proj_epoch = epoch
        self._gram = None


def _check_gradient(g):
    if not np.all(np.isfinite(g)):
        raise GradientError("gradient contains NaN or Inf")


def adamw_step(g, state, cfg):
    """Dense AdamW direction: exponential moving moments, bias correction,
    elementwise m / (sqrt(v) + eps). Mutates state in place."""
    g = np.asarray(g, dtype=np.float64)
    if g.shape != state.m.shape:
        raise DimensionError(f"gradient shape {g.shape} != state {state.m.shape}")
    _check_gradient(g)
    state.step_t += 1
    t = state.step_t
    state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * g
    state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * g * g
    m_hat = state.m / (1.0 - cfg.beta1**t)
    v_hat = state.v / (1.0 - cfg.beta2**t)
    n = m_hat / (np.sqrt(v_hat) + cfg.epsilon)
    return StepOutput(n, g.size, (0.0, 0.0))


def mesgc_step(g, state, cfg):
    """Chunked compressed step.

    Per chunk: top-s_c sparsify the gradient slice, project it and its
    elementwise square (shared support) with the shared matrix A, update
    the compressed moment slices, bias-correct, then jointly recover both
    moments by OMP and emit alpha * m / (sqrt(v) + eps) on the recovered
    support. Recovered second-moment entries are clamped at zero before
    the square root; recovery noise can push them slightly negative.
    """
    g = np.asarray(g, dtype=np.float64)
    if g.size != state.d:
        raise DimensionError(f"gradient length {g.size} != state dimension {state.d}")
    _check_gradient(g)
    c = cfg.c
    d_c = state.d // c
    k_c = cfg.k_chunk
    budget = cfg.recovery_budget()

    state.step_t += 1
    t = state.step_t
    bc1 = 1.0 - cfg.beta1**t
    bc2 = 1.0 - cfg.beta2**t
    gram = state.gram(cfg)

    n = np.zeros(state.d)
    support_total = 0
    res_m2 = 0.0
    res_v2 = 0.0
    for i in range(c):
        lo, hi = i * d_c, (i + 1) * d_c
        klo, khi = i * k_c, (i + 1) * k_c
        g_sparse = sparsify_top_s(g[lo:hi], cfg.s_c)
        p = sparse_matvec(state.A, g_sparse)
        q = sparse_matvec(state.A, square_support(g_sparse))
        state.m[klo:khi] = cfg.beta1 * state.m[klo:khi] + (1.0 - cfg.beta1) * p
        state.v[klo:khi] = cfg.beta2 * state.v[klo:khi] + (1.0 - cfg.beta2) * q
        m_hat = state.m[klo:khi] / bc1
        v_hat = state.v[klo:khi] / bc2
        rm, rv = joint_recover(state.A, gram, m_hat, v_hat, budget)
        if rm.iterations:
            denom = np.sqrt(np.clip(rv.estimate.values, 0.0, None)) + cfg.epsilon
            n[lo + rm.estimate.support] = cfg.alpha * rm.estimate.values / denom
        support_total += rm.iterations
        res_m2 += rm.residual_norm**2
        res_v2 += rv.residual_norm**2

    if cfg.resample_T > 0 and state.step_t % cfg.resample_T == 0:
        sgca_resample(state, cfg)
    return StepOutput(n, support_total, (math.sqrt(res_m2), math.sqrt(res_v2)))


def sgc_step(g, state, cfg):
    """Single-chunk compressed step (requires c == 1)."""
    if cfg.c != 1:
        raise ValidationError("sgc_step requires c == 1; use mesgc_step for c > 1")
    return mesgc_step(g, state, cfg)


def cesgc_step(g_matrix, state, cfg):
    """Double-compressed step for a matrix-shaped gradient.

    Every svd_refresh_T steps (and at the first step) the outer
    projection B is rebuilt from the transposed top-rank_r left singular
    vectors of the gradient; the chunked pipeline then runs on the
    flattened rank_r x cols projection and the recovered direction is
    lifted back through B^T. The returned direction is the flattened
    rows x cols matrix.
    """
    g_matrix = np.asarray(g_matrix, dtype=np.float64)
    if state.shape is None or g_matrix.shape != state.shape:
        raise DimensionError(
            f"gradient shape {g_matrix.shape} != state shape {state.shape}"
        )
    rows, cols = state.shape
    if not 1 <= cfg.rank_r <= rows:
        raise RankError(f"rank_r={cfg.rank_r} outside [1, {rows}]")
    _check_gradient(g_matrix)

    if state.step_t % cfg.svd_refresh_T == 0:
        svd = truncated_svd(g_matrix, cfg.rank_r, cfg.svd_max_iters, cfg.svd_tol)
        state.B = svd.left_vectors.T.copy()

    g_low = (state.B @ g_matrix).reshape(-1)
    out = mesgc_step(g_low, state, cfg)
    n_full = state.B.T @ out.n.reshape(cfg.rank_r, cols)
    return StepOutput(n_full.reshape(-1), out.recovered_support_size, out.residual_norms)


def sgca_resample(state, cfg):
    """Redraw the projection matrix and re-align the compressed moments.

    Each chunk's raw moments are recovered under the old matrix (shared
    support, as in the step itself) and re-projected with the fresh one.
    Returns the mutated state.
    """
    gram_old = state.gram(cfg)
    A_old = state.A
    epoch = state.proj_epoch + 1
    A_new = state._make_projection(cfg, epoch)
    c = cfg.c
    k_c = cfg.k_chunk
    budget = cfg.recovery_budget()
    for i in range(c):
        klo, khi = i * k_c, (i + 1) * k_c
        m_c = state.m[klo:khi]
        v_c = state.v[klo:khi]
        if not np.any(m_c) and not np.any(v_c):
            continue
        rm, rv = joint_recover(A_old, gram_old, m_c, v_c, budget)
        state.m[klo:khi] = sparse_matvec(A_new, rm.estimate)
        state.v[klo:khi] = sparse_matvec(A_new, rv.estimate)
    state.replace_projection(cfg, A_new, epoch)
    return state


def apply_update(w, n, eta):
    """w - eta * n as a new array."""
    w = np.asarray(w, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    if w.shape != n.shape:
        raise DimensionError(f"shapes {w.shape} and {n.shape} differ")
    return w - eta * n


def apply_update_inplace(w, n, eta):
    """w -= eta * n."""
    if w.shape != n.shape:
        raise DimensionError(f"shapes {w.shape} and {n.shape} differ")
    w -= eta * n
    return w


# --- checkpointing ----------------------------------------------------------

def _encode(arr):
    if arr is None:
        return None
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    return {"shape": list(arr.shape), "data": base64.b64encode(arr.tobytes()).decode()}


def _decode(obj):
    if obj is None:
        return None
    arr = np.frombuffer(base64.b64decode(obj["data"]), dtype=np.float64).copy()
    return arr.reshape(obj["shape"])


def save_checkpoint(path, cfg, state):
    """Dump config and state to JSON.

    Moment arrays are stored as base64-encoded float64 bytes so the round
    trip is bit exact. A is stored as (seed, epoch) and regenerated on
    load unless it was supplied explicitly.
    """
    payload = {
        "version": CHECKPOINT_VERSION,
        "config": asdict(cfg),
        "state": {
            "d": state.d,
            "shape": list(state.shape) if state.shape else None,
            "step_t": state.step_t,
            "proj_epoch": state.proj_epoch,
            "m": _encode(state.m),
            "v": _encode(state.v),
            "B": _encode(state.B),
            "A_override": _encode(state._projection_override),
        },
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_checkpoint(path):
    """Inverse of save_checkpoint; returns (cfg, state)."""
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValidationError(f"unsupported checkpoint version {payload.get('version')}")
    known = {f.name for f in fields(SgcConfig)}
    cfg_dict = payload["config"]
    unknown = set(cfg_dict) - known
    if unknown:
        raise ValidationError(f"unknown config keys in checkpoint: {sorted(unknown)}")
    cfg = SgcConfig(**cfg_dict)
    st = payload["state"]
    override = _decode(st["A_override"])
    shape = tuple(st["shape"]) if st["shape"] else None
    if shape is not None:
        state = SgcState.for_matrix(cfg, *shape)
    else:
        state = SgcState.for_vector(cfg, st["d"], projection_override=override)
    state.step_t = st["step_t"]
    state.m = _decode(st["m"])
    state.v = _decode(st["v"])
    state.B = _decode(st["B"])
    if st["proj_epoch"] != state.proj_epoch:
        state.replace_projection(cfg, state._make_projection(cfg, st["proj_epoch"]),
                                 st["proj_epoch"])
    return cfg, state

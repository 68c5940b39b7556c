"""Closed-form memory accounting for the compressed optimizers and the
low-rank baselines.

All figures count scalar entries (multiply by an element width for
bytes). For a rows x cols layer with d = rows * cols:

===========  ==============  ================  ===================
method       weights         optimizer states  projection storage
===========  ==============  ================  ===================
mesgc        d               2k                0
cesgc        d               2k                r * rows
galore       d               2 * r * cols      r * rows
lora         d + r*(rows+cols)  2 * r*(rows+cols)  0
fullft       d               2d                0
===========  ==============  ================  ===================

with k = kappa * c * s_c. On square layers (rows = cols = sqrt(d)) the
low-rank rows reduce to the familiar 2r*sqrt(d) / 4r*sqrt(d) forms.
``granularity`` reports the smallest state-count increment a unit change
of the method's free integer can produce (s_c for the compressed family,
r for the low-rank ones); ``min_states`` is the count at that integer's
minimum.
"""

from dataclasses import dataclass

from .errors import SpecError, ValidationError

SGC_METHODS = ("mesgc", "cesgc")
ALL_METHODS = ("mesgc", "cesgc", "galore", "lora", "fullft")


@dataclass(frozen=True)
class LayerShape:
    m: int
    n: int

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValidationError(f"layer dimensions must be >= 1, got {self.m} x {self.n}")

    @property
    def d(self):
        return self.m * self.n


@dataclass(frozen=True)
class MethodSpec:
    method: str
    rank_r: int = 0
    s_c: int = 0
    c: int = 0
    kappa: int = 0

    def __post_init__(self):
        if self.method not in ALL_METHODS:
            raise SpecError(f"unknown method {self.method!r}; expected one of {ALL_METHODS}")
        if self.method in SGC_METHODS:
            if self.s_c < 1 or self.c < 1 or self.kappa < 1:
                raise SpecError(f"{self.method} requires positive s_c, c, kappa")
            if self.method == "cesgc" and self.rank_r < 1:
                raise SpecError("cesgc requires positive rank_r")
        elif self.method in ("galore", "lora") and self.rank_r < 1:
            raise SpecError(f"{self.method} requires positive rank_r")

    @property
    def k(self):
        return self.kappa * self.c * self.s_c


@dataclass(frozen=True)
class MemoryReport:
    weights: int
    optimizer_states: int
    projection_storage: int
    min_states: int
    granularity_per_state_dim: int
    granularity_total_states: int


def account(shape, spec):
    """Entry counts for one layer under one method."""
    d = shape.d
    method = spec.method
    if method in SGC_METHODS:
        states = 2 * spec.k
        projection = spec.rank_r * shape.m if method == "cesgc" else 0
        weights = d
    elif method == "galore":
        states = 2 * spec.rank_r * shape.n
        projection = spec.rank_r * shape.m
        weights = d
    elif method == "lora":
        trainable = spec.rank_r * (shape.m + shape.n)
        states = 2 * trainable
        projection = 0
        weights = d + trainable
    else:  # fullft
        states = 2 * d
        projection = 0
        weights = d
    per_state, total = granularity(shape, spec)
    return MemoryReport(
        weights=weights,
        optimizer_states=states,
        projection_storage=projection,
        min_states=min_states(shape, spec),
        granularity_per_state_dim=per_state,
        granularity_total_states=total,
    )


def granularity(shape, spec):
    """(increment of one moment's dimension, increment of the total state
    count) per unit increase of the method's free integer."""
    method = spec.method
    if method in SGC_METHODS:
        per_state = spec.kappa * spec.c
    elif method == "galore":
        per_state = shape.n
    elif method == "lora":
        per_state = shape.m + shape.n
    else:  # fullft has no free integer
        per_state = 0
    return per_state, 2 * per_state


def min_states(shape, spec):
    """Smallest reachable state count: free integer at 1; the compressed
    family also drops to a single chunk."""
    method = spec.method
    if method in SGC_METHODS:
        return 2 * spec.kappa
    if method == "galore":
        return 2 * shape.n
    if method == "lora":
        return 2 * (shape.m + shape.n)
    return 2 * shape.d


def projection_overhead(shape, spec, include_A=False):
    """Projection storage for the compressed family.

    With ``include_A`` the count covers the chunk measurement operator at
    its full subspace dimension, k * (d / c) entries; otherwise it is the
    per-method projection storage from ``account`` (0 for mesgc, the
    outer r x rows matrix for cesgc).
    """
    if spec.method not in SGC_METHODS:
        raise SpecError(f"projection_overhead applies to {SGC_METHODS}, got {spec.method!r}")
    if include_A:
        if shape.d % spec.c != 0:
            raise ValidationError(f"c={spec.c} does not divide d={shape.d}")
        return spec.k * (shape.d // spec.c)
    return account(shape, spec).projection_storage

"""sgcopt: AdamW-family optimizers whose moment states live in a
compressed subspace and are recovered per step by orthogonal matching
pursuit, plus the memory model and desk-scale training harness around
them."""

from .errors import (
    CholeskyBreakdownError,
    ChunkingError,
    ConvergenceError,
    DegenerateMatrixError,
    DegenerateSupportError,
    DimensionError,
    GradientError,
    NumericalError,
    RankError,
    SgcError,
    SparsityError,
    SpecError,
    TrainStepError,
    ValidationError,
)
from .linalg import (
    SvdResult,
    chunk_views,
    derive_seed,
    gaussian_matrix,
    make_rng,
    matvec,
    read_matrix,
    read_vector,
    sparse_matvec,
    truncated_svd,
    write_matrix,
    write_vector,
)
from .memory import (
    LayerShape,
    MemoryReport,
    MethodSpec,
    account,
    granularity,
    min_states,
    projection_overhead,
)
from .omp import GramCache, RecoveryResult, joint_recover, omp_cholesky, omp_naive
from .optim import (
    AdamWState,
    SgcConfig,
    SgcState,
    StepOutput,
    adamw_step,
    apply_update,
    apply_update_inplace,
    cesgc_step,
    load_checkpoint,
    mesgc_step,
    save_checkpoint,
    sgc_step,
    sgca_resample,
)
from .problems import (
    Problem,
    TrainReport,
    finite_diff_grad,
    loss_and_grad,
    make_problem,
    train,
)
from .sparsify import (
    SparseVector,
    chunked_sparsify,
    chunking_error,
    sparsify_top_s,
    square_support,
    theorem1_bound,
)

__version__ = "0.1.0"

"""Random-kitchen-sinks acoustic model toolkit.

Kernel classifiers built from random Fourier features: exact kernels and
their Monte-Carlo feature approximations, a softmax frame classifier with
optional bottleneck, mini-batch SGD training with full checkpoint traces,
and model selection by perplexity or entropy-regularized perplexity.
"""

from .kernels import KernelFamily, KernelSpec, kernel_exact, kernel_exact_pairs
from .features import (
    BankComponent,
    ProjectionBank,
    combine_banks,
    feature_map,
    feature_map_batch,
    load_bank,
    rebuild_bank,
    sample_projection_bank,
    save_bank,
)
from .model import (
    Bottleneck,
    DivergenceError,
    Model,
    hidden,
    hidden_batch,
    init_model,
    load_model,
    loss_and_grad,
    posterior,
    posterior_batch,
    save_model,
)
from .metrics import (
    PROB_FLOOR,
    MetricsRecord,
    accuracy,
    compute_metrics,
    entropy_regularized_perplexity,
    mean_entropy,
    perplexity,
)
from .data import (
    DataFormatError,
    FrameDataset,
    load_dataset,
    make_concentric_circles,
    make_gaussian_mixture,
    make_noisy_labels,
    median_pairwise_distance,
    save_dataset,
    split_heldout,
    synth_dataset,
)
from .training import (
    CheckpointTrace,
    TraceEntry,
    TrainConfig,
    TrainingDiverged,
    evaluate_checkpoint,
    momentum_update,
    sgd_step,
    train,
    zero_velocity,
)
from .selection import (
    SelectionCriterion,
    export_trace,
    load_trace,
    select_checkpoint,
    selection_summary,
)
from .oracle import (
    DEFAULT_CAP,
    approximation_report,
    central_difference,
    exact_kernel_matrix,
    finite_diff_grad,
    kernel_logreg_fit,
    kernel_logreg_predict,
)

__version__ = "0.1.0"

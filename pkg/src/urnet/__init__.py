"""Un-rectified ReLU network training and compressed-sensing recovery.

The package trains dense ReLU networks without backpropagation: each
rectifier is replaced by box-constrained activation weights plus slack
equalities, and the resulting constrained problem is solved by an
augmented-Lagrangian outer loop whose inner minimization consists of
closed-form block updates.  Compressed-sensing utilities build training
pairs from underdetermined linear measurements and score recovery.

Setting the environment variable ``URNET_NUM_THREADS`` before the first
import of this package caps the BLAS thread pools (it seeds
``OMP_NUM_THREADS`` and friends, without overriding values already set
explicitly).  It has no effect once numpy is loaded.
"""

import os as _os

if "URNET_NUM_THREADS" in _os.environ:
    for _var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
    ):
        _os.environ.setdefault(_var, _os.environ["URNET_NUM_THREADS"])

from .model import (
    NetworkParams,
    forward,
    init_gaussian,
    load_checkpoint,
    relu,
    save_checkpoint,
)
from .unrectify import (
    BatchState,
    ConstraintResiduals,
    SampleState,
    lemma1_check,
    residuals,
    residuals_batch,
    unrectify_forward,
    unrectify_forward_batch,
)
from .auglag import (
    CgtOptions,
    DivergenceError,
    DualState,
    PenaltyParams,
    TrainResult,
    TrainTrace,
    cgt_train,
    dual_update,
    eval_auglag,
    grad_block,
    kkt_residual,
    project_bound,
)
from .baselines import (
    AdamConfig,
    BaselineResult,
    BaselineTrace,
    BcdConfig,
    adam_train,
    bcd_train,
)
from .csrecovery import (
    SensingProblem,
    build_training,
    extract_patches,
    gen_sensing,
    load_sensing,
    mse,
    psnr,
    reconstruct_average,
    recover,
    save_sensing,
    ssim,
)
from .datasets import (
    Dataset,
    gen_sparse,
    load_grayscale_image,
    load_mnist_idx,
    save_grayscale_image,
)

__all__ = [
    "NetworkParams",
    "forward",
    "init_gaussian",
    "load_checkpoint",
    "relu",
    "save_checkpoint",
    "BatchState",
    "ConstraintResiduals",
    "SampleState",
    "lemma1_check",
    "residuals",
    "residuals_batch",
    "unrectify_forward",
    "unrectify_forward_batch",
    "CgtOptions",
    "DivergenceError",
    "DualState",
    "PenaltyParams",
    "TrainResult",
    "TrainTrace",
    "cgt_train",
    "dual_update",
    "eval_auglag",
    "grad_block",
    "kkt_residual",
    "project_bound",
    "AdamConfig",
    "BaselineResult",
    "BaselineTrace",
    "BcdConfig",
    "adam_train",
    "bcd_train",
    "SensingProblem",
    "build_training",
    "extract_patches",
    "gen_sensing",
    "load_sensing",
    "mse",
    "psnr",
    "reconstruct_average",
    "recover",
    "save_sensing",
    "ssim",
    "Dataset",
    "gen_sparse",
    "load_grayscale_image",
    "load_mnist_idx",
    "save_grayscale_image",
]

__version__ = "0.1.0"

"""Block-based compressive sensing reconstruction toolkit."""

from .tensor import (
    Tensor,
    concat,
    conv1x1,
    conv2d,
    fully_connected,
    pixel_shuffle,
    pixel_unshuffle,
    relu,
    softplus,
)
from .optim import Adam
from .sampling import (
    SamplingOperator,
    gram_spectral_norm,
    init_transpose,
    make_operator,
    make_ratio_set,
    measure,
    measurement_count,
)
from .ista import IstaConfig, StepSizeError, default_step, gradient_step, objective, run_ista, soft_threshold
from .model import (
    ConditionOutput,
    NetConfig,
    UnrolledModel,
    condition_forward,
    proximal_step,
    reconstruct,
)
from .metrics import ArtifactScore, block_artifact_score, crop_back, pad_to_blocks, psnr
from .pgm import read_pgm, write_pgm
from .measurements import read_measurements, write_measurements
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .data import extract_patches, load_dataset, load_images
from .training import TrainConfig, TrainResult, batch_loss, resume, train
from .evaluate import EvalReport, evaluate_model, format_report, write_csv
from .errors import (
    DatasetError,
    FileFormatError,
    NumericalDivergenceError,
    UsageError,
)

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "ArtifactScore",
    "Checkpoint",
    "ConditionOutput",
    "DatasetError",
    "EvalReport",
    "FileFormatError",
    "IstaConfig",
    "NetConfig",
    "NumericalDivergenceError",
    "SamplingOperator",
    "StepSizeError",
    "Tensor",
    "TrainConfig",
    "TrainResult",
    "UnrolledModel",
    "UsageError",
    "batch_loss",
    "block_artifact_score",
    "concat",
    "condition_forward",
    "conv1x1",
    "conv2d",
    "crop_back",
    "default_step",
    "evaluate_model",
    "extract_patches",
    "format_report",
    "fully_connected",
    "gradient_step",
    "gram_spectral_norm",
    "init_transpose",
    "load_checkpoint",
    "load_dataset",
    "load_images",
    "make_operator",
    "make_ratio_set",
    "measure",
    "measurement_count",
    "objective",
    "pad_to_blocks",
    "pixel_shuffle",
    "pixel_unshuffle",
    "proximal_step",
    "psnr",
    "read_measurements",
    "read_pgm",
    "reconstruct",
    "relu",
    "resume",
    "run_ista",
    "save_checkpoint",
    "softplus",
    "soft_threshold",
    "train",
    "write_csv",
    "write_measurements",
    "write_pgm",
]

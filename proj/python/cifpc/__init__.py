"""Conditional invertible flows for point clouds."""

from ._cifpc import (
    CheckpointError,
    DataError,
    Model,
    ModelConfig,
    NumericError,
    TrainConfig,
    TrainingError,
    chamfer,
    cma_es,
    emd,
    evaluate,
    gradcheck,
    jsd,
    load_cloud,
    load_manifest,
    mmd_cov,
    normalize,
    one_nna,
    rotate,
    rotation_matrix,
    save_cloud,
    synth,
    train,
)

__all__ = [
    "CheckpointError",
    "DataError",
    "Model",
    "ModelConfig",
    "NumericError",
    "TrainConfig",
    "TrainingError",
    "chamfer",
    "cma_es",
    "emd",
    "evaluate",
    "gradcheck",
    "jsd",
    "load_cloud",
    "load_manifest",
    "mmd_cov",
    "normalize",
    "one_nna",
    "rotate",
    "rotation_matrix",
    "save_cloud",
    "synth",
    "train",
]

"""Small from-scratch neural network: exact gradients, Adam, plateau LR,
weighted cross-entropy, binary checkpoints."""

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .gradcheck import grad_check
from .layers import backward, forward, loss_and_grad
from .loss import LOG_FLOOR, softmax, softmax_ce_logit_grad, weighted_ce_loss
from .model import (
    Conv2d,
    Dense,
    Flatten,
    MaxPool,
    ModelSpec,
    Params,
    ReLU,
    clone_params,
    default_model_spec,
    flatten_params,
    init_params,
    param_count,
    unflatten_params,
)
from .optim import (
    AdamState,
    adam_step,
    init_adam_state,
    plateau_lr_sequence,
    plateau_reduction_epochs,
)
from .train import (
    EpochLog,
    TrainConfig,
    evaluate,
    fit,
    plateau_schedule,
    write_training_log,
)

__all__ = [
    "Checkpoint",
    "load_checkpoint",
    "save_checkpoint",
    "grad_check",
    "forward",
    "backward",
    "loss_and_grad",
    "softmax",
    "weighted_ce_loss",
    "softmax_ce_logit_grad",
    "LOG_FLOOR",
    "Conv2d",
    "ReLU",
    "MaxPool",
    "Flatten",
    "Dense",
    "ModelSpec",
    "Params",
    "default_model_spec",
    "init_params",
    "flatten_params",
    "unflatten_params",
    "clone_params",
    "param_count",
    "AdamState",
    "init_adam_state",
    "adam_step",
    "plateau_reduction_epochs",
    "plateau_lr_sequence",
    "TrainConfig",
    "EpochLog",
    "plateau_schedule",
    "fit",
    "evaluate",
    "write_training_log",
]

"""Numpy neural-network kernel: layers with analytic backward, AdamW, EMA, gradcheck."""
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .functional import (
    conv_out_len,
    ConfigError,
    DimensionError,
    activation_backward,
    activation_forward,
    conv1d_backward,
    conv1d_forward,
    conv2d_backward,
    conv2d_forward,
    group_norm_backward,
    group_norm_forward,
    linear_backward,
    linear_forward,
    sinusoidal_embed,
)
from .gradcheck import PrecisionError, gradcheck
from .layers import FiLM, Activation, Conv1d, Conv2d, GroupNorm, Layer, Linear, Sequential
from .optim import OptimConfig, adamw_step
from . import layers
from .params import (
    EmaState,
    NonFiniteError,
    Param,
    ParamStore,
    StateError,
    check_finite,
    ema_update,
    make_rng,
    rng_from_state,
    rng_state,
)

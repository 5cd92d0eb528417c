from .layers import TrainMode, softmax, softmax_cce
from .model import (
    FcnConfig, FcnCore, apply_bn_stats, fcn_backward, fcn_forward, head_backward, head_forward,
    init_core, param_count, param_shapes,
)
from .optim import AdamState, adam_step, global_norm
from .serialize import decode_container, encode_container, load_container, save_container

__all__ = [
    "AdamState", "FcnConfig", "FcnCore", "TrainMode", "adam_step", "apply_bn_stats",
    "decode_container", "encode_container", "fcn_backward", "fcn_forward", "global_norm",
    "head_backward", "head_forward", "init_core", "load_container", "param_count",
    "param_shapes", "save_container", "softmax", "softmax_cce",
]

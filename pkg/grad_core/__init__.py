"""
Grad Core Module
Tape-based reverse-mode autodiff over dense float64 tensors
"""

from . import ops
from .errors import (
    ConfigError,
    CorruptFile,
    DetachedRoot,
    LabError,
    MissingArtifact,
    MissingGradShape,
    NonFinite,
    NotScalarRoot,
    ShapeMismatch,
    SteeringFailure,
    TrainingFailure,
    UnsupportedOp,
)
from .layers import init_mlp, mlp_forward, mlp_widths
from .optim import AdamConfig, ParamSet, frozen, optimizer_step
from .ops import op_forward
from .rng import derive_seed, make_rng
from .serialization import load_param_arrays, load_params, load_tensor, save_params, save_tensor
from .tensor import DTYPE, GradientMap, Tape, Tensor, active_tape, backward, no_tape

__all__ = [
    'ops',
    'Tensor',
    'Tape',
    'GradientMap',
    'DTYPE',
    'active_tape',
    'no_tape',
    'backward',
    'op_forward',
    'ParamSet',
    'AdamConfig',
    'optimizer_step',
    'frozen',
    'init_mlp',
    'mlp_forward',
    'mlp_widths',
    'derive_seed',
    'make_rng',
    'save_tensor',
    'load_tensor',
    'save_params',
    'load_params',
    'load_param_arrays',
    'LabError',
    'ConfigError',
    'TrainingFailure',
    'SteeringFailure',
    'MissingArtifact',
    'CorruptFile',
    'ShapeMismatch',
    'NonFinite',
    'NotScalarRoot',
    'DetachedRoot',
    'MissingGradShape',
    'UnsupportedOp',
]

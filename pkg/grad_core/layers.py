"""
MLP Helpers
Parameter initialization and forward pass shared by every network
"""

from typing import Callable, Dict, List, Sequence

import numpy as np

from . import ops
from .optim import ParamSet
from .tensor import Tensor

ACTIVATIONS: Dict[str, Callable[[Tensor], Tensor]] = {
    "relu": ops.relu,
    "tanh": ops.tanh,
    "sigmoid": ops.sigmoid,
}


def init_mlp(
    params: ParamSet,
    prefix: str,
    widths: Sequence[int],
    rng: np.random.Generator,
    gain: float = 1.0,
) -> None:
    """Gaussian weights scaled by gain/sqrt(fan_in), zero biases"""
    for i, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
        params.add(f"{prefix}.{i}.weight", rng.standard_normal((fan_in, fan_out)) * gain / np.sqrt(fan_in))
        params.add(f"{prefix}.{i}.bias", np.zeros(fan_out))


def mlp_depth(params: ParamSet, prefix: str) -> int:
    depth = 0
    while f"{prefix}.{depth}.weight" in params:
        depth += 1
    return depth


def mlp_widths(params: ParamSet, prefix: str) -> List[int]:
    depth = mlp_depth(params, prefix)
    widths = [params[f"{prefix}.0.weight"].shape[0]]
    widths += [params[f"{prefix}.{i}.weight"].shape[1] for i in range(depth)]
    return widths


def mlp_forward(
    params: ParamSet,
    prefix: str,
    x: Tensor,
    activation: str = "tanh",
    final_activation: str = None,
) -> Tensor:
    """Affine layers with the activation between them; the last layer is linear unless told otherwise"""
    act = ACTIVATIONS[activation]
    depth = mlp_depth(params, prefix)
    h = x
    for i in range(depth):
        h = ops.affine(h, params[f"{prefix}.{i}.weight"], params[f"{prefix}.{i}.bias"])
        if i < depth - 1:
            h = act(h)
        elif final_activation is not None:
            h = ACTIVATIONS[final_activation](h)
    return h

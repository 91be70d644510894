"""
Parameter Sets and Adam
Named trainable tensors with their moment state and the update rule
"""

import logging
from collections import OrderedDict
from contextlib import contextmanager
from typing import Dict, Iterator, List, Mapping, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from .errors import MissingGradShape
from .tensor import DTYPE, GradientMap, Tensor

logger = logging.getLogger(__name__)


class AdamConfig(BaseModel):
    """Adam hyper-parameters"""

    lr: float = Field(default=1e-3, gt=0)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    eps: float = Field(default=1e-8, gt=0)


class ParamSet:
    """Ordered map of named parameters plus first/second moment state"""

    def __init__(self):
        self._params: "OrderedDict[str, Tensor]" = OrderedDict()
        self.first_moments: Dict[str, np.ndarray] = {}
        self.second_moments: Dict[str, np.ndarray] = {}
        self.step_count = 0

    def add(self, name: str, value: np.ndarray) -> Tensor:
        tensor = Tensor(value, requires_grad=True)
        self._params[name] = tensor
        self.first_moments[name] = np.zeros_like(tensor.data)
        self.second_moments[name] = np.zeros_like(tensor.data)
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> List[str]:
        return list(self._params)

    def items(self) -> List[Tuple[str, Tensor]]:
        return list(self._params.items())

    def num_values(self) -> int:
        return sum(t.size for t in self._params.values())

    def to_arrays(self) -> Dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._params.items()}

    def load_arrays(self, arrays: Mapping[str, np.ndarray]) -> None:
        """Replace parameter values; moments are reset"""
        for name, value in arrays.items():
            if name in self._params and self._params[name].shape != np.shape(value):
                raise MissingGradShape(f"{name}: stored {np.shape(value)} vs expected {self._params[name].shape}")
            self.add(name, np.asarray(value, dtype=DTYPE))
        self.step_count = 0

    def requires_grad_(self, flag: bool) -> None:
        for tensor in self._params.values():
            tensor.requires_grad = flag


@contextmanager
def frozen(params: ParamSet) -> Iterator[ParamSet]:
    """Treat the parameters as constants inside the block"""
    previous = {name: t.requires_grad for name, t in params.items()}
    params.requires_grad_(False)
    try:
        yield params
    finally:
        for name, t in params.items():
            t.requires_grad = previous[name]


def optimizer_step(
    params: ParamSet,
    grads: Union[GradientMap, Mapping[str, np.ndarray]],
    config: AdamConfig,
) -> ParamSet:
    """One bias-corrected Adam step over every parameter that has a gradient"""
    if isinstance(grads, GradientMap):
        named = grads.named(dict(params.items()))
    else:
        named = dict(grads)

    params.step_count += 1
    step = params.step_count
    correction1 = 1.0 - config.beta1 ** step
    correction2 = 1.0 - config.beta2 ** step

    for name, param in params.items():
        grad = named.get(name)
        if grad is None:
            continue
        grad = np.asarray(grad, dtype=DTYPE)
        if grad.shape != param.shape:
            raise MissingGradShape(f"{name}: gradient {grad.shape} vs parameter {param.shape}")
        m = config.beta1 * params.first_moments[name] + (1.0 - config.beta1) * grad
        v = config.beta2 * params.second_moments[name] + (1.0 - config.beta2) * grad * grad
        params.first_moments[name] = m
        params.second_moments[name] = v
        param.data = param.data - config.lr * (m / correction1) / (np.sqrt(v / correction2) + config.eps)

    return params

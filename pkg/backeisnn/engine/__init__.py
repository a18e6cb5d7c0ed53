"""Array kernels and the reverse-mode differentiation engine."""

from backeisnn.engine.autograd import Variable, backward, constant, no_grad, parameter
from backeisnn.engine.functional import SpikeFnConfig
from backeisnn.engine.kernels import Conv2dGeometry

__all__ = [
    "Conv2dGeometry",
    "SpikeFnConfig",
    "Variable",
    "backward",
    "constant",
    "no_grad",
    "parameter",
]

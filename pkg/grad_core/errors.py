"""
Lab Errors
Exception hierarchy shared by every package, with stable CLI exit codes
"""


class LabError(Exception):
    """Base class for every failure the lab reports"""

    exit_code = 1


class ConfigError(LabError, ValueError):
    """Invalid configuration or command-line input"""

    exit_code = 2


class TrainingFailure(LabError):
    """A training run could not complete"""

    exit_code = 3


class SteeringFailure(LabError):
    """A steering run aborted"""

    exit_code = 4


class MissingArtifact(LabError, FileNotFoundError):
    """A checkpoint, manifest or run directory is not on disk"""

    exit_code = 5


class ShapeMismatch(LabError, ValueError):
    """Operand shapes are incompatible for the requested op"""


class NonFinite(TrainingFailure, ArithmeticError):
    """A forward op produced NaN or Inf"""


class NotScalarRoot(LabError, ValueError):
    """backward() was called on a tensor with more than one element"""


class DetachedRoot(LabError, ValueError):
    """backward() root was not recorded on the given tape"""


class MissingGradShape(LabError, ValueError):
    """Gradient and parameter shapes differ"""


class UnsupportedOp(LabError, ValueError):
    """Unknown op kind requested from op_forward"""


class CorruptFile(MissingArtifact, ValueError):
    """A tensor or checkpoint file exists but cannot be parsed"""

"""
Generator Errors
"""

from grad_core.errors import LabError


class StepOutOfRange(LabError, ValueError):
    """Diffusion step index outside [0, T)"""


class StepOrderInvalid(LabError, ValueError):
    """DDIM step must move to an earlier index"""


class TOutOfRange(LabError, ValueError):
    """Flow time outside [0, 1]"""

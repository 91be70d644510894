"""
Shape World Errors
"""

from grad_core.errors import ConfigError, LabError, MissingArtifact


class ConfigInvalid(ConfigError):
    """Dataset configuration violates its constraints"""


class DegenerateShape(LabError, ValueError):
    """Rendered mask covers too little or too much of the image"""

    def __init__(self, message: str, area: float):
        super().__init__(message)
        self.area = area


class InsufficientVariety(ConfigError):
    """A split cannot produce a valid triplet"""


class EmptySplit(ConfigError):
    """The requested split holds no images"""


class MalformedRow(ConfigError):
    """A triplet CSV row does not have exactly three fields"""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class MissingImage(MissingArtifact):
    """A triplet CSV references an image that is not on disk"""

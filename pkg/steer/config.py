"""
Guidance Configuration
Guidance scale, clamp bounds and the step schedules that gate guidance
"""

import logging
import re
from typing import Literal, Optional

from pydantic import BaseModel, Field, model_validator

from grad_core.errors import ConfigError, SteeringFailure

logger = logging.getLogger(__name__)


class GuidanceConfigInvalid(ConfigError):
    """Guidance parameters are inconsistent with the sampler"""


class SteeringDiverged(SteeringFailure):
    """A guided run hit NaN/Inf; the partial trajectory is attached"""

    def __init__(self, message: str, trajectory=None):
        super().__init__(message)
        self.trajectory = list(trajectory or [])


class GuidanceSchedule(BaseModel):
    """Which elapsed sampler steps (counted from 0) receive guidance"""

    kind: Literal["continuous", "stop_after", "window"] = "continuous"
    k: Optional[int] = Field(default=None, ge=0)
    start: Optional[int] = Field(default=None, ge=0)
    stop: Optional[int] = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _fields_for_kind(self) -> "GuidanceSchedule":
        if self.kind == "stop_after" and self.k is None:
            raise ValueError("stop_after schedule needs k")
        if self.kind == "window":
            if self.start is None or self.stop is None:
                raise ValueError("window schedule needs start and stop")
            if self.start > self.stop:
                raise ValueError(f"window start {self.start} is after stop {self.stop}")
        return self

    @classmethod
    def continuous(cls) -> "GuidanceSchedule":
        return cls(kind="continuous")

    @classmethod
    def stop_after(cls, k: int) -> "GuidanceSchedule":
        return cls(kind="stop_after", k=k)

    @classmethod
    def window(cls, start: int, stop: int) -> "GuidanceSchedule":
        return cls(kind="window", start=start, stop=stop)

    @classmethod
    def parse(cls, text: str) -> "GuidanceSchedule":
        """'continuous', 'stop_after:20' or 'window:10:30'"""
        text = text.strip()
        if text == "continuous":
            return cls.continuous()
        match = re.fullmatch(r"stop_after:(\d+)", text)
        if match:
            return cls.stop_after(int(match.group(1)))
        match = re.fullmatch(r"window:(\d+):(\d+)", text)
        if match:
            try:
                return cls.window(int(match.group(1)), int(match.group(2)))
            except ValueError as e:
                raise GuidanceConfigInvalid(str(e)) from e
        raise GuidanceConfigInvalid(f"unrecognized schedule: {text!r}")

    def admits(self, elapsed: int) -> bool:
        if self.kind == "continuous":
            return True
        if self.kind == "stop_after":
            return elapsed < self.k
        return self.start <= elapsed < self.stop

    def guided_count(self, num_steps: int) -> int:
        return sum(self.admits(i) for i in range(num_steps))

    def label(self) -> str:
        if self.kind == "continuous":
            return "continuous"
        if self.kind == "stop_after":
            return f"stop_after:{self.k}"
        return f"window:{self.start}:{self.stop}"


def apply_schedule(schedule: GuidanceSchedule, t: int) -> bool:
    """True when guidance fires at elapsed step t"""
    return schedule.admits(t)


class GuidanceConfig(BaseModel):
    alpha: float = Field(default=2.5, ge=0.0)
    clamp_lo: float = -5.0
    clamp_hi: float = 5.0
    schedule: GuidanceSchedule = Field(default_factory=GuidanceSchedule)
    target: str = "auto"
    raw_gradient: bool = False

    @model_validator(mode="after")
    def _clamp_order(self) -> "GuidanceConfig":
        if not self.clamp_lo < self.clamp_hi:
            raise ValueError(f"clamp_lo={self.clamp_lo} must be below clamp_hi={self.clamp_hi}")
        return self

    def check_steps(self, num_steps: int) -> None:
        """Schedule bounds must fall within [0, T]"""
        s = self.schedule
        bounds = [b for b in (s.k, s.start, s.stop) if b is not None]
        if any(b > num_steps for b in bounds):
            raise GuidanceConfigInvalid(f"schedule {s.label()} reaches past a {num_steps}-step run")

"""
Noise Schedule
Linear beta schedule, forward diffusion and the deterministic DDIM update
"""

import logging
from typing import Sequence

import numpy as np

from .errors import StepOrderInvalid, StepOutOfRange

logger = logging.getLogger(__name__)

DEFAULT_STEPS = 50
BETA_START = 1e-4
BETA_END = 0.2


class NoiseSchedule:
    """betas[t] for t in [0, T); alpha_bar(-1) is the clean end with value 1"""

    def __init__(self, betas: Sequence[float]):
        betas = np.asarray(betas, dtype=np.float64)
        if betas.ndim != 1 or len(betas) == 0:
            raise StepOutOfRange("schedule needs at least one beta")
        if np.any(betas <= 0) or np.any(betas >= 1):
            raise StepOutOfRange("every beta must lie in (0, 1)")
        self.betas = betas
        self.alphas = 1.0 - betas
        self.alpha_bars = np.cumprod(self.alphas)

    @classmethod
    def linear(cls, num_steps: int = DEFAULT_STEPS, beta_start: float = BETA_START, beta_end: float = BETA_END) -> "NoiseSchedule":
        return cls(np.linspace(beta_start, beta_end, num_steps))

    @property
    def num_steps(self) -> int:
        return len(self.betas)

    def alpha_bar(self, t: int) -> float:
        if t == -1:
            return 1.0
        if not 0 <= t < self.num_steps:
            raise StepOutOfRange(f"step {t} outside [0, {self.num_steps})")
        return float(self.alpha_bars[t])


def q_sample(x0: np.ndarray, noise: np.ndarray, alpha_bar: float) -> np.ndarray:
    return np.sqrt(alpha_bar) * x0 + np.sqrt(1.0 - alpha_bar) * noise


def forward_diffuse(x0: np.ndarray, t: int, noise: np.ndarray, schedule: NoiseSchedule) -> np.ndarray:
    """z_t = sqrt(ab_t) x0 + sqrt(1 - ab_t) noise"""
    if not 0 <= t < schedule.num_steps:
        raise StepOutOfRange(f"step {t} outside [0, {schedule.num_steps})")
    return q_sample(x0, noise, schedule.alpha_bar(t))


def predict_x0(z_t: np.ndarray, eps_pred: np.ndarray, alpha_bar: float) -> np.ndarray:
    return (z_t - np.sqrt(1.0 - alpha_bar) * eps_pred) / np.sqrt(alpha_bar)


def ddim_update(z_t: np.ndarray, eps_pred: np.ndarray, alpha_bar_t: float, alpha_bar_prev: float) -> np.ndarray:
    x0_hat = predict_x0(z_t, eps_pred, alpha_bar_t)
    if alpha_bar_prev == 1.0:
        return x0_hat
    return np.sqrt(alpha_bar_prev) * x0_hat + np.sqrt(1.0 - alpha_bar_prev) * eps_pred


def ddim_step(
    z_t: np.ndarray,
    eps_pred: np.ndarray,
    t: int,
    t_prev: int,
    schedule: NoiseSchedule,
) -> np.ndarray:
    """Deterministic (eta = 0) DDIM move from step t to t_prev; t_prev = -1 lands on x0_hat"""
    if not 0 <= t < schedule.num_steps:
        raise StepOutOfRange(f"step {t} outside [0, {schedule.num_steps})")
    if not -1 <= t_prev < t:
        raise StepOrderInvalid(f"t_prev={t_prev} must satisfy -1 <= t_prev < t={t}")
    return ddim_update(z_t, eps_pred, schedule.alpha_bar(t), schedule.alpha_bar(t_prev))


def timesteps(schedule: NoiseSchedule) -> np.ndarray:
    """Descending step indices T-1 .. 0"""
    return np.arange(schedule.num_steps - 1, -1, -1)

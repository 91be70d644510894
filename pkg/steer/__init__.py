"""
Steer Module
Teacher-guided latent steering for DDIM and flow-matching samplers
"""

from .config import GuidanceConfig, GuidanceConfigInvalid, GuidanceSchedule, SteeringDiverged, apply_schedule
from .guidance import GRAD_EPS, clamp_latent, guidance_gradient, guidance_loss, guided_update, normalized_direction
from .samplers import GuidedRun, guided_ddim_sample, guided_flow_sample, select_conflicting_target
from .trajectory import TRAJECTORY_COLUMNS, SteerResult, TrajectorySample, trajectory_frame

__all__ = [
    'GuidanceConfig',
    'GuidanceSchedule',
    'GuidanceConfigInvalid',
    'SteeringDiverged',
    'apply_schedule',
    'GRAD_EPS',
    'guidance_loss',
    'guidance_gradient',
    'normalized_direction',
    'guided_update',
    'clamp_latent',
    'GuidedRun',
    'guided_ddim_sample',
    'guided_flow_sample',
    'select_conflicting_target',
    'TrajectorySample',
    'SteerResult',
    'TRAJECTORY_COLUMNS',
    'trajectory_frame',
]

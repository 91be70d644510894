"""
Generator Models Module
Toy DDIM denoiser, flow-matching velocity field and the latent decoder
"""

from .decoder import AutoencoderConfig, Decoder, reconstruction_mse, train_autoencoder
from .diffusion import GeneratorTrainConfig, ddim_sample, fit_generator, initial_noise, train_denoiser
from .errors import StepOrderInvalid, StepOutOfRange, TOutOfRange
from .flow import euler_sample, euler_step, flow_pair, train_velocity
from .networks import DenoiserNet, TimeConditionedMLP, VelocityNet, timestep_embedding
from .schedule import NoiseSchedule, ddim_step, ddim_update, forward_diffuse, predict_x0, q_sample, timesteps

__all__ = [
    'NoiseSchedule',
    'q_sample',
    'forward_diffuse',
    'predict_x0',
    'ddim_update',
    'ddim_step',
    'timesteps',
    'DenoiserNet',
    'VelocityNet',
    'TimeConditionedMLP',
    'timestep_embedding',
    'Decoder',
    'AutoencoderConfig',
    'train_autoencoder',
    'reconstruction_mse',
    'GeneratorTrainConfig',
    'initial_noise',
    'fit_generator',
    'train_denoiser',
    'ddim_sample',
    'flow_pair',
    'euler_step',
    'train_velocity',
    'euler_sample',
    'StepOutOfRange',
    'StepOrderInvalid',
    'TOutOfRange',
]

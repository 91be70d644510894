"""
Guided Samplers
Guidance injected before each DDIM predictor step or as an extra Euler velocity
"""

import logging
from typing import Dict, Hashable, List, Optional, Tuple

import numpy as np

from gen_models.decoder import Decoder
from gen_models.diffusion import initial_noise
from gen_models.flow import euler_step
from gen_models.schedule import NoiseSchedule, ddim_step, timesteps
from grad_core.errors import NonFinite
from hpe_teacher.embedding_net import EmbeddingNet
from hpe_teacher.evaluation import hpe_distance

from .config import GuidanceConfig, SteeringDiverged
from .guidance import clamp_latent, guidance_gradient, guided_update, normalized_direction
from .trajectory import SteerResult, TrajectorySample

logger = logging.getLogger(__name__)


class GuidedRun:
    """State shared by both guided samplers for one (seed, config) run"""

    def __init__(
        self,
        teacher: EmbeddingNet,
        decoder: Decoder,
        guidance: GuidanceConfig,
        target_image: np.ndarray,
        seed: int,
        paradigm: str,
        target_ref: Optional[str] = None,
    ):
        self.teacher = teacher
        self.decoder = decoder
        self.guidance = guidance
        self.target_image = np.asarray(target_image, dtype=np.float64)
        self.target_embedding = teacher.embed_batch(self.target_image.reshape(1, -1))[0]
        self.seed = seed
        self.paradigm = paradigm
        self.target_ref = target_ref
        self.trajectory: List[TrajectorySample] = []
        logger.debug(f"🧭 {paradigm} run initialized: seed={seed} alpha={guidance.alpha} schedule={guidance.schedule.label()}")

    def gradient(self, z: np.ndarray, sample: TrajectorySample) -> np.ndarray:
        loss, grad = guidance_gradient(z, self.target_embedding, self.teacher, self.decoder)
        sample.loss = loss
        sample.grad_norm = float(np.linalg.norm(grad))
        return grad

    def check_finite(self, z: np.ndarray, step: int) -> None:
        if not np.all(np.isfinite(z)):
            raise SteeringDiverged(f"{self.paradigm} latent became non-finite at step {step}", self.trajectory)

    def finish(self, z: np.ndarray) -> SteerResult:
        image = self.decoder.decode_image(z)
        lo, hi = self.guidance.clamp_lo, self.guidance.clamp_hi
        saturation = float(np.mean((z <= lo) | (z >= hi)))
        result = SteerResult(
            paradigm=self.paradigm,
            seed=self.seed,
            config=self.guidance,
            final_latent=z,
            final_image=image,
            final_hpe_distance=hpe_distance(self.teacher, image, self.target_image),
            trajectory=self.trajectory,
            saturation=saturation,
            target_ref=self.target_ref,
        )
        logger.info(
            f"🧭 {self.paradigm} seed={self.seed} alpha={self.guidance.alpha}: "
            f"hpe={result.final_hpe_distance:.4f}, guided {result.guided_steps} steps"
        )
        return result


def guided_ddim_sample(
    denoiser,
    teacher: EmbeddingNet,
    decoder: Decoder,
    schedule: NoiseSchedule,
    guidance: GuidanceConfig,
    seed: int,
    target_image: np.ndarray,
    target_ref: Optional[str] = None,
) -> SteerResult:
    """Per step: guide, clamp, then the DDIM predictor step toward t - 1"""
    guidance.check_steps(schedule.num_steps)
    run = GuidedRun(teacher, decoder, guidance, target_image, seed, "ddim", target_ref)
    z = initial_noise(seed, decoder.latent_dim)
    try:
        for elapsed, t in enumerate(timesteps(schedule)):
            t = int(t)
            sample = TrajectorySample(step=elapsed)
            run.trajectory.append(sample)
            if guidance.schedule.admits(elapsed):
                grad = run.gradient(z, sample)
                moved, sample.applied = guided_update(z, grad, guidance.alpha)
                sample.update_norm = float(np.linalg.norm(moved - z))
                if sample.applied and guidance.alpha > 0:
                    moved = clamp_latent(moved, guidance.clamp_lo, guidance.clamp_hi)
                z = moved
            sample.record_latent(z)
            z = ddim_step(z, denoiser.predict(z, t), t, t - 1, schedule)
            run.check_finite(z, elapsed)
    except NonFinite as e:
        logger.error(f"❌ DDIM steering diverged: {e}")
        raise SteeringDiverged(str(e), run.trajectory) from e
    return run.finish(z)


def guided_flow_sample(
    velocity_net,
    teacher: EmbeddingNet,
    decoder: Decoder,
    guidance: GuidanceConfig,
    seed: int,
    target_image: np.ndarray,
    num_steps: int = 50,
    target_ref: Optional[str] = None,
) -> SteerResult:
    """Euler integration of v - alpha * g_hat, clamping after each guided step"""
    guidance.check_steps(num_steps)
    run = GuidedRun(teacher, decoder, guidance, target_image, seed, "flow", target_ref)
    dt = 1.0 / num_steps
    z = initial_noise(seed, decoder.latent_dim)
    try:
        for k in range(num_steps):
            sample = TrajectorySample(step=k)
            run.trajectory.append(sample)
            v = velocity_net.predict(z, k * dt)
            if guidance.schedule.admits(k):
                grad = run.gradient(z, sample)
                direction, _, sample.applied = normalized_direction(grad)
                if guidance.raw_gradient and sample.applied:
                    direction = grad
                steered = v - guidance.alpha * direction
                stepped = euler_step(z, steered, dt)
                sample.update_norm = float(np.linalg.norm(stepped - euler_step(z, v, dt)))
                if sample.applied and guidance.alpha > 0:
                    stepped = clamp_latent(stepped, guidance.clamp_lo, guidance.clamp_hi)
                z = stepped
            else:
                z = euler_step(z, v, dt)
            sample.record_latent(z)
            run.check_finite(z, k)
    except NonFinite as e:
        logger.error(f"❌ Flow steering diverged: {e}")
        raise SteeringDiverged(str(e), run.trajectory) from e
    return run.finish(z)


def select_conflicting_target(
    teacher: EmbeddingNet,
    reference_image: np.ndarray,
    candidates: Dict[Hashable, np.ndarray],
) -> Tuple[Hashable, float]:
    """Candidate farthest from the reference in teacher space"""
    refs = sorted(candidates, key=str)
    embeddings = teacher.embed_batch(np.stack([np.asarray(candidates[r]).reshape(-1) for r in refs]))
    anchor = teacher.embed_batch(np.asarray(reference_image).reshape(1, -1))[0]
    distances = np.sum((embeddings - anchor) ** 2, axis=1)
    best = int(np.argmax(distances))
    return refs[best], float(distances[best])

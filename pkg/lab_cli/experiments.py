"""
Experiment Engine
Loads trained models from a run directory and runs steering, sweeps and the healing comparison
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from gen_models.decoder import Decoder
from gen_models.diffusion import ddim_sample
from gen_models.flow import euler_sample
from gen_models.networks import DenoiserNet, VelocityNet
from gen_models.schedule import NoiseSchedule
from grad_core.errors import ConfigError, LabError, NonFinite
from grad_core.serialization import load_params
from hpe_teacher.embedding_net import EmbeddingNet
from shapeworld.dataset_builder import ShapeWorld, load_shapeworld
from shapeworld.triplet_loader import load_image_file
from steer.config import GuidanceConfig, GuidanceSchedule, SteeringDiverged
from steer.samplers import guided_ddim_sample, guided_flow_sample, select_conflicting_target
from steer.trajectory import SteerResult

from .artifacts import RunLayout
from .config import ExperimentConfig

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = [
    "value", "seed", "final_hpe_distance", "control_hpe_distance",
    "gain", "pixel_mse", "saturation", "guided_steps", "status",
]
HEALING_COLUMNS = ["paradigm", "protocol", "seed", "final_hpe_distance"]


@dataclass
class LabModels:
    world: ShapeWorld
    teacher: EmbeddingNet
    decoder: Decoder
    schedule: NoiseSchedule
    denoiser: Optional[DenoiserNet] = None
    velocity: Optional[VelocityNet] = None

    @property
    def num_steps(self) -> int:
        return self.schedule.num_steps

    def generator(self, paradigm: str):
        net = self.denoiser if paradigm == "ddim" else self.velocity
        if net is None:
            raise ConfigError(f"no {paradigm} generator loaded")
        return net


def load_decoder(layout: RunLayout, config: ExperimentConfig) -> Decoder:
    if config.generator.decoder_mode == "identity":
        return Decoder.identity()
    return Decoder("tiny_autoencoder", load_params(layout.checkpoint("decoder")))


def load_lab_models(layout: RunLayout, config: ExperimentConfig, paradigms=("ddim",)) -> LabModels:
    """World, teacher, decoder and the generators named in paradigms"""
    logger.info(f"📥 Loading models from {layout.root} for {', '.join(paradigms)}")
    world = load_shapeworld(layout.data_dir)
    teacher = EmbeddingNet.from_params(load_params(layout.checkpoint("teacher")))
    schedule = config.generator.schedule()
    models = LabModels(world, teacher, load_decoder(layout, config), schedule)
    if "ddim" in paradigms:
        models.denoiser = DenoiserNet.from_params(load_params(layout.checkpoint("denoiser")), schedule.num_steps)
    if "flow" in paradigms:
        models.velocity = VelocityNet.from_params(load_params(layout.checkpoint("velocity")))
    return models


def unguided_latent(models: LabModels, paradigm: str, seed: int) -> np.ndarray:
    net = models.generator(paradigm)
    if paradigm == "ddim":
        return ddim_sample(net, models.schedule, seed, models.decoder.latent_dim)
    return euler_sample(net, models.num_steps, seed, models.decoder.latent_dim)


def resolve_target(models: LabModels, guidance: GuidanceConfig, paradigm: str, seed: int) -> Tuple[str, np.ndarray]:
    """'auto' picks the validation image farthest from the unguided sample; digits name a dataset id; anything else is an image path"""
    target = guidance.target
    world = models.world
    if target == "auto":
        try:
            unguided = models.decoder.decode_image(unguided_latent(models, paradigm, seed))
        except NonFinite as e:
            raise SteeringDiverged(f"unguided {paradigm} sample diverged: {e}") from e
        ids = world.ids("val") or world.ids("train")
        ref, _ = select_conflicting_target(models.teacher, unguided, {i: world.images[i] for i in ids})
        return f"image:{ref}", world.images[ref]
    if target.isdigit():
        image_id = int(target)
        if image_id not in world.images:
            raise ConfigError(f"target image {image_id} is not in the dataset")
        return f"image:{image_id}", world.images[image_id]
    return target, load_image_file(Path(target))


def run_guided(
    models: LabModels,
    paradigm: str,
    guidance: GuidanceConfig,
    seed: int,
    target_ref: str,
    target_image: np.ndarray,
) -> SteerResult:
    if paradigm == "ddim":
        return guided_ddim_sample(
            models.generator("ddim"), models.teacher, models.decoder, models.schedule,
            guidance, seed, target_image, target_ref,
        )
    return guided_flow_sample(
        models.generator("flow"), models.teacher, models.decoder,
        guidance, seed, target_image, models.num_steps, target_ref,
    )


@dataclass
class ControlledRun:
    guided: SteerResult
    control: SteerResult
    gain: float
    pixel_mse: float

    def summary(self) -> Dict[str, Any]:
        summary = self.guided.summary()
        summary.update({
            "control_hpe_distance": self.control.final_hpe_distance,
            "gain": self.gain,
            "pixel_mse": self.pixel_mse,
        })
        return summary


def steer_with_control(models: LabModels, paradigm: str, guidance: GuidanceConfig, seed: int) -> ControlledRun:
    """Guided run plus its alpha=0 twin on the same seed, target and schedule"""
    target_ref, target_image = resolve_target(models, guidance, paradigm, seed)
    control_config = guidance.model_copy(update={"alpha": 0.0})
    control = run_guided(models, paradigm, control_config, seed, target_ref, target_image)
    if guidance.alpha == 0:
        guided = control
    else:
        guided = run_guided(models, paradigm, guidance, seed, target_ref, target_image)
    base = control.final_hpe_distance
    gain = (base - guided.final_hpe_distance) / base if base > 0 else 0.0
    pixel_mse = float(np.mean((guided.final_image - control.final_image) ** 2))
    logger.info(f"📈 {paradigm} seed={seed}: control={base:.4f} guided={guided.final_hpe_distance:.4f} gain={gain:+.3f}")
    return ControlledRun(guided, control, gain, pixel_mse)


def sweep_guidance(base: GuidanceConfig, parameter: str, value: float) -> GuidanceConfig:
    if parameter == "alpha":
        return base.model_copy(update={"alpha": float(value)})
    return base.model_copy(update={"schedule": GuidanceSchedule.stop_after(int(round(value)))})


def failed_sweep_row(value: float, seed: int, status: str) -> Dict[str, Any]:
    row = {c: math.nan for c in SWEEP_COLUMNS}
    row.update({"value": float(value), "seed": seed, "status": status})
    return row


def evaluate_sweep_point(models: LabModels, config: ExperimentConfig, paradigm: str, parameter: str, value: float, seed: int) -> Dict[str, Any]:
    """One (value, seed) cell; library failures become a NaN row instead of aborting the sweep"""
    guidance = sweep_guidance(config.guidance, parameter, value)
    try:
        guidance.check_steps(models.num_steps)
        run = steer_with_control(models, paradigm, guidance, seed)
    except LabError as e:
        logger.warning(f"⚠️ sweep point {parameter}={value} seed={seed} failed: {e}")
        return failed_sweep_row(value, seed, type(e).__name__)
    return {
        "value": float(value),
        "seed": seed,
        "final_hpe_distance": run.guided.final_hpe_distance,
        "control_hpe_distance": run.control.final_hpe_distance,
        "gain": run.gain,
        "pixel_mse": run.pixel_mse,
        "saturation": run.guided.saturation,
        "guided_steps": run.guided.guided_steps,
        "status": "ok",
    }


def healing_protocols(num_steps: int, stop_fractions: List[float]) -> List[Tuple[str, GuidanceSchedule]]:
    """stop_after at each fraction of T, stop_after(T), then continuous"""
    protocols = []
    for fraction in stop_fractions:
        k = int(round(fraction * num_steps))
        protocols.append((f"stop_after:{k}", GuidanceSchedule.stop_after(k)))
    protocols.append((f"stop_after:{num_steps}", GuidanceSchedule.stop_after(num_steps)))
    protocols.append(("continuous", GuidanceSchedule.continuous()))
    seen, unique = set(), []
    for label, schedule in protocols:
        if label not in seen:
            seen.add(label)
            unique.append((label, schedule))
    return unique


def evaluate_healing_seed(models: LabModels, config: ExperimentConfig, paradigm: str, seed: int) -> List[Dict[str, Any]]:
    """Every protocol for one seed, sharing the seed's auto target"""
    rows = []
    try:
        target_ref, target_image = resolve_target(models, config.guidance, paradigm, seed)
    except LabError as e:
        logger.warning(f"⚠️ healing {paradigm} seed={seed}: no target ({e})")
        return [
            {"paradigm": paradigm, "protocol": label, "seed": seed, "final_hpe_distance": math.nan}
            for label, _ in healing_protocols(models.num_steps, config.healing.stop_fractions)
        ]
    for label, schedule in healing_protocols(models.num_steps, config.healing.stop_fractions):
        guidance = config.guidance.model_copy(update={"schedule": schedule})
        try:
            distance = run_guided(models, paradigm, guidance, seed, target_ref, target_image).final_hpe_distance
        except LabError as e:
            logger.warning(f"⚠️ healing {paradigm} {label} seed={seed} failed: {e}")
            distance = math.nan
        rows.append({"paradigm": paradigm, "protocol": label, "seed": seed, "final_hpe_distance": distance})
    return rows


# worker-process model cache keyed by (run dir, config hash, paradigms)
_MODEL_CACHE: Dict[Tuple[str, str, Tuple[str, ...]], LabModels] = {}


def _worker_models(root: str, config_json: str, paradigms: Tuple[str, ...]) -> Tuple[LabModels, ExperimentConfig]:
    config = ExperimentConfig.model_validate_json(config_json)
    key = (root, config.config_hash(), paradigms)
    if key not in _MODEL_CACHE:
        _MODEL_CACHE[key] = load_lab_models(RunLayout(root), config, paradigms)
    return _MODEL_CACHE[key], config


def _sweep_task(task: Tuple[str, str, str, str, float, int]) -> Dict[str, Any]:
    root, config_json, paradigm, parameter, value, seed = task
    models, config = _worker_models(root, config_json, (paradigm,))
    return evaluate_sweep_point(models, config, paradigm, parameter, value, seed)


def _healing_task(task: Tuple[str, str, str, int]) -> List[Dict[str, Any]]:
    root, config_json, paradigm, seed = task
    models, config = _worker_models(root, config_json, (paradigm,))
    return evaluate_healing_seed(models, config, paradigm, seed)


def run_seeds(config: ExperimentConfig, count: int) -> List[int]:
    return [config.seed + i for i in range(count)]


def run_sweep(layout: RunLayout, config: ExperimentConfig, workers: int = 1, models: Optional[LabModels] = None) -> List[Dict[str, Any]]:
    """Rows ordered by (value, seed) whatever the worker count"""
    spec = config.sweep
    seeds = run_seeds(config, spec.seeds)
    points = [(float(v), s) for v in spec.values for s in seeds]
    logger.info(f"📈 Sweeping {spec.parameter} over {spec.values} x {len(seeds)} seeds ({spec.paradigm}, {workers} workers)")
    if workers <= 1:
        models = models or load_lab_models(layout, config, (spec.paradigm,))
        rows = [evaluate_sweep_point(models, config, spec.paradigm, spec.parameter, v, s) for v, s in points]
    else:
        payload = config.model_dump_json()
        tasks = [(str(layout.root), payload, spec.paradigm, spec.parameter, v, s) for v, s in points]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_task, tasks))
    return sorted(rows, key=lambda r: (r["value"], r["seed"]))


def run_healing(layout: RunLayout, config: ExperimentConfig, workers: int = 1, models: Optional[LabModels] = None) -> List[Dict[str, Any]]:
    spec = config.healing
    seeds = run_seeds(config, spec.seeds)
    logger.info(f"📈 Healing comparison on {spec.paradigms} over {len(seeds)} seeds ({workers} workers)")
    rows: List[Dict[str, Any]] = []
    if workers <= 1:
        models = models or load_lab_models(layout, config, tuple(spec.paradigms))
        for paradigm in spec.paradigms:
            for seed in seeds:
                rows.extend(evaluate_healing_seed(models, config, paradigm, seed))
    else:
        payload = config.model_dump_json()
        tasks = [(str(layout.root), payload, p, s) for p in spec.paradigms for s in seeds]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for chunk in pool.map(_healing_task, tasks):
                rows.extend(chunk)
    return rows

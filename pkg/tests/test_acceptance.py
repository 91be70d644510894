"""
Experiment-scale checks
Full-size training and steering runs; enable with --run-slow
"""

import json

import numpy as np
import pytest

from gen_models import Decoder, GeneratorTrainConfig, ddim_sample, euler_sample, train_denoiser, train_velocity
from grad_core.rng import make_rng
from hpe_teacher import EmbeddingNet, chance_triplets, odd_one_out_accuracy, triplet_loss
from lab_cli import ExperimentConfig, RunLayout, load_lab_models, main, run_healing, run_sweep
from lab_cli.config import HealingConfig, SweepSpec
from steer import GuidanceConfig, guided_ddim_sample, guided_flow_sample

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def lab(tmp_path_factory):
    run_dir = tmp_path_factory.mktemp("acceptance") / "run"
    base = ["--output-dir", str(run_dir)]
    for command in (["gen-data"], ["train-teacher"], ["train-baseline"],
                    ["train-gen", "--paradigm", "ddim"], ["train-gen", "--paradigm", "flow"]):
        assert main([*command, *base]) == 0
    layout = RunLayout(run_dir)
    config = ExperimentConfig(output_dir=str(run_dir))
    return layout, config, load_lab_models(layout, config, ("ddim", "flow"))


def test_triplet_loss_worked_cases():
    assert triplet_loss(np.array([0.0]), np.array([0.1]), np.array([1.0]), margin=0.2).item() == 0.0
    assert triplet_loss(np.array([0.0]), np.array([0.5]), np.array([0.4]), margin=0.2).item() == pytest.approx(0.3, abs=1e-12)
    assert triplet_loss(np.array([0.0]), np.array([0.5]), np.array([-0.5]), margin=0.2).item() == pytest.approx(0.2, abs=1e-12)


def test_triplet_loss_is_nonnegative_with_expected_zero_set():
    rng = make_rng(0, "loss-law")
    for _ in range(10000):
        a, p, n = (v / np.linalg.norm(v) for v in rng.standard_normal((3, 8)))
        loss = triplet_loss(a, p, n, margin=0.2).item()
        d_ap, d_an = np.linalg.norm(a - p), np.linalg.norm(a - n)
        assert loss >= 0.0
        assert (loss == 0.0) == (d_an >= d_ap + 0.2)


def test_random_net_scores_chance(lab):
    _, _, models = lab
    net = EmbeddingNet(seed=123)
    refs = sorted(models.world.images)
    triplets = chance_triplets(refs, 10000, make_rng(7, "chance"))
    assert abs(odd_one_out_accuracy(net, triplets, models.world.images) - 1 / 3) <= 0.02


def test_teacher_beats_texture_baseline(lab):
    layout, _, _ = lab
    teacher = json.loads(layout.eval_report("teacher").read_text())
    baseline = json.loads(layout.eval_report("baseline").read_text())
    assert teacher["accuracy"] - baseline["accuracy"] >= 0.15
    clusters = teacher["clusters"]
    assert clusters["different_shape"] >= clusters["same_shape"]


@pytest.mark.parametrize("alpha", [0.0, 2.5, 5.0, 10.0])
def test_update_norm_and_clamp_laws(lab, alpha):
    _, _, models = lab
    target = models.world.images[models.world.ids("val")[0]]
    guidance = GuidanceConfig(alpha=alpha)
    ddim = guided_ddim_sample(models.denoiser, models.teacher, models.decoder, models.schedule, guidance, 0, target)
    flow = guided_flow_sample(models.velocity, models.teacher, models.decoder, guidance, 0, target, num_steps=models.num_steps)
    dt = 1.0 / models.num_steps
    for result, step in ((ddim, alpha), (flow, alpha * dt)):
        for sample in result.trajectory:
            if sample.applied:
                assert sample.update_norm == pytest.approx(step, abs=1e-6)
                if alpha > 0:
                    assert -5.0 <= sample.z_min and sample.z_max <= 5.0


@pytest.mark.parametrize("paradigm", ["ddim", "flow"])
def test_guidance_cuts_distance_to_conflicting_target(lab, paradigm):
    layout, config, models = lab
    config = config.model_copy(update={"sweep": SweepSpec(values=[0.0, 2.5], seeds=5, paradigm=paradigm)})
    rows = run_sweep(layout, config, models=models)
    mean = {v: np.mean([r["final_hpe_distance"] for r in rows if r["value"] == v]) for v in (0.0, 2.5)}
    assert mean[2.5] <= 0.6 * mean[0.0]


def test_guidance_scale_has_interior_optimum(lab):
    layout, config, models = lab
    config = config.model_copy(update={"sweep": SweepSpec(values=[0.0, 2.5, 5.0, 10.0], seeds=5)})
    rows = run_sweep(layout, config, models=models)
    mean = {v: np.mean([r["final_hpe_distance"] for r in rows if r["value"] == v]) for v in (0.0, 2.5, 5.0, 10.0)}
    best = min(mean, key=mean.get)
    assert best in (2.5, 5.0)
    assert mean[10.0] > mean[best]


def test_flow_heals_when_guidance_stops_early(lab):
    layout, config, models = lab
    config = config.model_copy(update={"healing": HealingConfig(seeds=10)})
    rows = run_healing(layout, config, models=models)
    k_flow = round(0.2 * models.num_steps)
    k_ddim = round(0.6 * models.num_steps)

    def by_seed(paradigm, protocol):
        return {r["seed"]: r["final_hpe_distance"] for r in rows if r["paradigm"] == paradigm and r["protocol"] == protocol}

    early, continuous = by_seed("flow", f"stop_after:{k_flow}"), by_seed("flow", "continuous")
    assert sum(early[s] > continuous[s] for s in continuous) >= 8
    flow_gap = np.mean(list(early.values())) - np.mean(list(continuous.values()))
    ddim_gap = np.mean(list(by_seed("ddim", f"stop_after:{k_ddim}").values())) - np.mean(list(by_seed("ddim", "continuous").values()))
    assert abs(ddim_gap) < flow_gap


def test_overfit_generators_recover_their_single_image(lab):
    _, _, models = lab
    image = models.world.images[models.world.ids("train")[0]]
    decoder = Decoder.identity()
    latents = decoder.encode(image.reshape(1, -1))
    config = GeneratorTrainConfig(epochs=3000, batch_size=1, hidden=256, depth=2, lr=1e-3)
    denoiser, _ = train_denoiser(latents, config.schedule(), config)
    velocity, _ = train_velocity(latents, config)
    for latent in (
        ddim_sample(denoiser, config.schedule(), 0, latents.shape[1]),
        euler_sample(velocity, config.num_steps, 0, latents.shape[1]),
    ):
        assert np.mean((decoder.decode_image(latent) - image) ** 2) < 0.01

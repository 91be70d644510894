"""
Lab Commands
One function per subcommand; each reads and writes inside the configured run directory
"""

import logging
from argparse import Namespace
from typing import Dict

import numpy as np
import pandas as pd

from gen_models.decoder import AutoencoderConfig, Decoder, reconstruction_mse, train_autoencoder
from gen_models.diffusion import train_denoiser
from gen_models.flow import train_velocity
from grad_core.errors import ConfigError, NonFinite
from grad_core.rng import make_rng
from grad_core.serialization import load_params, save_params, save_tensor
from grad_core.training import LossCurve
from hpe_teacher.embedding_net import EmbeddingNet
from hpe_teacher.evaluation import chance_triplets, cluster_distances, evaluate_triplets, odd_one_out_accuracy
from hpe_teacher.teacher_trainer import train_teacher
from hpe_teacher.texture_baseline import train_texture_baseline
from shapeworld.dataset_builder import ShapeWorld, build_dataset, export_ppm, load_shapeworld
from shapeworld.triplet_loader import load_external_triplets
from shapeworld.triplets import export_triplets_csv
from steer.config import GuidanceSchedule, SteeringDiverged

from .artifacts import RunLayout, write_csv_frame, write_json
from .config import ExperimentConfig, revalidate, worker_count
from .experiments import (
    HEALING_COLUMNS,
    SWEEP_COLUMNS,
    load_lab_models,
    run_healing,
    run_sweep,
    steer_with_control,
)
from .plots import plot_loss_curves, plot_sweep, plot_trajectory
from .report import aggregate_sweep, build_report, healing_verdicts, sweep_outcomes

logger = logging.getLogger(__name__)


def _save_curve(layout: RunLayout, name: str, curve: LossCurve) -> None:
    frame = curve.to_frame()
    write_csv_frame(layout.curve(name), frame)
    plot_loss_curves(frame, layout.curve(name).with_suffix(".svg"), f"{name} training")


def _eval_triplets(world: ShapeWorld):
    """Validation triplets, or training triplets when the validation split is empty"""
    if world.ids("val") and world.triplets("val"):
        return world.triplets("val")
    return world.triplets("train")


def _write_eval(layout: RunLayout, name: str, net: EmbeddingNet, world: ShapeWorld) -> float:
    triplets = _eval_triplets(world)
    report = evaluate_triplets(net, triplets, world.images, world.labels())
    clusters = cluster_distances(net, world.images, world.labels())
    chance = odd_one_out_accuracy(net, chance_triplets(sorted(world.images), len(triplets), make_rng(0, "chance")), world.images)
    payload = report.model_dump(mode="json")
    payload.update({"clusters": clusters.model_dump(mode="json"), "chance_accuracy": chance})
    write_json(layout.eval_report(name), payload)
    return report.accuracy


def cmd_gen_data(config: ExperimentConfig, args: Namespace) -> int:
    layout = RunLayout(config.output_dir)
    world = build_dataset(config.dataset, layout.data_dir, export_ppm_files=bool(getattr(args, "export_ppm", False)))
    test = world.independence_test()
    write_json(layout.data_dir / "independence.json", test.model_dump(mode="json"))
    if getattr(args, "export_triplets", None):
        export_triplets_csv(_eval_triplets(world), world.image_paths(), args.export_triplets)
    print(f"images: {len(world)}  train: {len(world.ids('train'))}  val: {len(world.ids('val'))}  shape/texture independent: {test.independent}")
    return 0


def cmd_train_teacher(config: ExperimentConfig, args: Namespace) -> int:
    layout = RunLayout(config.output_dir)
    world = load_shapeworld(layout.data_dir)
    net, curve = train_teacher(world, config.teacher)
    save_params(layout.checkpoint("teacher"), net.params)
    _save_curve(layout, "teacher", curve)
    accuracy = _write_eval(layout, "teacher", net, world)
    print(f"teacher odd-one-out accuracy: {accuracy:.3f}")
    return 0


def cmd_train_baseline(config: ExperimentConfig, args: Namespace) -> int:
    layout = RunLayout(config.output_dir)
    world = load_shapeworld(layout.data_dir)
    net, curve = train_texture_baseline(world, config.baseline)
    save_params(layout.checkpoint("baseline"), net.params)
    _save_curve(layout, "baseline", curve)
    accuracy = _write_eval(layout, "baseline", net, world)
    print(f"texture baseline odd-one-out accuracy: {accuracy:.3f}")
    return 0


def cmd_evaluate(config: ExperimentConfig, args: Namespace) -> int:
    """Odd-one-out accuracy of a trained embedding on an external triplet CSV"""
    layout = RunLayout(config.output_dir)
    net = EmbeddingNet.from_params(load_params(layout.checkpoint(args.model)))
    triplets, images = load_external_triplets(args.triplets)
    report = evaluate_triplets(net, triplets, images)
    write_json(layout.root / "eval" / f"{args.model}_external_eval.json", report.model_dump(mode="json"))
    print(f"{args.model} accuracy on {report.n_triplets} external triplets: {report.accuracy:.3f}")
    return 0


def _fit_decoder(layout: RunLayout, config: ExperimentConfig, pixels: np.ndarray) -> Decoder:
    gen = config.generator
    if gen.decoder_mode == "identity":
        return Decoder.identity()
    ae_config: AutoencoderConfig = gen.autoencoder
    decoder, curve = train_autoencoder(pixels, ae_config)
    save_params(layout.checkpoint("decoder"), decoder.params)
    _save_curve(layout, "decoder", curve)
    logger.info(f"✅ Autoencoder reconstruction MSE {reconstruction_mse(decoder, pixels):.5f}")
    return decoder


def cmd_train_gen(config: ExperimentConfig, args: Namespace) -> int:
    layout = RunLayout(config.output_dir)
    paradigm = args.paradigm or config.paradigm
    world = load_shapeworld(layout.data_dir)
    pixels = world.stack(world.ids("train"))
    decoder = _fit_decoder(layout, config, pixels)
    latents = decoder.encode(pixels)
    if paradigm == "ddim":
        net, curve = train_denoiser(latents, config.generator.schedule(), config.generator)
        save_params(layout.checkpoint("denoiser"), net.params)
        _save_curve(layout, "denoiser", curve)
    else:
        net, curve = train_velocity(latents, config.generator)
        save_params(layout.checkpoint("velocity"), net.params)
        _save_curve(layout, "velocity", curve)
    print(f"{paradigm} generator final training loss: {curve.last('train_loss'):.5f}")
    return 0


def _apply_steer_flags(config: ExperimentConfig, args: Namespace) -> ExperimentConfig:
    update: Dict = {}
    if getattr(args, "alpha", None) is not None:
        update["alpha"] = args.alpha
    if getattr(args, "schedule", None):
        update["schedule"] = GuidanceSchedule.parse(args.schedule)
    if getattr(args, "target", None):
        update["target"] = args.target
    if getattr(args, "raw_gradient", False):
        update["raw_gradient"] = True
    if not update:
        return config
    guidance = revalidate(config.guidance, update)
    return config.model_copy(update={"guidance": guidance})


def cmd_steer(config: ExperimentConfig, args: Namespace) -> int:
    config = _apply_steer_flags(config, args)
    paradigm = args.paradigm or config.paradigm
    layout = RunLayout(config.output_dir)
    models = load_lab_models(layout, config, (paradigm,))
    config.guidance.check_steps(models.num_steps)
    try:
        run = steer_with_control(models, paradigm, config.guidance, config.seed)
    except NonFinite as e:
        raise SteeringDiverged(str(e)) from e

    out = layout.steer_dir(paradigm, config.seed)
    summary = run.summary()
    summary["config_hash"] = config.config_hash()
    write_json(out / "summary.json", summary)
    frame = run.guided.to_frame()
    write_csv_frame(out / "trajectory.csv", frame)
    write_csv_frame(out / "control_trajectory.csv", run.control.to_frame())
    save_tensor(out / "final.stlb", run.guided.final_image.astype(np.float32))
    export_ppm(out / "final.ppm", run.guided.final_image)
    export_ppm(out / "control.ppm", run.control.final_image)
    plot_trajectory(frame, out / "trajectory.svg", f"{paradigm} alpha={config.guidance.alpha}")
    print(
        f"final HPE distance {run.guided.final_hpe_distance:.4f} "
        f"(alpha=0 control {run.control.final_hpe_distance:.4f}, gain {run.gain:+.3f})"
    )
    return 0


def _sweep_spec_from_flags(config: ExperimentConfig, args: Namespace) -> ExperimentConfig:
    update: Dict = {}
    if getattr(args, "parameter", None):
        update["parameter"] = args.parameter
    if getattr(args, "values", None):
        try:
            update["values"] = [float(v) for v in args.values.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"--values must be comma-separated numbers, got {args.values!r}") from None
    if getattr(args, "seeds", None) is not None:
        update["seeds"] = args.seeds
    if getattr(args, "paradigm", None):
        update["paradigm"] = args.paradigm
    if not update:
        return config
    sweep = revalidate(config.sweep, update)
    return config.model_copy(update={"sweep": sweep})


def cmd_sweep(config: ExperimentConfig, args: Namespace) -> int:
    config = _sweep_spec_from_flags(config, args)
    spec = config.sweep
    layout = RunLayout(config.output_dir)
    rows = run_sweep(layout, config, worker_count())
    detail = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
    out = layout.sweep_dir(spec.paradigm, spec.parameter)
    write_csv_frame(out / "sweep_detail.csv", detail)
    write_csv_frame(out / "sweep.csv", detail[["value", "seed", "final_hpe_distance"]])

    aggregate = aggregate_sweep(detail)
    aggregate["outcome"] = sweep_outcomes(aggregate)
    write_csv_frame(out / "sweep_aggregate.csv", aggregate)
    plot_sweep(aggregate, out / "sweep.svg", spec.parameter, f"{spec.paradigm} {spec.parameter} sweep")
    write_json(out / "sweep_meta.json", {"config_hash": config.config_hash(), "sweep": spec.model_dump(mode="json")})
    for row in aggregate.itertuples(index=False):
        print(f"{spec.parameter}={row.value:g}: {row.mean:.4f} +/- {row.std:.4f} (n={row.n}) {row.outcome}")
    return 0


def cmd_healing(config: ExperimentConfig, args: Namespace) -> int:
    if getattr(args, "seeds", None) is not None:
        config = config.model_copy(update={"healing": revalidate(config.healing, {"seeds": args.seeds})})
    layout = RunLayout(config.output_dir)
    rows = run_healing(layout, config, worker_count())
    frame = pd.DataFrame(rows, columns=HEALING_COLUMNS)
    write_csv_frame(layout.healing_dir / "healing.csv", frame)
    fractions = {"flow": config.healing.flow_stop_fraction, "ddim": config.healing.ddim_stop_fraction}
    fractions = {p: f for p, f in fractions.items() if p in config.healing.paradigms}
    verdicts = healing_verdicts(frame, config.generator.num_steps, fractions)
    write_json(layout.healing_dir / "verdicts.json", {"config_hash": config.config_hash(), "verdicts": verdicts})
    for paradigm, verdict in verdicts.items():
        print(
            f"{paradigm}: stop_after:{verdict['stop_after']} minus continuous = {verdict['gap']:+.4f} "
            f"(worse in {verdict['healed_seeds']}/{verdict['seeds']} seeds)"
        )
    return 0


def cmd_report(config: ExperimentConfig, args: Namespace) -> int:
    layout = RunLayout(config.output_dir)
    run_dirs = list(getattr(args, "run_dirs", None) or [])
    if not run_dirs:
        raise ConfigError("report needs at least one run directory")
    fractions = {"flow": config.healing.flow_stop_fraction, "ddim": config.healing.ddim_stop_fraction}
    bundle = build_report(run_dirs, getattr(args, "report_dir", None) or layout.report_dir, config.generator.num_steps, fractions)
    print(bundle.markdown)
    return 0


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train-teacher": cmd_train_teacher,
    "train-baseline": cmd_train_baseline,
    "evaluate": cmd_evaluate,
    "train-gen": cmd_train_gen,
    "steer": cmd_steer,
    "sweep": cmd_sweep,
    "healing": cmd_healing,
    "report": cmd_report,
}

"""
Lab CLI Module
Run directories, experiment orchestration, reports and the steerlab command
"""

from .artifacts import RunLayout, read_csv_frame, write_csv_frame, write_json
from .config import ExperimentConfig, HealingConfig, SweepSpec, load_experiment_config, worker_count
from .experiments import (
    LabModels,
    load_lab_models,
    run_healing,
    run_sweep,
    steer_with_control,
)
from .main import build_parser, main
from .report import ReportBundle, build_report

__all__ = [
    'RunLayout',
    'read_csv_frame',
    'write_csv_frame',
    'write_json',
    'ExperimentConfig',
    'HealingConfig',
    'SweepSpec',
    'load_experiment_config',
    'worker_count',
    'LabModels',
    'load_lab_models',
    'run_healing',
    'run_sweep',
    'steer_with_control',
    'build_parser',
    'main',
    'ReportBundle',
    'build_report',
]

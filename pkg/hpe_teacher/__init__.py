"""
HPE Teacher Module
Shape embedding net, triplet training, odd-one-out evaluation and the texture baseline
"""

from .embedding_net import DEFAULT_WIDTHS, INPUT_DIM, EmbeddingNet, embed
from .evaluation import (
    ClusterStats,
    EmptyTripletSet,
    EvalReport,
    chance_triplets,
    cluster_distances,
    evaluate_triplets,
    hpe_distance,
    hpe_distance_embeddings,
    odd_one_out_accuracy,
    odd_one_out_correct,
    odd_one_out_from_embeddings,
)
from .losses import cross_entropy, triplet_loss
from .teacher_trainer import TeacherTrainConfig, TeacherTrainer, train_teacher
from .texture_baseline import BaselineTrainConfig, TextureBaseline, train_texture_baseline

__all__ = [
    'EmbeddingNet',
    'embed',
    'INPUT_DIM',
    'DEFAULT_WIDTHS',
    'triplet_loss',
    'cross_entropy',
    'TeacherTrainConfig',
    'TeacherTrainer',
    'train_teacher',
    'BaselineTrainConfig',
    'TextureBaseline',
    'train_texture_baseline',
    'EvalReport',
    'ClusterStats',
    'EmptyTripletSet',
    'odd_one_out_accuracy',
    'odd_one_out_correct',
    'odd_one_out_from_embeddings',
    'evaluate_triplets',
    'hpe_distance',
    'hpe_distance_embeddings',
    'cluster_distances',
    'chance_triplets',
]

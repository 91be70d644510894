"""
Shape World Module
Procedural shape x texture images, triplet sampling and external triplet ingestion
"""

from .dataset_builder import (
    DatasetConfig,
    DatasetManifest,
    ImageRecord,
    IndependenceTest,
    ShapeWorld,
    build_dataset,
    export_ppm,
    independence_statistic,
    load_shapeworld,
)
from .errors import ConfigInvalid, DegenerateShape, EmptySplit, InsufficientVariety, MalformedRow, MissingImage
from .geometry import (
    BACKGROUND,
    IMAGE_SIZE,
    SHAPE_TAGS,
    TEXTURE_TAGS,
    ShapeClass,
    ShapeTextureImage,
    TextureClass,
    render_image,
    shape_mask,
)
from .triplet_loader import load_external_triplets, load_image_file
from .triplets import LabeledImage, Triplet, TripletSampler, check_triplet, export_triplets_csv, sample_triplet

__all__ = [
    'ShapeClass',
    'TextureClass',
    'ShapeTextureImage',
    'render_image',
    'shape_mask',
    'IMAGE_SIZE',
    'BACKGROUND',
    'SHAPE_TAGS',
    'TEXTURE_TAGS',
    'DatasetConfig',
    'DatasetManifest',
    'ImageRecord',
    'IndependenceTest',
    'ShapeWorld',
    'build_dataset',
    'load_shapeworld',
    'export_ppm',
    'independence_statistic',
    'Triplet',
    'LabeledImage',
    'TripletSampler',
    'sample_triplet',
    'check_triplet',
    'export_triplets_csv',
    'load_external_triplets',
    'load_image_file',
    'ConfigInvalid',
    'DegenerateShape',
    'InsufficientVariety',
    'EmptySplit',
    'MalformedRow',
    'MissingImage',
]

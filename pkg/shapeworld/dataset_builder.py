"""
Dataset Builder
Stratified shape x texture world with seeded per-image parameters and split triplets
"""

import json
import logging
from itertools import product
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from PIL import Image
from pydantic import BaseModel, Field, field_validator, model_validator
from scipy.stats import chi2, chi2_contingency

from grad_core.errors import MissingArtifact
from grad_core.hashing import config_hash
from grad_core.rng import derive_seed, make_rng
from grad_core.serialization import atomic_write_bytes, load_tensor, save_tensor

from .errors import ConfigInvalid, DegenerateShape, EmptySplit
from .geometry import PALETTE, SHAPE_TAGS, TEXTURE_TAGS, ShapeClass, TextureClass, render_image
from .triplets import LabeledImage, Triplet, TripletSampler

logger = logging.getLogger(__name__)

MAX_RENDER_ATTEMPTS = 32
FREQUENCIES = (2.0, 3.0, 4.0)
SPLITS = ("train", "val")


class DatasetConfig(BaseModel):
    n_images: int = Field(default=600, ge=1)
    shapes: List[str] = Field(default_factory=lambda: list(SHAPE_TAGS))
    textures: List[str] = Field(default_factory=lambda: list(TEXTURE_TAGS))
    seed: int = 0
    val_fraction: float = Field(default=0.2, ge=0.0, lt=1.0)
    size_range: Tuple[float, float] = (0.4, 0.7)
    max_offset: int = Field(default=2, ge=0, le=6)
    train_triplets: int = Field(default=2000, ge=0)
    val_triplets: int = Field(default=500, ge=0)

    @field_validator("shapes")
    @classmethod
    def _known_shapes(cls, value: List[str]) -> List[str]:
        unknown = sorted(set(value) - set(SHAPE_TAGS))
        if unknown or len(set(value)) != len(value):
            raise ValueError(f"shapes must be distinct tags from {SHAPE_TAGS}, got {value}")
        return value

    @field_validator("textures")
    @classmethod
    def _known_textures(cls, value: List[str]) -> List[str]:
        unknown = sorted(set(value) - set(TEXTURE_TAGS))
        if unknown or len(set(value)) != len(value):
            raise ValueError(f"textures must be distinct tags from {TEXTURE_TAGS}, got {value}")
        return value

    @model_validator(mode="after")
    def _size_range(self) -> "DatasetConfig":
        lo, hi = self.size_range
        if not 0.3 <= lo <= hi <= 0.8:
            raise ValueError(f"size_range {self.size_range} must sit inside [0.3, 0.8]")
        return self


class ImageRecord(BaseModel):
    id: int
    shape: str
    texture: str
    seed: int
    split: str
    path: str
    size: float
    offset: Tuple[int, int]
    color: Tuple[float, float, float]
    frequency: float


class DatasetManifest(BaseModel):
    seed: int
    config_hash: str
    config: DatasetConfig
    images: List[ImageRecord]
    triplets: Dict[str, List[Tuple[int, int, int]]]

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"


class IndependenceTest(BaseModel):
    statistic: float
    critical_value: float
    dof: int
    independent: bool


class ShapeWorld:
    """A manifest plus its rendered pixels, addressable by image id"""

    def __init__(self, manifest: DatasetManifest, images: Dict[int, np.ndarray], root: Optional[Path] = None):
        self.manifest = manifest
        self.images = images
        self.root = root
        self._records = {record.id: record for record in manifest.images}

    def __len__(self) -> int:
        return len(self._records)

    def record(self, image_id: int) -> ImageRecord:
        return self._records[image_id]

    def labels(self) -> Dict[int, Tuple[str, str]]:
        return {r.id: (r.shape, r.texture) for r in self.manifest.images}

    def ids(self, split: str) -> List[int]:
        return [r.id for r in self.manifest.images if r.split == split]

    def labeled(self, split: str) -> List[LabeledImage]:
        return [LabeledImage(r.id, r.shape, r.texture) for r in self.manifest.images if r.split == split]

    def stack(self, ids: List[int]) -> np.ndarray:
        """(n, 3072) matrix of flattened images"""
        return np.stack([self.images[i].reshape(-1) for i in ids]) if ids else np.zeros((0, 3072))

    def triplets(self, split: str) -> List[Triplet]:
        if not self.ids(split):
            raise EmptySplit(f"split '{split}' has no images")
        return [Triplet(*t) for t in self.manifest.triplets.get(split, [])]

    def sampler(self, split: str) -> TripletSampler:
        if not self.ids(split):
            raise EmptySplit(f"split '{split}' has no images")
        return TripletSampler(self.labeled(split))

    def image_paths(self) -> Dict[int, Path]:
        if self.root is None:
            raise MissingArtifact("world was not persisted; no image paths")
        return {r.id: self.root / r.path for r in self.manifest.images}

    def independence_test(self, level: float = 0.99) -> IndependenceTest:
        return independence_statistic(self.manifest.images, level)


def independence_statistic(records: List[ImageRecord], level: float = 0.99) -> IndependenceTest:
    """Chi-square test that shape and texture counts factorize"""
    frame = pd.DataFrame([{"shape": r.shape, "texture": r.texture} for r in records])
    table = pd.crosstab(frame["shape"], frame["texture"])
    if min(table.shape) < 2:
        return IndependenceTest(statistic=0.0, critical_value=0.0, dof=0, independent=True)
    statistic, _, dof, _ = chi2_contingency(table.to_numpy(), correction=False)
    critical = float(chi2.ppf(level, dof))
    return IndependenceTest(statistic=float(statistic), critical_value=critical, dof=int(dof), independent=bool(statistic < critical))


def _sample_parameters(config: DatasetConfig, shape_tag: str, texture_tag: str, image_seed: int, attempt: int):
    rng = make_rng(image_seed, "params", attempt)
    lo, hi = config.size_range
    size = float(lo + (hi - lo) * rng.random())
    offset = (int(rng.integers(-config.max_offset, config.max_offset + 1)),
              int(rng.integers(-config.max_offset, config.max_offset + 1)))
    color = PALETTE[int(rng.integers(len(PALETTE)))]
    frequency = FREQUENCIES[int(rng.integers(len(FREQUENCIES)))]
    return ShapeClass(shape_tag, size, offset), TextureClass(texture_tag, color, frequency)


def _render_cell(config: DatasetConfig, shape_tag: str, texture_tag: str, image_seed: int):
    last = None
    for attempt in range(MAX_RENDER_ATTEMPTS):
        shape, texture = _sample_parameters(config, shape_tag, texture_tag, image_seed, attempt)
        try:
            return shape, texture, render_image(shape, texture, image_seed)
        except DegenerateShape as e:
            last = e
            logger.debug(f"resampling {shape_tag}: {e}")
    raise ConfigInvalid(f"could not render a valid {shape_tag} in {MAX_RENDER_ATTEMPTS} attempts: {last}")


def _assign_splits(config: DatasetConfig, cells: List[List[int]]) -> Dict[int, str]:
    rng = make_rng(config.seed, "split")
    splits: Dict[int, str] = {}
    for members in cells:
        n_val = min(int(round(config.val_fraction * len(members))), len(members) - 1)
        val = set(int(i) for i in rng.permutation(members)[:n_val])
        for image_id in members:
            splits[image_id] = "val" if image_id in val else "train"
    return splits


def export_ppm(path: Union[str, Path], pixels: np.ndarray) -> Path:
    """Binary PPM (P6) for eyeballing"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rgb = np.clip(np.round(np.transpose(pixels, (1, 2, 0)) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(rgb).save(path, format="PPM")
    return path


def build_dataset(
    config: DatasetConfig,
    output_dir: Optional[Union[str, Path]] = None,
    export_ppm_files: bool = False,
) -> ShapeWorld:
    """Render, split and sample triplets; persists under output_dir when given"""
    n_cells = len(config.shapes) * len(config.textures)
    if n_cells == 0:
        raise ConfigInvalid("dataset needs at least one shape and one texture")
    if config.n_images < 2 * n_cells:
        raise ConfigInvalid(f"n_images={config.n_images} must be at least 2 x {n_cells} cells")

    logger.info(f"🎨 Rendering {config.n_images} images over {n_cells} shape/texture cells")
    cell_tags = list(product(config.shapes, config.textures))
    cells: List[List[int]] = [[] for _ in cell_tags]
    rendered = {}
    for image_id in range(config.n_images):
        cell = image_id % n_cells
        cells[cell].append(image_id)
        image_seed = derive_seed(config.seed, "image", image_id)
        rendered[image_id] = _render_cell(config, *cell_tags[cell], image_seed)

    splits = _assign_splits(config, cells)
    records = []
    for image_id, (shape, texture, image) in rendered.items():
        records.append(ImageRecord(
            id=image_id,
            shape=shape.tag,
            texture=texture.tag,
            seed=image.seed,
            split=splits[image_id],
            path=f"images/{image_id:05d}.stlb",
            size=shape.size,
            offset=shape.offset,
            color=texture.color,
            frequency=texture.frequency,
        ))

    triplets: Dict[str, List[Tuple[int, int, int]]] = {}
    for split, count in (("train", config.train_triplets), ("val", config.val_triplets)):
        items = [LabeledImage(r.id, r.shape, r.texture) for r in records if r.split == split]
        if not items or count == 0:
            triplets[split] = []
            continue
        rng = make_rng(config.seed, "triplets", split)
        triplets[split] = [t.as_tuple() for t in TripletSampler(items).sample_many(rng, count)]

    manifest = DatasetManifest(
        seed=config.seed,
        config_hash=config_hash(config),
        config=config,
        images=records,
        triplets=triplets,
    )
    images = {image_id: image.pixels for image_id, (_, _, image) in rendered.items()}
    root = Path(output_dir) if output_dir is not None else None
    world = ShapeWorld(manifest, images, root)

    counts = {s: len(world.ids(s)) for s in SPLITS}
    logger.info(f"✅ Dataset ready: {counts['train']} train / {counts['val']} val images")

    if root is not None:
        for record in records:
            save_tensor(root / record.path, images[record.id])
            if export_ppm_files:
                export_ppm((root / record.path).with_suffix(".ppm"), images[record.id])
        atomic_write_bytes(root / "manifest.json", manifest.to_json().encode("utf-8"))
        logger.info(f"💾 Dataset written to {root}")
    return world


def load_shapeworld(root: Union[str, Path]) -> ShapeWorld:
    root = Path(root)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise MissingArtifact(f"dataset manifest not found: {manifest_path}")
    manifest = DatasetManifest.model_validate_json(manifest_path.read_text(encoding="utf-8"))
    images = {record.id: load_tensor(root / record.path) for record in manifest.images}
    return ShapeWorld(manifest, images, root)

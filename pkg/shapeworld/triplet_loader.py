"""
External Triplet Loader
Reads anchor,positive,negative CSVs of image paths into cached 3x32x32 tensors
"""

import csv
import logging
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from grad_core.serialization import load_tensor

from .errors import MalformedRow, MissingImage
from .geometry import IMAGE_SIZE
from .triplets import Triplet

logger = logging.getLogger(__name__)

HEADER = ["anchor", "positive", "negative"]


def load_image_file(path: Path) -> np.ndarray:
    """STLB tensors load as-is; anything Pillow reads is resized bilinearly to 32x32"""
    if not path.exists():
        raise MissingImage(f"image not found: {path}")
    if path.suffix.lower() == ".stlb":
        pixels = load_tensor(path)
        if pixels.shape != (3, IMAGE_SIZE, IMAGE_SIZE):
            raise MissingImage(f"{path} holds a {pixels.shape} tensor, expected (3, 32, 32)")
        return pixels
    try:
        with Image.open(path) as img:
            rgb = img.convert("RGB").resize((IMAGE_SIZE, IMAGE_SIZE), Image.Resampling.BILINEAR)
            array = np.asarray(rgb, dtype=np.float64) / 255.0
    except (UnidentifiedImageError, OSError) as e:
        raise MissingImage(f"could not decode {path}: {e}") from e
    return np.transpose(array, (2, 0, 1)).copy()


def load_external_triplets(path: Union[str, Path]) -> Tuple[List[Triplet], Dict[str, np.ndarray]]:
    """Triplets in file order plus the image cache keyed by the path strings in the CSV"""
    path = Path(path)
    if not path.exists():
        raise MissingImage(f"triplet file not found: {path}")
    base = path.parent

    triplets: List[Triplet] = []
    cache: Dict[str, np.ndarray] = {}
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != HEADER:
            raise MalformedRow(f"expected header {','.join(HEADER)}, got {header}", 1)
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != 3:
                raise MalformedRow(f"expected 3 columns, found {len(row)}", line)
            refs = [cell.strip() for cell in row]
            if any(not ref for ref in refs):
                raise MalformedRow("empty image reference", line)
            for ref in refs:
                if ref not in cache:
                    image_path = Path(ref) if Path(ref).is_absolute() else base / ref
                    cache[ref] = load_image_file(image_path)
            triplets.append(Triplet(*refs))

    logger.info(f"📥 Loaded {len(triplets)} external triplets over {len(cache)} images from {path}")
    return triplets, cache

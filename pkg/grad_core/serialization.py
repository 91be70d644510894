"""
Tensor Files
STLB tensor blobs and ParamSet checkpoints, written atomically
"""

import json
import logging
import os
import struct
import tempfile
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np

from .errors import CorruptFile, MissingArtifact
from .optim import ParamSet
from .tensor import DTYPE

logger = logging.getLogger(__name__)

MAGIC = b"STLB"
PathLike = Union[str, Path]


def encode_tensor(array: np.ndarray) -> bytes:
    array = np.asarray(array)
    header = MAGIC + struct.pack("<I", array.ndim) + struct.pack(f"<{array.ndim}I", *array.shape)
    return header + np.ascontiguousarray(array, dtype="<f4").tobytes()


def decode_tensor(blob: bytes, offset: int = 0) -> Tuple[np.ndarray, int]:
    """Parse one tensor at offset; returns the array and the offset just past it"""
    if blob[offset:offset + 4] != MAGIC:
        raise CorruptFile(f"bad magic at byte {offset}")
    (rank,) = struct.unpack_from("<I", blob, offset + 4)
    dims = struct.unpack_from(f"<{rank}I", blob, offset + 8)
    start = offset + 8 + 4 * rank
    count = int(np.prod(dims)) if rank else 1
    end = start + 4 * count
    if end > len(blob):
        raise CorruptFile(f"truncated tensor at byte {offset}")
    data = np.frombuffer(blob[start:end], dtype="<f4").astype(DTYPE).reshape(dims)
    return data, end


def atomic_write_bytes(path: PathLike, payload: bytes) -> Path:
    """Write via a temp file in the same directory, then rename over the target"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def save_tensor(path: PathLike, array: np.ndarray) -> Path:
    return atomic_write_bytes(path, encode_tensor(array))


def load_tensor(path: PathLike) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise MissingArtifact(f"tensor file not found: {path}")
    array, _ = decode_tensor(path.read_bytes())
    return array


def save_params(path: PathLike, params: ParamSet) -> Path:
    """JSON index line {name: offset} followed by the concatenated tensors"""
    index: Dict[str, int] = {}
    blobs = []
    offset = 0
    for name, tensor in params.items():
        blob = encode_tensor(tensor.data)
        index[name] = offset
        blobs.append(blob)
        offset += len(blob)
    header = json.dumps(index, separators=(",", ":")).encode("utf-8") + b"\n"
    path = atomic_write_bytes(path, header + b"".join(blobs))
    logger.info(f"💾 Saved {len(index)} parameters to {path}")
    return path


def load_param_arrays(path: PathLike) -> Dict[str, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise MissingArtifact(f"checkpoint not found: {path}")
    raw = path.read_bytes()
    newline = raw.find(b"\n")
    if newline < 0:
        raise CorruptFile(f"checkpoint {path} has no index line")
    try:
        index = json.loads(raw[:newline].decode("utf-8"))
    except ValueError as exc:
        raise CorruptFile(f"checkpoint {path} has a malformed index: {exc}") from exc
    body = raw[newline + 1:]
    return {name: decode_tensor(body, offset)[0] for name, offset in index.items()}


def load_params(path: PathLike) -> ParamSet:
    params = ParamSet()
    params.load_arrays(load_param_arrays(path))
    return params

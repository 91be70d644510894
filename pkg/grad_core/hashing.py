"""
Config Hashing
Canonical JSON and the short provenance hash embedded in outputs
"""

import hashlib
import json
from typing import Any

from pydantic import BaseModel


def canonical_json(value: Any) -> str:
    if isinstance(value, BaseModel):
        value = value.model_dump(mode="json")
    return json.dumps(value, sort_keys=True, separators=(",", ":"))


def config_hash(value: Any) -> str:
    """First 16 hex chars of sha256 over the canonical JSON"""
    return hashlib.sha256(canonical_json(value).encode("utf-8")).hexdigest()[:16]

"""The bundled toy suite: a small asset library, five embodiments and four tasks."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

from .randomization import InstructionPools, load_pools
from .scene import AssetLibrary, load_manifest

DEFAULT_EMBODIMENT = "aloha"


def manifest_path():
    return resources.files("twinforge") / "data" / "toy_manifest.json"


def pools_path():
    return resources.files("twinforge") / "data" / "toy_pools.json"


@lru_cache(maxsize=1)
def toy_library() -> AssetLibrary:
    return load_manifest(manifest_path())


@lru_cache(maxsize=1)
def toy_pools() -> InstructionPools:
    return load_pools(pools_path(), toy_library())

"""Compressed last-level cache simulator with signature tags, tag-appended data and superblock markers."""

from .cache import Cache, CacheGeometry
from .codec import SizeClass, compress_best, decompress
from .layout import fits
from .sign import build_tables, collision_probability, make_signature

__version__ = "0.1.0"

__all__ = [
    "Cache",
    "CacheGeometry",
    "SizeClass",
    "build_tables",
    "collision_probability",
    "compress_best",
    "decompress",
    "fits",
    "make_signature",
]

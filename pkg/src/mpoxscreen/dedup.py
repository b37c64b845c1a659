"""Near-duplicate screening with a 64-bit difference hash.

Automates the unique-image selection step: byte-identical files always have
hash distance 0, visually similar images land within a small distance.
"""

from __future__ import annotations

import logging

import numpy as np
from PIL import Image

from .dataset import DatasetManifest

log = logging.getLogger(__name__)

_LUMA = np.array([0.299, 0.587, 0.114])


def dhash(pixels: np.ndarray) -> int:
    """Difference hash: 8x8 horizontal gradient signs of the shrunk luma image."""
    gray = np.asarray(pixels, dtype=np.float64) @ _LUMA
    small = np.asarray(
        Image.fromarray(gray.astype(np.float32), mode="F").resize((9, 8), Image.BILINEAR)
    )
    bits = (small[:, 1:] > small[:, :-1]).flatten()
    value = 0
    for bit in bits:
        value = (value << 1) | int(bit)
    return value


def hash_distance(a: int, b: int) -> int:
    return (a ^ b).bit_count()


class _UnionFind:
    def __init__(self, items):
        self.parent = {item: item for item in items}

    def find(self, item):
        root = item
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[item] != root:
            self.parent[item], item = root, self.parent[item]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def detect_duplicates(manifest: DatasetManifest, store, threshold: int = 0) -> list[list[str]]:
    """Group image_ids whose perceptual-hash distance is <= threshold.

    Read-only; unreadable payloads are skipped with a warning. Returns
    groups of size >= 2, deterministically ordered.
    """
    if not manifest.entries:
        raise ValueError("manifest is empty")
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    hashes: dict[str, int] = {}
    for entry in manifest.entries:
        try:
            hashes[entry.image_id] = dhash(store.load(entry))
        except (OSError, ValueError, FileNotFoundError) as exc:
            log.warning("skipping unreadable image %s: %s", entry.image_id, exc)
    ids = sorted(hashes)
    uf = _UnionFind(ids)
    for i, a in enumerate(ids):
        for b in ids[i + 1 :]:
            if hash_distance(hashes[a], hashes[b]) <= threshold:
                uf.union(a, b)
    components: dict[str, list[str]] = {}
    for image_id in ids:
        components.setdefault(uf.find(image_id), []).append(image_id)
    groups = [sorted(members) for members in components.values() if len(members) > 1]
    groups.sort(key=lambda g: g[0])
    return groups

"""Canonical per-class image patterns shared by the synthetic generator and
the reference classifier.

Each major class owns a distinct base color; each subtype within a major gets
a distinct low-frequency spatial modulation laid out on an 8x8 block grid.
The block grid matches the classifier's pooling grid, so the patterns stay
fully visible to the pooled features.
"""

from __future__ import annotations

import numpy as np

from .taxonomy import ClassTaxonomy

PATTERN_SIZE = 224
BLOCK_GRID = 8
BLOCK_PX = PATTERN_SIZE // BLOCK_GRID

# One dominant hue per major class, kept away from 0/255 so that generator
# noise never clips.
MAJOR_BASE_COLORS = {
    "Healthy": (70, 170, 90),
    "Benign": (170, 150, 70),
    "OPMD": (80, 110, 180),
    "OralCancer": (180, 80, 120),
}

MODULATION = 45  # block-level intensity swing distinguishing subtypes


def canonical_block_grid(taxonomy: ClassTaxonomy, label: str) -> np.ndarray:
    """8x8x3 int16 block values for one subtype's canonical pattern."""
    major = taxonomy.major_of(label)
    sub_idx = list(taxonomy.subtypes_of(major)).index(label)
    base = np.array(MAJOR_BASE_COLORS[major], dtype=np.int16)
    grid = np.broadcast_to(base, (BLOCK_GRID, BLOCK_GRID, 3)).astype(np.int16).copy()

    # Separability is calibrated for up to four subtypes per major; extra
    # subtypes reuse the four modulations at growing amplitude.
    kind = sub_idx % 4
    amp = np.int16(min(MODULATION + 20 * (sub_idx // 4), 75))
    ramp = np.round(np.linspace(-int(amp), int(amp), BLOCK_GRID)).astype(np.int16)
    if kind == 1:
        grid += ramp[None, :, None]
    elif kind == 2:
        grid += ramp[:, None, None]
    elif kind == 3:
        yy, xx = np.mgrid[0:BLOCK_GRID, 0:BLOCK_GRID]
        grid += np.where((yy + xx) % 2 == 0, amp, -amp).astype(np.int16)[:, :, None]
    return grid


def canonical_image(taxonomy: ClassTaxonomy, label: str) -> np.ndarray:
    """Noise-free 224x224x3 uint8 canonical image for one subtype."""
    grid = canonical_block_grid(taxonomy, label)
    img = np.repeat(np.repeat(grid, BLOCK_PX, axis=0), BLOCK_PX, axis=1)
    return np.clip(img, 0, 255).astype(np.uint8)

"""Synthetic dataset generation, stratified splitting, oversampling and
training-only augmentation.

Every operation is a pure function of (inputs, seed); per-class and
per-record RNG streams are derived so results do not depend on iteration
order elsewhere.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import MalformedImage, SplitTooSmall, UnknownClass
from .patterns import canonical_image
from .preprocess import resize_bilinear
from .taxonomy import ClassTaxonomy

log = logging.getLogger(__name__)

SPLIT_RATIOS = (0.70, 0.15, 0.15)
OVERSAMPLE_THRESHOLD = 200
AUGMENTATIONS_PER_RECORD = 5
NOISE_AMPLITUDE = 8       # generator pixel noise, +-levels
ROTATION_MAX_DEG = 25.0
JITTER_RANGE = 0.20       # brightness/contrast factors in [0.8, 1.2]
CROP_AREA_MIN = 0.80
MANIFEST_SEP = "\t"
MANIFEST_FIELDS = ("id", "path", "subtype", "major", "origin", "source_id")

ORIGINS = ("synthetic", "duplicated", "augmented", "ingested")


@dataclass(frozen=True)
class ImageRecord:
    id: str
    label: str
    major: str
    pixels: np.ndarray
    origin: str
    source_id: str | None = None


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[ImageRecord, ...]
    validation: tuple[ImageRecord, ...]
    test: tuple[ImageRecord, ...]
    ratios: tuple[float, float, float]
    seed: int


def _stable_token(text: str) -> int:
    # Process-independent integer for seeding sub-streams (hash() is salted).
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big")


def generate_synthetic_dataset(
    taxonomy: ClassTaxonomy, counts: dict[str, int], seed: int
) -> list[ImageRecord]:
    """Build labeled records from per-class canonical patterns plus seeded
    pixel noise. Byte-identical across runs for the same arguments."""
    for label in counts:
        if label not in taxonomy.parent:
            raise UnknownClass(f"unknown class {label!r} in counts")
    records: list[ImageRecord] = []
    for label in taxonomy.subtypes:
        n = counts.get(label, 0)
        if n < 0:
            raise UnknownClass(f"count for {label!r} must be >= 0, got {n}")
        if n == 0:
            continue
        base = canonical_image(taxonomy, label).astype(np.int16)
        rng = np.random.default_rng([seed, taxonomy.subtype_index(label)])
        major = taxonomy.major_of(label)
        for i in range(n):
            noise = rng.integers(-NOISE_AMPLITUDE, NOISE_AMPLITUDE + 1, base.shape, dtype=np.int16)
            pixels = np.clip(base + noise, 0, 255).astype(np.uint8)
            records.append(
                ImageRecord(
                    id=f"{label}-{i:04d}",
                    label=label,
                    major=major,
                    pixels=pixels,
                    origin="synthetic",
                )
            )
    return records


def _round_half_up(frac: Fraction) -> int:
    return int(frac + Fraction(1, 2))


def stratified_split(records: list[ImageRecord], seed: int) -> DatasetSplit:
    """Per-class seeded shuffle, then 70/15/15 assignment.

    Rounding rule: train gets round(0.70 * n), validation round(0.15 * n),
    test the remainder (exact rational arithmetic, halves round up).
    """
    by_class: dict[str, list[ImageRecord]] = {}
    order: list[str] = []
    for rec in records:
        if rec.label not in by_class:
            by_class[rec.label] = []
            order.append(rec.label)
        by_class[rec.label].append(rec)
    for label, group in by_class.items():
        if len(group) < 3:
            raise SplitTooSmall(f"class {label!r} has {len(group)} records; need >= 3 to stratify")

    train: list[ImageRecord] = []
    validation: list[ImageRecord] = []
    test: list[ImageRecord] = []
    for label in order:
        group = list(by_class[label])
        rng = np.random.default_rng([seed, _stable_token(label)])
        rng.shuffle(group)
        n = len(group)
        n_train = _round_half_up(Fraction(70, 100) * n)
        n_val = _round_half_up(Fraction(15, 100) * n)
        train.extend(group[:n_train])
        validation.extend(group[n_train:n_train + n_val])
        test.extend(group[n_train + n_val:])
    return DatasetSplit(
        train=tuple(train),
        validation=tuple(validation),
        test=tuple(test),
        ratios=SPLIT_RATIOS,
        seed=seed,
    )


def oversample(
    train: list[ImageRecord], threshold: int = OVERSAMPLE_THRESHOLD, seed: int = 0
) -> list[ImageRecord]:
    """Duplicate records of under-represented classes (with replacement,
    seeded) until each class reaches exactly ``threshold``. Classes at or
    above the threshold pass through untouched; a taxonomy class with no
    training records is reported and skipped."""
    if threshold < 1:
        raise ValueError(f"threshold must be >= 1, got {threshold}")
    by_class: dict[str, list[ImageRecord]] = {}
    order: list[str] = []
    for rec in train:
        if rec.label not in by_class:
            by_class[rec.label] = []
            order.append(rec.label)
        by_class[rec.label].append(rec)

    out = list(train)
    for label in order:
        group = by_class[label]
        short = threshold - len(group)
        if short <= 0:
            continue
        rng = np.random.default_rng([seed, _stable_token(label)])
        picks = rng.integers(0, len(group), short)
        for j, pick in enumerate(picks):
            src = group[int(pick)]
            out.append(
                replace(
                    src,
                    id=f"{label}-dup{j:04d}",
                    pixels=src.pixels.copy(),
                    origin="duplicated",
                    source_id=src.id,
                )
            )
    return out


def report_empty_classes(taxonomy: ClassTaxonomy, train: list[ImageRecord]) -> list[str]:
    """Taxonomy classes absent from the training set (cannot be duplicated
    from nothing); logged and skipped by oversampling."""
    present = {rec.label for rec in train}
    empty = [label for label in taxonomy.subtypes if label not in present]
    for label in empty:
        log.warning("class %s has no training records; oversampling skipped", label)
    return empty


def _hflip(px: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return px[:, ::-1].copy()


def _vflip(px: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return px[::-1].copy()


def _rotate(px: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    angle = float(rng.uniform(-ROTATION_MAX_DEG, ROTATION_MAX_DEG))
    return np.asarray(Image.fromarray(px).rotate(angle, resample=Image.BILINEAR))


def _jitter(px: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    # Resample factors that are both ~1.0 so the output visibly differs.
    for _ in range(8):
        b = float(rng.uniform(1.0 - JITTER_RANGE, 1.0 + JITTER_RANGE))
        c = float(rng.uniform(1.0 - JITTER_RANGE, 1.0 + JITTER_RANGE))
        if abs(b - 1.0) >= 0.02 or abs(c - 1.0) >= 0.02:
            break
    out = (px.astype(np.float64) * b - 127.5) * c + 127.5
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def _random_crop(px: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    h, w = px.shape[:2]
    area = float(rng.uniform(CROP_AREA_MIN, 1.0))
    side = area ** 0.5
    ch = min(max(1, round(h * side)), h - 1) if h > 1 else 1
    cw = min(max(1, round(w * side)), w - 1) if w > 1 else 1
    top = int(rng.integers(0, h - ch + 1))
    left = int(rng.integers(0, w - cw + 1))
    crop = px[top:top + ch, left:left + cw]
    out = resize_bilinear(crop, h, w)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


_TRANSFORMS = (
    ("hflip", _hflip),
    ("vflip", _vflip),
    ("rotate", _rotate),
    ("jitter", _jitter),
    ("crop", _random_crop),
)


def augment_sample(rec: ImageRecord, seed: int) -> list[ImageRecord]:
    """Five single-transform variants of one record: horizontal flip,
    vertical flip, rotation within +-25 degrees, brightness/contrast jitter
    within +-20%, and a random 80-100%-area crop resized back. Labels are
    preserved and each variant differs from the source in at least one pixel
    (degenerate sources get one pixel nudged to keep that contract)."""
    if rec.pixels.ndim != 3 or rec.pixels.shape[2] != 3:
        raise MalformedImage(f"record {rec.id} has unusable pixels of shape {rec.pixels.shape}")
    rng = np.random.default_rng([seed, _stable_token(rec.id)])
    out: list[ImageRecord] = []
    for k, (name, fn) in enumerate(_TRANSFORMS, start=1):
        pixels = fn(rec.pixels, rng)
        if np.array_equal(pixels, rec.pixels):
            pixels = pixels.copy()
            pixels[0, 0, 0] ^= 1
        out.append(
            replace(
                rec,
                id=f"{rec.id}-aug{k}",
                pixels=pixels,
                origin="augmented",
                source_id=rec.id,
            )
        )
    return out


def build_training_set(
    split: DatasetSplit, seed: int, threshold: int = OVERSAMPLE_THRESHOLD
) -> list[ImageRecord]:
    """Oversample the training records, then append five augmented variants
    per resulting record. Validation and test records are never touched."""
    base = oversample(list(split.train), threshold=threshold, seed=seed)
    out = list(base)
    for rec in base:
        out.extend(augment_sample(rec, seed))
    return out


def class_counts(records: list[ImageRecord]) -> dict[str, int]:
    counts: dict[str, int] = {}
    for rec in records:
        counts[rec.label] = counts.get(rec.label, 0) + 1
    return counts


def write_manifest(
    records: list[ImageRecord], out_dir: Path, manifest_name: str = "manifest.tsv",
    subdir: str = "images",
) -> Path:
    """Write records as PNGs plus a tab-separated manifest.

    Manifest fields, in order: id, relative path, subtype, major, origin,
    source_id ('-' for originals). One record per line.
    """
    out_dir = Path(out_dir)
    images_dir = out_dir / subdir
    images_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = out_dir / manifest_name
    with open(manifest_path, "w", encoding="utf-8") as fh:
        fh.write(MANIFEST_SEP.join(MANIFEST_FIELDS) + "\n")
        for rec in records:
            rel = f"{subdir}/{rec.id}.png"
            Image.fromarray(rec.pixels).save(out_dir / rel)
            fields = (rec.id, rel, rec.label, rec.major, rec.origin, rec.source_id or "-")
            fh.write(MANIFEST_SEP.join(fields) + "\n")
    return manifest_path


def write_split_manifest(
    sections: dict[str, list[ImageRecord]], out_dir: Path, manifest_name: str = "manifest.tsv"
) -> Path:
    """Write several record groups (e.g. train/validation/test) under one
    manifest; each group's images land in ``images/<group>/``."""
    out_dir = Path(out_dir)
    manifest_path = out_dir / manifest_name
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(manifest_path, "w", encoding="utf-8") as fh:
        fh.write(MANIFEST_SEP.join(MANIFEST_FIELDS) + "\n")
        for section, records in sections.items():
            images_dir = out_dir / "images" / section
            images_dir.mkdir(parents=True, exist_ok=True)
            for rec in records:
                rel = f"images/{section}/{rec.id}.png"
                Image.fromarray(rec.pixels).save(out_dir / rel)
                fields = (rec.id, rel, rec.label, rec.major, rec.origin, rec.source_id or "-")
                fh.write(MANIFEST_SEP.join(fields) + "\n")
    return manifest_path


def read_manifest(manifest_path: Path) -> list[ImageRecord]:
    """Load records (including pixels) back from a manifest."""
    manifest_path = Path(manifest_path)
    root = manifest_path.parent
    records: list[ImageRecord] = []
    with open(manifest_path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(MANIFEST_SEP)
        if tuple(header) != MANIFEST_FIELDS:
            raise MalformedImage(f"unexpected manifest header {header}")
        for line in fh:
            rec_id, rel, label, major, origin, source_id = line.rstrip("\n").split(MANIFEST_SEP)
            pixels = np.asarray(Image.open(root / rel).convert("RGB"))
            records.append(
                ImageRecord(
                    id=rec_id,
                    label=label,
                    major=major,
                    pixels=pixels,
                    origin=origin,
                    source_id=None if source_id == "-" else source_id,
                )
            )
    return records

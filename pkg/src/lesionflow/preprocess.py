"""Deterministic image preprocessing: bilinear resize, intensity scaling and
per-channel standardization.

Resize convention: corner-aligned bilinear sampling. Output pixel ``i`` along
an axis of output length ``m`` samples source coordinate ``i * (n-1) / (m-1)``
(source length ``n``); a length-1 output samples coordinate 0. Interpolation
runs in float64. An input already at the target size is passed through
without resampling, so rendering a preprocessed image back to 224x224 and
preprocessing it again performs an identity resize.
"""

from __future__ import annotations

import numpy as np

from .errors import MalformedImage

TARGET_SIZE = 224

# Conventional channel statistics for natural-image standardization
# (overridable via config).
DEFAULT_CHANNEL_MEAN = (0.485, 0.456, 0.406)
DEFAULT_CHANNEL_STD = (0.229, 0.224, 0.225)


def _axis_coords(n_in: int, n_out: int) -> np.ndarray:
    if n_out == 1:
        return np.zeros(1)
    return np.linspace(0.0, float(n_in - 1), n_out)


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Corner-aligned bilinear resample of an HxWxC array, in float64."""
    h, w = img.shape[:2]
    src = img.astype(np.float64, copy=False)
    if (h, w) == (out_h, out_w):
        return src.copy()
    ys = _axis_coords(h, out_h)
    xs = _axis_coords(w, out_w)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    top = src[y0][:, x0] * (1.0 - fx) + src[y0][:, x1] * fx
    bot = src[y1][:, x0] * (1.0 - fx) + src[y1][:, x1] * fx
    return top * (1.0 - fy) + bot * fy


def validate_raw_image(raw: np.ndarray) -> None:
    if raw.ndim != 3 or raw.shape[2] != 3:
        raise MalformedImage(f"expected HxWx3 image, got shape {raw.shape}")
    if raw.shape[0] < 1 or raw.shape[1] < 1:
        raise MalformedImage(f"zero-dimension image: shape {raw.shape}")


def preprocess(
    raw: np.ndarray,
    mean: tuple[float, float, float] = DEFAULT_CHANNEL_MEAN,
    std: tuple[float, float, float] = DEFAULT_CHANNEL_STD,
) -> np.ndarray:
    """Resize to 224x224, scale intensities to [0, 1], standardize per channel.

    Returns a float32 (224, 224, 3) tensor. Pure function of the input bytes
    and the configured constants.
    """
    validate_raw_image(raw)
    m = np.asarray(mean, dtype=np.float32)
    s = np.asarray(std, dtype=np.float32)
    if raw.shape[0] == TARGET_SIZE and raw.shape[1] == TARGET_SIZE:
        t = raw.astype(np.float32)
    else:
        t = resize_bilinear(raw, TARGET_SIZE, TARGET_SIZE).astype(np.float32)
    t /= np.float32(255.0)
    t -= m
    t /= s
    return t


def validate_tensor(t: np.ndarray) -> None:
    if t.ndim != 3 or t.shape != (TARGET_SIZE, TARGET_SIZE, 3):
        raise MalformedImage(f"expected ({TARGET_SIZE}, {TARGET_SIZE}, 3) tensor, got shape {t.shape}")

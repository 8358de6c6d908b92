"""Separable Lanczos downscaling."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .raster import RasterImage

LOBES = 3
SWEEP_RESOLUTIONS = (5, 8, 13, 21, 30, 50, 80)


def lanczos_kernel(x, a: int = LOBES):
    """sinc(x) * sinc(x/a) on |x| < a, zero elsewhere; exact zeros at nonzero integers."""
    if a < 1:
        raise ValueError("a must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    out = np.zeros_like(ax)
    inside = ax < a
    xi = ax[inside]
    val = np.sinc(xi) * np.sinc(xi / a)
    val = np.where((xi != 0) & (xi == np.round(xi)), 0.0, val)
    out[inside] = val
    return out if out.ndim else float(out)


@lru_cache(maxsize=64)
def _weights(src: int, dst: int, a: int) -> np.ndarray:
    """(dst, src) matrix of normalized filter taps with clamped edges."""
    scale = src / dst
    support = a * max(scale, 1.0)
    m = np.zeros((dst, src))
    for i in range(dst):
        center = (i + 0.5) * scale - 0.5
        lo = int(np.floor(center - support)) + 1
        hi = int(np.ceil(center + support)) - 1
        taps = np.arange(lo, hi + 1)
        w = lanczos_kernel((taps - center) / max(scale, 1.0), a)
        np.add.at(m[i], np.clip(taps, 0, src - 1), w)
        m[i] /= m[i].sum()
    m.setflags(write=False)
    return m


def resample_array(pixels: np.ndarray, height: int, width: int, a: int = LOBES,
                   clip: bool = True) -> np.ndarray:
    """Horizontal pass then vertical pass; optional clamp to [0, 1] after both."""
    px = np.asarray(pixels, dtype=np.float64)
    h, w = px.shape
    if height > h or width > w:
        raise ValueError(f"upscaling {w}x{h} -> {width}x{height} is not supported")
    out = px if width == w else px @ _weights(w, width, a).T
    out = out if height == h else _weights(h, height, a) @ out
    if clip:
        out = np.clip(out, 0.0, 1.0)
    return out


def downscale(image: RasterImage, side: int, a: int = LOBES) -> RasterImage:
    if side < 2:
        raise ValueError("target side must be >= 2")
    px = resample_array(image.pixels, side, side, a)
    return RasterImage(px, dict(image.metadata, resolution=side))

"""Tightly cropped grayscale chart rendering of window samples.

Pixel intensities are ink coverage: 1.0 is black ink, 0.0 is white background.
Geometry uses two coordinate conventions: columns are continuous with pixel ``c``
covering ``[c, c+1)``; rows are pixel-center coordinates so that the highest
high lands on row 0 and the lowest low on row ``height - 1``.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .market_data import window_bars

NATIVE_SIDE = 240
BODY_FRACTION = 0.8
MIN_WIDTH_FRACTION = 0.2
LINE_HALF_WIDTH = 1.0

RAW_MAGIC = b"CSRI"
_RAW_HEADER = struct.Struct("<4sII")


class RenderStyle(str, enum.Enum):
    CANDLE_OHLC = "CandleOhlc"
    CLOSE_LINE = "CloseLine"
    CANDLE_TIME_WIDTH = "CandleTimeWidth"
    CANDLE_PREV_CLOSE = "CandlePrevClose"
    CANDLE_VOLUME_WIDTH = "CandleVolumeWidth"


CANDLE_STYLES = (RenderStyle.CANDLE_OHLC, RenderStyle.CANDLE_TIME_WIDTH,
                 RenderStyle.CANDLE_PREV_CLOSE, RenderStyle.CANDLE_VOLUME_WIDTH)


@dataclass
class RasterImage:
    pixels: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def round_half_away(x):
    x = np.asarray(x, dtype=np.float64)
    return (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype(np.int64)


@dataclass(frozen=True)
class Layout:
    width: int
    height: int
    n_days: int
    price_max: float
    price_min: float

    @property
    def slot_width(self) -> float:
        return self.width / self.n_days

    def slot_center(self, k):
        return (np.asarray(k, dtype=np.float64) + 0.5) * self.slot_width

    def slot_columns(self, k: int) -> tuple[int, int]:
        """Half-open column range covered by day ``k``'s slot."""
        sw = self.slot_width
        return int(round_half_away(k * sw)), int(round_half_away((k + 1) * sw))

    def wick_column(self, k: int) -> int:
        return min(int(np.floor(self.slot_center(k))), self.width - 1)

    def row(self, price):
        """Continuous row coordinate of ``price``."""
        price = np.asarray(price, dtype=np.float64)
        span = self.price_max - self.price_min
        if span <= 0:
            return np.full(price.shape, float(self.height // 2))
        return (self.price_max - price) / span * (self.height - 1)

    def pixel_row(self, price):
        return np.clip(round_half_away(self.row(price)), 0, self.height - 1)


def layout(window, canvas: tuple[int, int] = (NATIVE_SIDE, NATIVE_SIDE)) -> Layout:
    """Geometry for ``window`` (a WindowSample or PriceSeries) on a ``(width, height)`` canvas."""
    bars = window_bars(window)
    width, height = canvas
    if width < 8 or height < 8:
        raise ValueError("canvas must be at least 8x8")
    if len(bars) == 0:
        raise ValueError("empty window")
    return Layout(int(width), int(height), len(bars),
                  float(np.max(bars.high)), float(np.min(bars.low)))


def _body(ink, lay: Layout, k: int, o: float, c: float, frac: float):
    sw = lay.slot_width
    w = max(1, int(round_half_away(frac * sw)))
    c0 = int(round_half_away(lay.slot_center(k) - w / 2.0))
    c0 = min(max(c0, 0), lay.width - 1)
    c1 = min(c0 + w, lay.width)
    r_top = int(lay.pixel_row(max(o, c)))
    r_bot = int(lay.pixel_row(min(o, c)))
    if o > c:
        ink[r_top:r_bot + 1, c0:c1] = 1.0
    elif o < c:
        ink[r_top:r_bot + 1, c0:c1] = 0.0
        ink[r_top, c0:c1] = 1.0
        ink[r_bot, c0:c1] = 1.0
        ink[r_top:r_bot + 1, c0] = 1.0
        ink[r_top:r_bot + 1, c1 - 1] = 1.0
    else:
        ink[r_top, c0:c1] = 1.0


def _width_fractions(style: RenderStyle, bars) -> np.ndarray:
    n = len(bars)
    if style is RenderStyle.CANDLE_TIME_WIDTH:
        if n == 1:
            return np.ones(1)
        return MIN_WIDTH_FRACTION + (1 - MIN_WIDTH_FRACTION) * np.arange(n) / (n - 1)
    if style is RenderStyle.CANDLE_VOLUME_WIDTH:
        v = bars.volume
        span = v.max() - v.min()
        if span <= 0:
            return np.ones(n)
        return MIN_WIDTH_FRACTION + (1 - MIN_WIDTH_FRACTION) * (v - v.min()) / span
    return np.full(n, BODY_FRACTION)


def _draw_candles(ink, lay: Layout, bars, style: RenderStyle):
    fracs = _width_fractions(style, bars)
    hi_rows = lay.pixel_row(bars.high)
    lo_rows = lay.pixel_row(bars.low)
    for k in range(len(bars)):
        ink[hi_rows[k]:lo_rows[k] + 1, lay.wick_column(k)] = 1.0
        _body(ink, lay, k, float(bars.open[k]), float(bars.close[k]), fracs[k])
    if style is RenderStyle.CANDLE_PREV_CLOSE:
        prev_rows = lay.pixel_row(bars.close[:-1])
        for k in range(1, len(bars)):
            a, b = lay.slot_columns(k)
            ink[prev_rows[k - 1], a:max(b, a + 1)] = 1.0


def _draw_polyline(ink, xs, ys, half_width: float = LINE_HALF_WIDTH):
    """Stroke a polyline given in pixel-center coordinates.

    A pixel is ink when its center lies in the half-open band
    ``-half_width <= signed distance < half_width`` of some segment, or strictly
    within ``half_width`` of a vertex (fills joints).
    """
    h, w = ink.shape
    hw = half_width
    for i in range(len(xs) - 1):
        ax, ay, bx, by = xs[i], ys[i], xs[i + 1], ys[i + 1]
        c_lo = max(int(np.floor(min(ax, bx) - hw)), 0)
        c_hi = min(int(np.ceil(max(ax, bx) + hw)), w - 1)
        r_lo = max(int(np.floor(min(ay, by) - hw)), 0)
        r_hi = min(int(np.ceil(max(ay, by) + hw)), h - 1)
        cc, rr = np.meshgrid(np.arange(c_lo, c_hi + 1, dtype=np.float64),
                             np.arange(r_lo, r_hi + 1, dtype=np.float64))
        dx, dy = bx - ax, by - ay
        length = np.hypot(dx, dy)
        px, py = cc - ax, rr - ay
        along = (px * dx + py * dy) / length
        across = (px * -dy + py * dx) / length
        hit = (along >= 0) & (along <= length) & (across >= -hw) & (across < hw)
        hit |= np.hypot(px, py) < hw
        hit |= np.hypot(cc - bx, rr - by) < hw
        ink[r_lo:r_hi + 1, c_lo:c_hi + 1][hit] = 1.0


def render(window, style: RenderStyle = RenderStyle.CANDLE_OHLC,
           canvas: tuple[int, int] = (NATIVE_SIDE, NATIVE_SIDE)) -> RasterImage:
    """Rasterize a window sample. Body fill follows the black-bear/white-bull convention."""
    style = RenderStyle(style)
    bars = window_bars(window)
    lay = layout(bars, canvas)
    ink = np.zeros((lay.height, lay.width), dtype=np.float64)
    if style is RenderStyle.CLOSE_LINE:
        xs = lay.slot_center(np.arange(len(bars))) - 0.5
        ys = lay.row(bars.close)
        if len(bars) == 1:
            xs = np.array([xs[0] - 0.5, xs[0] + 0.5])
            ys = np.repeat(ys, 2)
        _draw_polyline(ink, xs, ys)
    else:
        _draw_candles(ink, lay, bars, style)
    meta = {"style": style.value, "ticker": bars.ticker, "end_date": str(bars.dates[-1])}
    rule = getattr(window, "rule", None)
    if rule is not None:
        meta["rule"] = getattr(rule, "value", str(rule))
    return RasterImage(ink, meta)


def save_png(image: RasterImage, path) -> Path:
    from PIL import Image

    path = Path(path)
    lum = np.clip(np.rint(255.0 * (1.0 - image.pixels)), 0, 255).astype(np.uint8)
    Image.fromarray(lum, mode="L").save(path, format="PNG")
    return path


def load_png(path) -> RasterImage:
    from PIL import Image

    with Image.open(path) as im:
        lum = np.asarray(im.convert("L"), dtype=np.float64)
    return RasterImage(1.0 - lum / 255.0, {})


def save_raw(image: RasterImage, path) -> Path:
    """Binary layout: magic ``CSRI``, uint32 width, uint32 height (little-endian),
    then ``width*height`` little-endian float32 values, row-major."""
    path = Path(path)
    payload = np.ascontiguousarray(image.pixels, dtype="<f4").tobytes()
    path.write_bytes(_RAW_HEADER.pack(RAW_MAGIC, image.width, image.height) + payload)
    return path


def load_raw(path) -> RasterImage:
    data = Path(path).read_bytes()
    magic, w, h = _RAW_HEADER.unpack_from(data)
    if magic != RAW_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    body = data[_RAW_HEADER.size:]
    if len(body) != 4 * w * h:
        raise ValueError(f"{path}: truncated payload")
    px = np.frombuffer(body, dtype="<f4").reshape(h, w).astype(np.float64)
    return RasterImage(px, {})

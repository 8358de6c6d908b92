import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chartsignal.market_data import PriceSeries, business_days, generate_synthetic_series
from chartsignal.raster import (CANDLE_STYLES, RasterImage, RenderStyle, layout, load_png,
                                load_raw, render, round_half_away, save_png, save_raw)

STYLES = list(RenderStyle)


def bars(open_, close, high=None, low=None, volume=None, ticker="W"):
    open_, close = np.asarray(open_, float), np.asarray(close, float)
    high = np.maximum(open_, close) if high is None else np.asarray(high, float)
    low = np.minimum(open_, close) if low is None else np.asarray(low, float)
    vol = np.ones(len(close)) if volume is None else np.asarray(volume, float)
    return PriceSeries(ticker, business_days("2021-03-01", len(close)), open_, high, low,
                       close, close, vol)


def zigzag_bears(n=20):
    """Alternating tall bear days so every body spans many rows."""
    o = np.where(np.arange(n) % 2 == 0, 110.0, 108.0)
    return bars(o, o - 8.0)


def transform(s, scale=1.0, shift=0.0):
    f = lambda a: a * scale + shift  # noqa: E731
    return PriceSeries(s.ticker, s.dates, f(s.open), f(s.high), f(s.low), f(s.close),
                       f(s.adj_close), s.volume)


def body_width(img, lay, k, row):
    a, b = lay.slot_columns(k)
    return int(img[row, a:b].sum())


def test_round_half_away():
    assert round_half_away([0.5, 1.5, -0.5, 2.4999]).tolist() == [1, 2, -1, 2]


class TestLayout:
    def test_slot_width(self):
        lay = layout(generate_synthetic_series(0, 20), (240, 240))
        assert lay.slot_width == 12
        assert [lay.slot_columns(k) for k in (0, 19)] == [(0, 12), (228, 240)]

    def test_constant_window_middle_row(self):
        s = bars(np.full(20, 5.0), np.full(20, 5.0))
        img = render(s).pixels
        assert set(np.nonzero(img)[0].tolist()) == {120}
        assert layout(s).row(5.0) == 120

    def test_tight_crop(self):
        s = generate_synthetic_series(9, 20)
        lay = layout(s)
        img = render(s).pixels
        k_hi, k_lo = int(np.argmax(s.high)), int(np.argmin(s.low))
        assert img[0, lay.wick_column(k_hi)] == 1.0
        assert img[239, lay.wick_column(k_lo)] == 1.0
        assert img[0].sum() > 0 and img[-1].sum() > 0

    def test_canvas_too_small(self):
        with pytest.raises(ValueError):
            layout(generate_synthetic_series(0, 20), (7, 240))


class TestCandles:
    def test_bear_body_filled(self):
        s = bars([10, 12, 11], [9, 11.5, 10.2], high=[12.5, 12.5, 12], low=[8, 9, 9])
        lay = layout(s)
        img = render(s).pixels
        top, bot = lay.pixel_row(10), lay.pixel_row(9)
        a, b = lay.slot_columns(0)
        w = int(round_half_away(0.8 * lay.slot_width))
        block = img[top:bot + 1, a:b]
        assert (block.sum(axis=1) == w).all()

    def test_bull_body_hollow(self):
        s = bars([9, 9, 9], [12, 12, 12], high=[13, 13, 13], low=[8, 8, 8])
        lay = layout(s)
        img = render(s).pixels
        top, bot = lay.pixel_row(12), lay.pixel_row(9)
        a, b = lay.slot_columns(1)
        row = img[(top + bot) // 2, a:b]
        assert row.sum() == 2  # left and right outline only
        assert img[top, a:b].sum() == int(round_half_away(0.8 * lay.slot_width))

    def test_doji_single_line(self):
        s = bars([10, 11, 10], [10, 11, 10], high=[12, 12, 12], low=[9, 9, 9])
        lay = layout(s)
        img = render(s).pixels
        a, b = lay.slot_columns(0)
        slot = img[:, a:b]
        wick = lay.wick_column(0) - a
        rows_wide = [r for r in range(240) if slot[r].sum() > 1]
        assert rows_wide == [int(lay.pixel_row(10))]
        assert slot[:, wick].sum() == lay.pixel_row(9) - lay.pixel_row(12) + 1

    def test_time_width_ratio_exact(self):
        s = zigzag_bears(20)
        lay = layout(s, (300, 300))
        img = render(s, RenderStyle.CANDLE_TIME_WIDTH, (300, 300)).pixels
        row = int(lay.pixel_row(105.0))
        left, right = body_width(img, lay, 0, row), body_width(img, lay, 19, row)
        assert (left, right) == (3, 15)
        assert right == 5 * left

    def test_time_width_ratio_native(self):
        s = zigzag_bears(20)
        lay = layout(s)
        img = render(s, RenderStyle.CANDLE_TIME_WIDTH).pixels
        row = int(lay.pixel_row(105.0))
        left, right = body_width(img, lay, 0, row), body_width(img, lay, 19, row)
        assert right == 12
        assert abs(left - 0.2 * 12) <= 1
        assert abs(right - 5 * 0.2 * 12) <= 1

    def test_prev_close_overlay(self):
        s = generate_synthetic_series(21, 20)
        lay = layout(s)
        img = render(s, RenderStyle.CANDLE_PREV_CLOSE).pixels
        base = render(s, RenderStyle.CANDLE_OHLC).pixels
        for k in range(1, 20):
            a, b = lay.slot_columns(k)
            r = lay.pixel_row(s.close[k - 1])
            assert img[r, a:b].all()
        a, b = lay.slot_columns(0)
        np.testing.assert_array_equal(img[:, a:b], base[:, a:b])

    def test_volume_width_constant_volume(self):
        s = zigzag_bears(20)
        lay = layout(s)
        img = render(s, RenderStyle.CANDLE_VOLUME_WIDTH).pixels
        row = int(lay.pixel_row(105.0))
        assert all(body_width(img, lay, k, row) == 12 for k in range(20))

    def test_volume_width_monotone(self):
        rng = np.random.default_rng(4)
        o = np.where(np.arange(20) % 2 == 0, 110.0, 108.0)
        vol = rng.uniform(1e5, 1e6, 20)
        s = bars(o, o - 8.0, volume=vol)
        lay = layout(s)
        img = render(s, RenderStyle.CANDLE_VOLUME_WIDTH).pixels
        row = int(lay.pixel_row(105.0))
        widths = np.array([body_width(img, lay, k, row) for k in range(20)])
        order = np.argsort(vol)
        assert np.all(np.diff(widths[order]) >= 0)
        assert widths[np.argmax(vol)] == 12 and widths[np.argmin(vol)] in (2, 3)


class TestCloseLine:
    def test_constant_is_two_rows(self):
        s = bars(np.full(20, 5.0), np.full(20, 5.0))
        img = render(s, RenderStyle.CLOSE_LINE).pixels
        rows = np.nonzero(img.sum(axis=1))[0].tolist()
        assert rows == [119, 120]
        assert (img[119:121, 6:229] == 1).all()

    def test_line_passes_through_closes(self):
        s = generate_synthetic_series(8, 20)
        lay = layout(s)
        img = render(s, RenderStyle.CLOSE_LINE).pixels
        for k in range(20):
            c = lay.wick_column(k)
            r = int(np.floor(lay.row(s.close[k])))
            assert img[max(r - 1, 0):r + 2, c - 1:c + 1].any()
        # no candle bodies: ink is thin in every column
        assert img.sum(axis=0).max() < 120


@pytest.mark.parametrize("style", STYLES)
def test_values_and_metadata(style):
    img = render(generate_synthetic_series(1, 26), style)
    assert img.pixels.shape == (240, 240)
    assert set(np.unique(img.pixels)) <= {0.0, 1.0}
    assert img.metadata["style"] == style.value


@pytest.mark.parametrize("style", STYLES)
def test_deterministic(style):
    s = generate_synthetic_series(5, 27)
    assert render(s, style).pixels.tobytes() == render(s, style).pixels.tobytes()


windows = st.tuples(st.integers(0, 10_000), st.sampled_from([20, 26, 27, 30]))


@settings(max_examples=60, deadline=None)
@given(windows, st.sampled_from(STYLES), st.floats(0.01, 500.0), st.floats(0.05, 20.0))
def test_translation_and_scale_invariance(win, style, shift, scale):
    s = generate_synthetic_series(*win)
    ref = render(s, style).pixels
    assert np.array_equal(render(transform(s, shift=shift), style).pixels, ref)
    assert np.array_equal(render(transform(s, scale=scale), style).pixels, ref)


@settings(max_examples=40, deadline=None)
@given(windows, st.sampled_from(CANDLE_STYLES))
def test_every_slot_has_ink(win, style):
    s = generate_synthetic_series(*win)
    lay = layout(s)
    img = render(s, style).pixels
    for k in range(len(s)):
        a, b = lay.slot_columns(k)
        assert img[:, a:b].sum() >= 1


def test_png_round_trip(tmp_path):
    img = render(generate_synthetic_series(2, 20))
    p = save_png(img, tmp_path / "a.png")
    from PIL import Image
    with Image.open(p) as im:
        assert im.mode == "L" and im.size == (240, 240)
        lum = np.asarray(im)
    assert set(np.unique(lum)) == {0, 255}
    np.testing.assert_array_equal(load_png(p).pixels, img.pixels)


def test_raw_round_trip(tmp_path):
    img = RasterImage(np.random.default_rng(0).random((7, 9)))
    p = save_raw(img, tmp_path / "a.raw")
    data = p.read_bytes()
    assert data[:4] == b"CSRI" and len(data) == 12 + 4 * 63
    back = load_raw(p)
    assert back.width == 9 and back.height == 7
    np.testing.assert_allclose(back.pixels, img.pixels, atol=1e-7)
    (tmp_path / "bad.raw").write_bytes(b"XXXX" + data[4:])
    with pytest.raises(ValueError):
        load_raw(tmp_path / "bad.raw")

"""Coarse global and fine Sauvola segmentation of the redness channel."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imaging import BinaryMask, RgbImage, ScalarImage, check_same_shape


@dataclass(frozen=True)
class SauvolaParams:
    window: int = 15
    k: float = 0.34
    r_cap: float = 128.0

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError(f"window must be odd and >= 3, got {self.window}")
        if not 0.2 <= self.k <= 0.5:
            raise ValueError(f"k must lie in [0.2, 0.5], got {self.k}")
        if not self.r_cap > 0:
            raise ValueError(f"r_cap must be positive, got {self.r_cap}")


@dataclass(frozen=True)
class IterativeThresholdParams:
    epsilon: float = 0.5
    max_iterations: int = 100

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


def redness_map(img: RgbImage) -> ScalarImage:
    """Per-pixel ``R - (G + B) / 2`` clamped to [0, 255]."""
    d = img.data.astype(np.float64)
    red = d[:, :, 0] - (d[:, :, 1] + d[:, :, 2]) / 2.0
    return ScalarImage(np.clip(red, 0.0, 255.0))


def iterative_global_threshold(map: ScalarImage, params: IterativeThresholdParams = IterativeThresholdParams()):
    """Mean-of-class-means threshold, iterated until T moves less than epsilon.

    Returns ``(threshold, mask)`` with foreground ``value > threshold``.
    An empty class borrows the other class's mean, so a constant map gives
    ``T = v`` and no foreground.
    """
    values = map.data.ravel()
    t = float(values.mean())
    for _ in range(params.max_iterations):
        below = values <= t
        n_lo = int(below.sum())
        n_hi = values.size - n_lo
        m_lo = float(values[below].mean()) if n_lo else None
        m_hi = float(values[~below].mean()) if n_hi else None
        if m_lo is None:
            m_lo = m_hi
        if m_hi is None:
            m_hi = m_lo
        t_new = (m_lo + m_hi) / 2.0
        done = abs(t_new - t) < params.epsilon
        t = t_new
        if done:
            break
    return t, BinaryMask(map.data > t)


def _window_bounds(n, radius, at):
    lo = np.clip(at - radius, 0, n)
    hi = np.clip(at + radius + 1, 0, n)
    return lo, hi


def window_stats(values, window, rows=None, cols=None):
    """Mean and population std over clipped ``window x window`` boxes.

    Uses summed-area tables, so cost is independent of the window size.
    Integer-valued inputs are summed in int64, which keeps uniform windows
    at exactly zero variance.
    """
    values = np.asarray(values, dtype=np.float64)
    h, w = values.shape
    rows = np.arange(h) if rows is None else np.asarray(rows)
    cols = np.arange(w) if cols is None else np.asarray(cols)
    radius = window // 2
    y0, y1 = _window_bounds(h, radius, rows)
    x0, x1 = _window_bounds(w, radius, cols)
    count = ((y1 - y0)[:, None] * (x1 - x0)[None, :]).astype(np.int64)

    exact = np.all(values == np.round(values)) and np.abs(values).max() < 2**20
    if exact:
        v = values.astype(np.int64)
        shift = 0.0
    else:
        shift = float(values.mean())
        v = values - shift
    s1 = _box_sum(_integral(v), y0, y1, x0, x1)
    s2 = _box_sum(_integral(v * v), y0, y1, x0, x1)

    if exact:
        mean = s1 / count
        var = (count * s2 - s1 * s1) / (count * count).astype(np.float64)
    else:
        local = s1 / count
        mean = local + shift
        var = s2 / count - local * local
    np.maximum(var, 0.0, out=var)
    return mean, np.sqrt(var)


def _integral(v):
    sat = np.zeros((v.shape[0] + 1, v.shape[1] + 1), dtype=v.dtype)
    np.cumsum(np.cumsum(v, axis=0), axis=1, out=sat[1:, 1:])
    return sat


def _box_sum(sat, y0, y1, x0, x1):
    return (sat[np.ix_(y1, x1)] - sat[np.ix_(y0, x1)]
            - sat[np.ix_(y1, x0)] + sat[np.ix_(y0, x0)])


def sauvola_formula(mean, std, params: SauvolaParams):
    return mean * (1.0 + params.k * (std / params.r_cap - 1.0))


def sauvola_threshold_map(map: ScalarImage, params: SauvolaParams = SauvolaParams()) -> ScalarImage:
    """Per-pixel Sauvola threshold ``m * (1 + k * (s / R - 1))``."""
    mean, std = window_stats(map.data, params.window)
    return ScalarImage(sauvola_formula(mean, std, params))


def _lattice(n, stride):
    pts = np.arange(0, n, stride)
    if pts[-1] != n - 1:
        pts = np.append(pts, n - 1)
    return pts


def _interp_axis(values, lattice, n, axis):
    # linear interpolation of ``values`` (sampled at ``lattice``) onto 0..n-1
    pos = np.arange(n)
    seg = np.clip(np.searchsorted(lattice, pos, side="right") - 1, 0, len(lattice) - 1)
    nxt = np.minimum(seg + 1, len(lattice) - 1)
    span = (lattice[nxt] - lattice[seg]).astype(np.float64)
    frac = np.where(span > 0, (pos - lattice[seg]) / np.where(span > 0, span, 1.0), 0.0)
    lo = np.take(values, seg, axis=axis)
    hi = np.take(values, nxt, axis=axis)
    shape = [1, 1]
    shape[axis] = n
    frac = frac.reshape(shape)
    return lo * (1.0 - frac) + hi * frac


def sauvola_threshold_map_interpolated(map: ScalarImage, params: SauvolaParams = SauvolaParams(),
                                       stride: int = 1) -> ScalarImage:
    """Exact thresholds on a stride-spaced lattice, bilinear in between.

    The lattice always includes the last row and column. With ``stride=1``
    every pixel is a lattice point and the result equals the exact map.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if stride == 1:
        return sauvola_threshold_map(map, params)
    h, w = map.shape
    rows = _lattice(h, stride)
    cols = _lattice(w, stride)
    mean, std = window_stats(map.data, params.window, rows, cols)
    coarse = sauvola_formula(mean, std, params)
    across = _interp_axis(coarse, cols, w, axis=1)
    full = _interp_axis(across, rows, h, axis=0)
    return ScalarImage(full)


def binarize(map: ScalarImage, thresholds: ScalarImage) -> BinaryMask:
    """Foreground where the value is strictly above its threshold."""
    check_same_shape(map, thresholds)
    return BinaryMask(map.data > thresholds.data)


def merge_masks(coarse: BinaryMask, fine: BinaryMask, mode: str = "and") -> BinaryMask:
    check_same_shape(coarse, fine)
    if mode == "and":
        return BinaryMask(coarse.data & fine.data)
    if mode == "or":
        return BinaryMask(coarse.data | fine.data)
    raise ValueError(f"merge mode must be 'and' or 'or', got {mode!r}")

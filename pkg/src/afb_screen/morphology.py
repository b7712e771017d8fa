"""8-connected component labeling and size filtering."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .imaging import BinaryMask


@dataclass(eq=False)
class Component:
    """One labeled blob.

    ``pixels`` is an ``(n, 2)`` int array of ``(x, y)`` in raster order;
    ``bbox`` is ``(x_min, y_min, x_max, y_max)`` inclusive.
    """

    label: int
    pixels: np.ndarray
    bbox: tuple = field(init=False)
    centroid: tuple = field(init=False)

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.int64).reshape(-1, 2)
        if len(px) == 0:
            raise ValueError("component has no pixels")
        self.pixels = px
        self.bbox = (int(px[:, 0].min()), int(px[:, 1].min()),
                     int(px[:, 0].max()), int(px[:, 1].max()))
        self.centroid = (float(px[:, 0].mean()), float(px[:, 1].mean()))

    @property
    def area(self) -> int:
        return len(self.pixels)

    def local_mask(self, pad=1):
        """Component rasterized into its bbox with ``pad`` background pixels around."""
        x0, y0, x1, y1 = self.bbox
        m = np.zeros((y1 - y0 + 1 + 2 * pad, x1 - x0 + 1 + 2 * pad), dtype=np.uint8)
        m[self.pixels[:, 1] - y0 + pad, self.pixels[:, 0] - x0 + pad] = 1
        return m

    def translated(self, dx, dy):
        return Component(self.label, self.pixels + np.array([dx, dy]))


def label_components(mask: BinaryMask):
    """Label 8-connected foreground regions.

    Components are ordered by bbox ``(y_min, x_min)``, ties broken by the
    first pixel in raster order, and relabeled 1..n in that order.
    """
    labels, n = _kernels.label8(mask.data)
    if n == 0:
        return []
    ys, xs = np.nonzero(labels)
    labs = labels[ys, xs]
    order = np.argsort(labs, kind="stable")  # keeps raster order within a label
    bounds = np.searchsorted(labs[order], np.arange(1, n + 2))
    groups = []
    for i in range(n):
        idx = order[bounds[i]:bounds[i + 1]]
        gx, gy = xs[idx], ys[idx]
        first = int(gy[0]) * labels.shape[1] + int(gx[0])
        groups.append(((int(gy.min()), int(gx.min()), first), np.column_stack([gx, gy])))
    groups.sort(key=lambda g: g[0])
    return [Component(i + 1, px) for i, (_, px) in enumerate(groups)]


def remove_small(components, min_area: int = 5):
    """Drop components with fewer than ``min_area`` pixels; order is kept."""
    if min_area < 1:
        raise ValueError("min_area must be >= 1")
    return [c for c in components if c.area >= min_area]


def components_to_mask(components, shape) -> BinaryMask:
    out = np.zeros(shape, dtype=bool)
    for c in components:
        out[c.pixels[:, 1], c.pixels[:, 0]] = True
    return BinaryMask(out)

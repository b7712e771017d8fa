"""Shape descriptors for labeled blobs and gate-based bacillus/debris classification."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from . import _kernels
from .errors import DegenerateMoments
from .morphology import Component

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class ShapeDescriptors:
    area: int
    perimeter: float
    circularity: float
    roughness: float
    major_axis_length: float
    minor_axis_length: float
    eccentricity: float
    convex_hull_perimeter: float

    @property
    def axis_ratio(self) -> float:
        """Major over minor axis length; ``inf`` for one-pixel-wide lines."""
        if self.minor_axis_length == 0:
            return math.inf
        return self.major_axis_length / self.minor_axis_length

    def as_dict(self):
        d = asdict(self)
        d["axis_ratio"] = self.axis_ratio
        return d

    def get(self, name):
        if name == "axis_ratio":
            return self.axis_ratio
        return getattr(self, name)


DESCRIPTOR_NAMES = (
    "area", "perimeter", "circularity", "roughness", "major_axis_length",
    "minor_axis_length", "eccentricity", "convex_hull_perimeter", "axis_ratio",
)


class Verdict(str, Enum):
    BACILLUS = "bacillus"
    DEBRIS = "debris"


@dataclass(frozen=True)
class ClassifierGates:
    """Inclusive ``(min, max)`` acceptance interval per descriptor name."""

    intervals: dict = field(default_factory=lambda: dict(DEFAULT_GATES))

    def __post_init__(self):
        clean = {}
        for name, (lo, hi) in self.intervals.items():
            if name not in DESCRIPTOR_NAMES:
                raise ValueError(f"unknown descriptor gate {name!r}")
            lo, hi = float(lo), float(hi)
            if lo > hi:
                raise ValueError(f"gate {name}: min {lo} exceeds max {hi}")
            clean[name] = (lo, hi)
        object.__setattr__(self, "intervals", clean)

    def names(self):
        return list(self.intervals)


# Uncalibrated fallbacks; the shipped default.conf carries calibrated values.
DEFAULT_GATES = {
    "area": (50.0, 2500.0),
    "eccentricity": (0.85, 1.0),
    "circularity": (0.0, 0.5),
    "roughness": (0.5, 1.0),
    "major_axis_length": (15.0, 120.0),
}


@dataclass(eq=False)
class Detection:
    component: Component
    descriptors: ShapeDescriptors
    verdict: Verdict
    rejected_by: list

    def __post_init__(self):
        if (self.verdict is Verdict.BACILLUS) != (not self.rejected_by):
            raise ValueError("verdict must be bacillus iff no gate rejected it")


def trace_contour(c: Component) -> np.ndarray:
    """Outer boundary of the component by Moore neighbour tracing.

    Returns an ``(m, 2)`` array of ``(x, y)``; the contour is closed, the
    last point connects back to the first.
    """
    x0, y0 = c.bbox[0], c.bbox[1]
    local = _kernels.trace_moore(c.local_mask(pad=1))
    return local + np.array([x0 - 1, y0 - 1], dtype=np.int64)


def contour_perimeter(contour) -> float:
    """Closed chain length, axial steps 1 and diagonal steps sqrt(2).

    A single-pixel contour has perimeter 4 by convention.
    """
    pts = np.asarray(contour)
    if len(pts) <= 1:
        return 4.0
    steps = np.abs(np.diff(np.vstack([pts, pts[:1]]), axis=0)).sum(axis=1)
    n_diag = int((steps == 2).sum())
    n_axial = int((steps == 1).sum())
    return n_axial + n_diag * SQRT2


def convex_hull(points) -> np.ndarray:
    """Andrew's monotone chain; returns hull vertices counter-clockwise, collinear points dropped."""
    pts = sorted(set(map(tuple, np.asarray(points).tolist())))
    if len(pts) <= 2:
        return np.array(pts, dtype=np.int64).reshape(-1, 2)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1], dtype=np.int64)


def polygon_perimeter(vertices) -> float:
    v = np.asarray(vertices, dtype=np.float64)
    if len(v) < 2:
        return 0.0
    d = np.diff(np.vstack([v, v[:1]]), axis=0)
    return float(np.hypot(d[:, 0], d[:, 1]).sum())


def second_moments(pixels):
    """Eigenvalues ``(l1, l2)``, ``l1 >= l2``, of the population covariance of pixel coordinates."""
    px = np.asarray(pixels, dtype=np.int64)
    n = len(px)
    sx, sy = int(px[:, 0].sum()), int(px[:, 1].sum())
    # exact integer central moments scaled by n^2
    a = (n * int((px[:, 0] * px[:, 0]).sum()) - sx * sx) / (n * n)
    c = (n * int((px[:, 1] * px[:, 1]).sum()) - sy * sy) / (n * n)
    b = (n * int((px[:, 0] * px[:, 1]).sum()) - sx * sy) / (n * n)
    half_sum = (a + c) / 2.0
    root = math.hypot((a - c) / 2.0, b)
    l1 = half_sum + root
    l2 = max(half_sum - root, 0.0)
    return l1, l2


def compute_descriptors(c: Component) -> ShapeDescriptors:
    area = c.area
    contour = trace_contour(c)
    perimeter = contour_perimeter(contour)
    l1, l2 = second_moments(c.pixels)
    if l1 <= 0:
        raise DegenerateMoments(f"component {c.label} has zero spatial variance")
    hull_perimeter = polygon_perimeter(convex_hull(contour))
    return ShapeDescriptors(
        area=area,
        perimeter=perimeter,
        circularity=4.0 * math.pi * area / (perimeter * perimeter),
        roughness=hull_perimeter / perimeter,
        major_axis_length=4.0 * math.sqrt(l1),
        minor_axis_length=4.0 * math.sqrt(l2),
        eccentricity=math.sqrt(max(0.0, 1.0 - l2 / l1)),
        convex_hull_perimeter=hull_perimeter,
    )


def classify(d: ShapeDescriptors, gates: ClassifierGates):
    """Return ``(verdict, rejected_by)``; a descriptor outside its inclusive interval rejects."""
    rejected = [name for name, (lo, hi) in gates.intervals.items()
                if not lo <= d.get(name) <= hi]
    return (Verdict.DEBRIS if rejected else Verdict.BACILLUS), rejected


def detect(c: Component, gates: ClassifierGates) -> Detection:
    d = compute_descriptors(c)
    verdict, rejected = classify(d, gates)
    return Detection(c, d, verdict, rejected)

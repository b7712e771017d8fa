"""Object-level sensitivity and specificity against synthetic ground truth.

A bacillus detection is matched to a ground-truth rod by greedy one-to-one
pairing on centroid distance. True negatives are debris objects that no
bacillus detection overlaps; there is no pixel-level scoring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .features import Verdict


@dataclass
class EvalResult:
    tp: int = 0
    fn: int = 0
    fp: int = 0
    tn: int = 0
    per_image: list = field(default_factory=list)

    @property
    def sensitivity(self):
        d = self.tp + self.fn
        return self.tp / d if d else None

    @property
    def specificity(self):
        d = self.tn + self.fp
        return self.tn / d if d else None

    def counts(self):
        return {"tp": self.tp, "fn": self.fn, "fp": self.fp, "tn": self.tn}

    def to_dict(self):
        return {**self.counts(), "sensitivity": self.sensitivity,
                "specificity": self.specificity, "per_image": list(self.per_image)}


def greedy_match(det_points, truth_points, tolerance):
    """Pair points closest-first, each used at most once, distance <= tolerance.

    Returns a list of ``(detection_index, truth_index)``.
    """
    pairs = []
    for i, (dx, dy) in enumerate(det_points):
        for j, (tx, ty) in enumerate(truth_points):
            dist = math.hypot(dx - tx, dy - ty)
            if dist <= tolerance:
                pairs.append((dist, i, j))
    pairs.sort()
    used_d, used_t, out = set(), set(), []
    for _, i, j in pairs:
        if i in used_d or j in used_t:
            continue
        used_d.add(i)
        used_t.add(j)
        out.append((i, j))
    return out


def match_detections(detections, scene, tolerance: float = 10.0, image_id: str = "") -> EvalResult:
    bacilli = [d for d in detections if d.verdict is Verdict.BACILLUS]
    rods = [tuple(r.center) for r in scene.rods]
    pairs = greedy_match([d.component.centroid for d in bacilli], rods, tolerance)
    tp = len(pairs)
    fn = len(rods) - tp
    fp = len(bacilli) - tp

    claimed = np.zeros((scene.height, scene.width), dtype=bool)
    for d in bacilli:
        px = d.component.pixels
        claimed[px[:, 1], px[:, 0]] = True
    tn = 0
    for deb in scene.debris:
        px = deb.silhouette()
        inside = (px[:, 0] >= 0) & (px[:, 0] < scene.width) & (px[:, 1] >= 0) & (px[:, 1] < scene.height)
        px = px[inside]
        if not claimed[px[:, 1], px[:, 0]].any():
            tn += 1
    row = {"image_id": image_id, "tp": tp, "fn": fn, "fp": fp, "tn": tn}
    return EvalResult(tp, fn, fp, tn, [row])


def aggregate(results) -> EvalResult:
    """Pool counts over images; rates follow from the pooled counts."""
    results = list(results)
    if not results:
        raise ValueError("need at least one result")
    out = EvalResult()
    for r in results:
        out.tp += r.tp
        out.fn += r.fn
        out.fp += r.fp
        out.tn += r.tn
        out.per_image.extend(r.per_image)
    return out

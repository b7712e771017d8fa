"""Derive classifier gates from descriptor distributions on synthetic rods."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .config import PipelineConfig
from .evaluate import greedy_match
from .features import ClassifierGates, compute_descriptors
from .pipeline import segment
from .synthgen import GeneratorParams, corpus_params, generate_scene

# descriptors with a natural bound on one side are gated only on the other
TWO_SIDED = ("area", "major_axis_length")
LOWER_ONLY = {"eccentricity": 1.0, "roughness": 1.0}
UPPER_ONLY = {"circularity": 0.0}
DECIMALS = 4


@dataclass
class CalibrationSample:
    rods: dict
    debris: dict


def _descriptor_table(descs, names):
    return {n: [getattr(d, n) for d in descs] for n in names}


def collect_descriptors(cfg: PipelineConfig, base: GeneratorParams, n_images: int) -> CalibrationSample:
    """Segment every image of the corpus and split component descriptors by ground truth."""
    names = TWO_SIDED + tuple(LOWER_ONLY) + tuple(UPPER_ONLY)
    rods, debris = [], []
    for i in range(n_images):
        img, scene = generate_scene(corpus_params(base, i))
        comps = segment(img, cfg).components
        descs = [compute_descriptors(c) for c in comps]
        pairs = greedy_match([c.centroid for c in comps], [r.center for r in scene.rods], cfg.tolerance)
        matched = {i for i, _ in pairs}
        rods.extend(descs[i] for i in sorted(matched))
        debris.extend(d for i, d in enumerate(descs) if i not in matched)
    return CalibrationSample(_descriptor_table(rods, names), _descriptor_table(debris, names))


def _floor(v):
    q = 10 ** DECIMALS
    return math.floor(v * q) / q


def _ceil(v):
    q = 10 ** DECIMALS
    return math.ceil(v * q) / q


def gates_from_sample(rods: dict, low: float = 1.0, high: float = 99.0,
                      margin: float = 0.15) -> ClassifierGates:
    """Percentile gates on the rod class.

    Each bound is relaxed by the relative ``margin`` (``lo * (1 - margin)``,
    ``hi * (1 + margin)``) to absorb sampling noise in the tails, then
    clipped to the descriptor's natural range.
    """
    def bounds(name):
        values = np.asarray(rods[name], dtype=np.float64)
        lo, hi = (float(v) for v in np.percentile(values, [low, high]))
        return lo * (1.0 - margin), hi * (1.0 + margin)

    intervals = {}
    for name in TWO_SIDED:
        lo, hi = bounds(name)
        intervals[name] = (_floor(max(lo, 0.0)), _ceil(hi))
    for name, top in LOWER_ONLY.items():
        intervals[name] = (_floor(max(bounds(name)[0], 0.0)), top)
    for name, bottom in UPPER_ONLY.items():
        intervals[name] = (bottom, _ceil(bounds(name)[1]))
    return ClassifierGates(intervals)


def calibrate(cfg: PipelineConfig, seed: int):
    """Run the calibration corpus and return ``(gates, sample)``."""
    cal = cfg.calibration
    base = replace(cfg.synth, seed=seed, n_rods=cal.rods_per_image,
                   n_debris=cal.debris_per_image, allow_touching=False)
    sample = collect_descriptors(cfg, base, cal.n_images)
    if not sample.rods["area"]:
        raise RuntimeError("calibration corpus produced no rod detections")
    gates = gates_from_sample(sample.rods, cal.percentile_low, cal.percentile_high, cal.margin)
    return gates, sample


def acceptance_rate(cfg: PipelineConfig, gates: ClassifierGates, seed: int, n_images: int = 20) -> float:
    """Fraction of segmented rods in a rod-only corpus that pass ``gates``."""
    from .features import classify
    base = replace(cfg.synth, seed=seed, n_rods=cfg.calibration.rods_per_image,
                   n_debris=0, allow_touching=False)
    accepted = total = 0
    for i in range(n_images):
        img, scene = generate_scene(corpus_params(base, i))
        comps = segment(img, cfg).components
        pairs = greedy_match([c.centroid for c in comps], [r.center for r in scene.rods], cfg.tolerance)
        for ci, _ in pairs:
            verdict, _ = classify(compute_descriptors(comps[ci]), gates)
            accepted += verdict.value == "bacillus"
        total += len(scene.rods)
    return accepted / total

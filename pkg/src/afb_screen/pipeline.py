"""Single-image detection pipeline, from RGB field of view to FovReport."""

from __future__ import annotations

from dataclasses import dataclass

from .config import PipelineConfig
from .features import ClassifierGates, detect
from .imaging import BinaryMask, ContrastStretchSpec, RgbImage, ScalarImage, enhance
from .morphology import label_components, remove_small
from .report import FovReport
from .threshold import (
    binarize,
    iterative_global_threshold,
    merge_masks,
    redness_map,
    sauvola_threshold_map_interpolated,
)


@dataclass(eq=False)
class Segmentation:
    enhanced: RgbImage
    redness: ScalarImage
    coarse_threshold: float
    coarse: BinaryMask
    fine: BinaryMask
    merged: BinaryMask
    components: list


def segment(img: RgbImage, cfg: PipelineConfig) -> Segmentation:
    enhanced = enhance(img, ContrastStretchSpec(cfg.stretch_min, cfg.stretch_max))
    red = redness_map(enhanced)
    t, coarse = iterative_global_threshold(red, cfg.coarse)
    fine = binarize(red, sauvola_threshold_map_interpolated(red, cfg.sauvola, cfg.stride))
    merged = merge_masks(coarse, fine, cfg.merge)
    components = remove_small(label_components(merged), cfg.min_area)
    return Segmentation(enhanced, red, t, coarse, fine, merged, components)


def detections_for(components, gates: ClassifierGates):
    return [detect(c, gates) for c in components]


def analyze_image(img: RgbImage, cfg: PipelineConfig, image_id: str = "") -> FovReport:
    seg = segment(img, cfg)
    return FovReport(
        image_id=image_id,
        detections=detections_for(seg.components, cfg.gates),
        parameters_digest=cfg.digest(),
        width=img.width,
        height=img.height,
    )

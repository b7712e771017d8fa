"""Pipeline configuration: a flat, sectioned ``key = value`` text file.

Keys before the first ``[section]`` header are top-level; inside a section
they are prefixed with ``section.``. ``#`` and ``;`` start comments.
Unknown keys and invalid values are rejected with the offending line.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, replace
from importlib import resources

from .errors import ConfigError
from .features import DESCRIPTOR_NAMES, ClassifierGates
from .synthgen import GeneratorParams
from .threshold import IterativeThresholdParams, SauvolaParams

ENV_VAR = "AFB_SCREEN_CONFIG"


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _merge_mode(text):
    if text not in ("and", "or"):
        raise ValueError(f"expected 'and' or 'or', got {text!r}")
    return text


def _path(text):
    return text or None


# key -> converter; every recognised key is listed here
SCHEMA = {
    "merge": _merge_mode,
    "enhance.out_min": float,
    "enhance.out_max": float,
    "sauvola.window": int,
    "sauvola.k": float,
    "sauvola.r": float,
    "sauvola.stride": int,
    "coarse.epsilon": float,
    "coarse.max_iterations": int,
    "morphology.min_area": int,
    "grading.min_fields": int,
    "evaluate.tolerance": float,
    "overlay.enabled": _bool,
    "overlay.debris": _bool,
    "calibrate.n_images": int,
    "calibrate.rods_per_image": int,
    "calibrate.debris_per_image": int,
    "calibrate.percentile_low": float,
    "calibrate.percentile_high": float,
    "calibrate.margin": float,
    "synth.width": int,
    "synth.height": int,
    "synth.n_rods": int,
    "synth.n_debris": int,
    "synth.rod_length_min": float,
    "synth.rod_length_max": float,
    "synth.rod_thickness_min": float,
    "synth.rod_thickness_max": float,
    "synth.noise_sigma": float,
    "synth.clearance": int,
    "io.input_dir": _path,
    "io.output_dir": _path,
    "records.path": _path,
}
for _name in DESCRIPTOR_NAMES:
    SCHEMA[f"gates.{_name}.min"] = float
    SCHEMA[f"gates.{_name}.max"] = float


def parse_text(text: str, path=None):
    """Parse config text into ``{key: (raw_value, line_number)}``."""
    entries = {}
    section = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise ConfigError(f"malformed section header {line!r}", lineno, path)
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno, path)
        key, value = (part.strip() for part in line.split("=", 1))
        full = f"{section}.{key}" if section else key
        if full not in SCHEMA:
            raise ConfigError(f"unknown key {full!r}", lineno, path)
        if full in entries:
            raise ConfigError(f"duplicate key {full!r}", lineno, path)
        entries[full] = (value, lineno)
    return entries


@dataclass(frozen=True)
class CalibrationSettings:
    n_images: int = 20
    rods_per_image: int = 10
    debris_per_image: int = 10
    percentile_low: float = 1.0
    percentile_high: float = 99.0
    margin: float = 0.15

    def __post_init__(self):
        if self.n_images < 1 or self.rods_per_image < 1 or self.debris_per_image < 0:
            raise ValueError("calibration corpus sizes must be positive")
        if not 0 <= self.percentile_low < self.percentile_high <= 100:
            raise ValueError("need 0 <= percentile_low < percentile_high <= 100")
        if self.margin < 0:
            raise ValueError("margin must be >= 0")


@dataclass(frozen=True)
class PipelineConfig:
    sauvola: SauvolaParams = SauvolaParams()
    stride: int = 1
    coarse: IterativeThresholdParams = IterativeThresholdParams()
    merge: str = "and"
    stretch_min: float = 0.0
    stretch_max: float = 255.0
    min_area: int = 5
    gates: ClassifierGates = field(default_factory=ClassifierGates)
    min_fields: int = 100
    tolerance: float = 10.0
    overlay: bool = True
    overlay_debris: bool = False
    synth: GeneratorParams = GeneratorParams()
    calibration: CalibrationSettings = CalibrationSettings()
    input_dir: str | None = None
    output_dir: str | None = None
    records_path: str | None = None

    def detection_parameters(self) -> dict:
        """Every parameter that can change a field-of-view report."""
        return {
            "enhance": {"out_min": self.stretch_min, "out_max": self.stretch_max},
            "sauvola": {"window": self.sauvola.window, "k": self.sauvola.k,
                        "r": self.sauvola.r_cap, "stride": self.stride},
            "coarse": {"epsilon": self.coarse.epsilon,
                       "max_iterations": self.coarse.max_iterations},
            "merge": self.merge,
            "morphology": {"min_area": self.min_area},
            "gates": {k: list(v) for k, v in sorted(self.gates.intervals.items())},
        }

    def digest(self) -> str:
        blob = json.dumps(self.detection_parameters(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _convert(entries, path):
    values = {}
    for key, (raw, lineno) in entries.items():
        try:
            values[key] = SCHEMA[key](raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}", lineno, path) from None
    return values


def _first_line(entries, prefix):
    lines = [ln for k, (_, ln) in entries.items() if k == prefix or k.startswith(prefix + ".")]
    return min(lines) if lines else None


def build_config(values: dict, entries=None, path=None, base: PipelineConfig | None = None) -> PipelineConfig:
    """Apply converted ``values`` on top of ``base``, enforcing parameter invariants."""
    base = base if base is not None else PipelineConfig()
    entries = entries or {}

    def guard(prefix, make):
        try:
            return make()
        except ValueError as exc:
            raise ConfigError(f"{prefix}: {exc}", _first_line(entries, prefix), path) from None

    get = values.get
    sauvola = guard("sauvola", lambda: SauvolaParams(
        window=get("sauvola.window", base.sauvola.window),
        k=get("sauvola.k", base.sauvola.k),
        r_cap=get("sauvola.r", base.sauvola.r_cap)))
    stride = get("sauvola.stride", base.stride)
    if stride < 1:
        raise ConfigError("sauvola.stride must be >= 1", _first_line(entries, "sauvola.stride"), path)
    coarse = guard("coarse", lambda: IterativeThresholdParams(
        epsilon=get("coarse.epsilon", base.coarse.epsilon),
        max_iterations=get("coarse.max_iterations", base.coarse.max_iterations)))
    out_min = get("enhance.out_min", base.stretch_min)
    out_max = get("enhance.out_max", base.stretch_max)
    if not 0 <= out_min < out_max <= 255:
        raise ConfigError("enhance: need 0 <= out_min < out_max <= 255", _first_line(entries, "enhance"), path)
    min_area = get("morphology.min_area", base.min_area)
    if min_area < 1:
        raise ConfigError("morphology.min_area must be >= 1", _first_line(entries, "morphology"), path)

    intervals = dict(base.gates.intervals)
    for name in DESCRIPTOR_NAMES:
        lo = get(f"gates.{name}.min")
        hi = get(f"gates.{name}.max")
        if lo is None and hi is None:
            continue
        old = intervals.get(name, (float("-inf"), float("inf")))
        intervals[name] = (old[0] if lo is None else lo, old[1] if hi is None else hi)
    gates = guard("gates", lambda: ClassifierGates(intervals))

    min_fields = get("grading.min_fields", base.min_fields)
    if min_fields < 1:
        raise ConfigError("grading.min_fields must be >= 1", _first_line(entries, "grading"), path)
    tolerance = get("evaluate.tolerance", base.tolerance)
    if tolerance <= 0:
        raise ConfigError("evaluate.tolerance must be positive", _first_line(entries, "evaluate"), path)

    s = base.synth
    synth = guard("synth", lambda: replace(
        s,
        width=get("synth.width", s.width), height=get("synth.height", s.height),
        n_rods=get("synth.n_rods", s.n_rods), n_debris=get("synth.n_debris", s.n_debris),
        rod_length=(get("synth.rod_length_min", s.rod_length[0]), get("synth.rod_length_max", s.rod_length[1])),
        rod_thickness=(get("synth.rod_thickness_min", s.rod_thickness[0]),
                       get("synth.rod_thickness_max", s.rod_thickness[1])),
        noise_sigma=get("synth.noise_sigma", s.noise_sigma),
        clearance=get("synth.clearance", s.clearance)))
    c = base.calibration
    calibration = guard("calibrate", lambda: CalibrationSettings(
        n_images=get("calibrate.n_images", c.n_images),
        rods_per_image=get("calibrate.rods_per_image", c.rods_per_image),
        debris_per_image=get("calibrate.debris_per_image", c.debris_per_image),
        percentile_low=get("calibrate.percentile_low", c.percentile_low),
        percentile_high=get("calibrate.percentile_high", c.percentile_high),
        margin=get("calibrate.margin", c.margin)))

    return PipelineConfig(
        sauvola=sauvola, stride=stride, coarse=coarse,
        merge=get("merge", base.merge), stretch_min=out_min, stretch_max=out_max,
        min_area=min_area, gates=gates, min_fields=min_fields, tolerance=tolerance,
        overlay=get("overlay.enabled", base.overlay),
        overlay_debris=get("overlay.debris", base.overlay_debris),
        synth=synth, calibration=calibration,
        input_dir=get("io.input_dir", base.input_dir),
        output_dir=get("io.output_dir", base.output_dir),
        records_path=get("records.path", base.records_path),
    )


def loads(text: str, path=None, base: PipelineConfig | None = None) -> PipelineConfig:
    entries = parse_text(text, path)
    return build_config(_convert(entries, path), entries, path, base)


def default_text() -> str:
    return resources.files("afb_screen").joinpath("data/default.conf").read_text(encoding="utf-8")


def default_config() -> PipelineConfig:
    return loads(default_text(), path="default.conf")


def load_config(path=None) -> PipelineConfig:
    """Load ``path`` (or ``$AFB_SCREEN_CONFIG``) layered over the shipped defaults."""
    base = default_config()
    path = path or os.environ.get(ENV_VAR) or None
    if path is None:
        return base
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", path=path) from None
    return loads(text, path=str(path), base=base)


def gates_fragment(gates: ClassifierGates) -> str:
    lines = ["[gates]"]
    for name in DESCRIPTOR_NAMES:
        if name in gates.intervals:
            lo, hi = gates.intervals[name]
            lines.append(f"{name}.min = {lo!r}")
            lines.append(f"{name}.max = {hi!r}")
    return "\n".join(lines) + "\n"

"""``afb-screen`` command line: detect, grade, synth, calibrate, evaluate, version."""

from __future__ import annotations

import json
import logging
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import click

from . import __version__, _kernels
from .config import PipelineConfig, gates_fragment, load_config
from .errors import AfbError, ConfigError, InsufficientFields, StoreUnavailable
from .evaluate import aggregate, match_detections
from .imaging import read_image, write_png
from .pipeline import analyze_image
from .report import ClinicalRecord, append_record, build_smear_report, render_overlay
from .synthgen import SyntheticScene, corpus_params, generate_scene, scene_sidecar

log = logging.getLogger("afb_screen")

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2
EXIT_STORE = 3

IMAGE_SUFFIXES = (".png", ".ppm")
REPORT_SUFFIX = ".report.json"
OVERLAY_SUFFIX = ".overlay.png"
TRUTH_SUFFIX = ".truth.json"


def _write_text(path: Path, text: str):
    path.write_text(text, encoding="utf-8")


def collect_images(inputs):
    """Expand files and directories into a sorted, de-duplicated image list."""
    found = []
    for item in inputs:
        p = Path(item)
        if p.is_dir():
            found.extend(q for q in p.iterdir() if q.suffix.lower() in IMAGE_SUFFIXES)
        else:
            found.append(p)
    return sorted(set(found))


def detect_one(path, cfg: PipelineConfig, out_dir, overlay: bool):
    """Process a single image; returns ``(image_id, error_message or None)``."""
    path = Path(path)
    image_id = path.stem
    try:
        img = read_image(path)
        report = analyze_image(img, cfg, image_id)
        _write_text(Path(out_dir) / f"{image_id}{REPORT_SUFFIX}", report.to_json())
        if overlay:
            write_png(Path(out_dir) / f"{image_id}{OVERLAY_SUFFIX}",
                      render_overlay(img, report, cfg.overlay_debris))
    except (AfbError, OSError) as exc:
        return image_id, str(exc)
    return image_id, None


def run_detect(cfg: PipelineConfig, paths, out_dir, overlay: bool = True, jobs: int = 1):
    """Run the pipeline over ``paths``. Returns ``{image_id: error}`` for failures."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = list(paths)
    if jobs > 1 and len(paths) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(detect_one, paths, [cfg] * len(paths),
                                    [out_dir] * len(paths), [overlay] * len(paths)))
    else:
        results = [detect_one(p, cfg, out_dir, overlay) for p in paths]
    failures = {}
    for image_id, err in results:
        if err is not None:
            log.error("%s: %s", image_id, err)
            failures[image_id] = err
    return failures


def load_counts(report_paths):
    counts = []
    for p in report_paths:
        with open(p, encoding="utf-8") as fh:
            counts.append(int(json.load(fh)["bacilli_count"]))
    return counts


def run_grade(cfg: PipelineConfig, report_paths, smear_id, patient_id=None, records_path=None):
    """Grade one smear from its FOV reports; append a clinical record when a store is set."""
    if not report_paths:
        raise ValueError("need at least one FOV report")
    smear = build_smear_report(smear_id, load_counts(report_paths), cfg.min_fields)
    records_path = records_path or cfg.records_path
    record = None
    if records_path:
        record = ClinicalRecord(patient_id or smear_id, smear_id, smear.grade,
                                pipeline_version=__version__)
        append_record(records_path, record)
    return smear, record


def run_calibrate(cfg: PipelineConfig, seed: int):
    from .calibration import calibrate
    gates, _ = calibrate(cfg, seed)
    return gates


def run_synth(cfg: PipelineConfig, out_dir, seed: int, count: int, touching: bool = False):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    base = replace(cfg.synth, seed=seed, allow_touching=touching)
    written = []
    for i in range(count):
        params = corpus_params(base, i)
        img, scene = generate_scene(params)
        stem = f"fov_{i:04d}"
        write_png(out_dir / f"{stem}.png", img)
        _write_text(out_dir / f"{stem}{TRUTH_SUFFIX}",
                    json.dumps(scene_sidecar(scene, params), indent=2, sort_keys=True) + "\n")
        written.append(stem)
    return written


def run_evaluate(cfg: PipelineConfig, in_dir, tolerance=None):
    in_dir = Path(in_dir)
    tolerance = cfg.tolerance if tolerance is None else tolerance
    results = []
    for truth in sorted(in_dir.glob(f"*{TRUTH_SUFFIX}")):
        stem = truth.name[: -len(TRUTH_SUFFIX)]
        with open(truth, encoding="utf-8") as fh:
            scene = SyntheticScene.from_dict(json.load(fh))
        img = read_image(in_dir / f"{stem}.png")
        report = analyze_image(img, cfg, stem)
        results.append(match_detections(report.detections, scene, tolerance, stem))
    if not results:
        raise ValueError(f"no ground-truth sidecars (*{TRUTH_SUFFIX}) in {in_dir}")
    summary = aggregate(results).to_dict()
    summary["parameters_digest"] = cfg.digest()
    summary["tolerance"] = tolerance
    return summary


# --- click wiring -----------------------------------------------------------

def _config_option(f):
    return click.option("--config", "config_path", type=click.Path(dir_okay=False),
                        help="Configuration file (default: $AFB_SCREEN_CONFIG, then built-in).")(f)


def _load(config_path) -> PipelineConfig:
    try:
        return load_config(config_path)
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)


def _emit(text, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose):
    """Detect, count and grade acid-fast bacilli in ZN smear fields of view."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.argument("inputs", nargs=-1, type=click.Path(exists=True))
@_config_option
@click.option("--out", "out_dir", type=click.Path(file_okay=False), help="Output directory.")
@click.option("--overlay/--no-overlay", default=None, help="Write annotated PNG overlays.")
@click.option("--jobs", default=1, show_default=True, type=click.IntRange(min=1))
def detect(inputs, config_path, out_dir, overlay, jobs):
    """Detect bacilli in images or directories of images."""
    cfg = _load(config_path)
    if not inputs:
        if not cfg.input_dir:
            raise click.UsageError("no inputs given and io.input_dir is not configured")
        inputs = (cfg.input_dir,)
    out_dir = out_dir or cfg.output_dir or "out"
    overlay = cfg.overlay if overlay is None else overlay
    paths = collect_images(inputs)
    failures = run_detect(cfg, paths, out_dir, overlay, jobs)
    click.echo(f"processed {len(paths) - len(failures)}/{len(paths)} images into {out_dir}", err=True)
    sys.exit(EXIT_PARTIAL if failures else EXIT_OK)


@main.command()
@click.argument("reports", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@_config_option
@click.option("--smear-id", required=True)
@click.option("--patient-id", default=None, help="Defaults to the smear id.")
@click.option("--records", "records_path", type=click.Path(dir_okay=False),
              help="Append a clinical record to this log.")
@click.option("--out", type=click.Path(dir_okay=False), help="Write the smear report here.")
def grade(reports, config_path, smear_id, patient_id, records_path, out):
    """Grade a smear from its per-FOV reports."""
    cfg = _load(config_path)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", InsufficientFields)
            smear, _ = run_grade(cfg, list(reports), smear_id, patient_id, records_path)
    except StoreUnavailable as exc:
        click.echo(f"record store error: {exc}", err=True)
        sys.exit(EXIT_STORE)
    for w in caught:
        click.echo(f"warning: {w.message}", err=True)
    _emit(smear.to_json(), out)


@main.command()
@_config_option
@click.option("--out", "out_dir", default="synth", show_default=True, type=click.Path(file_okay=False))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--count", default=1, show_default=True, type=click.IntRange(min=1))
@click.option("--rods", type=click.IntRange(min=0), help="Rods per image.")
@click.option("--debris", type=click.IntRange(min=0), help="Debris objects per image.")
@click.option("--touching", is_flag=True, help="Allow shapes to touch or overlap.")
def synth(config_path, out_dir, seed, count, rods, debris, touching):
    """Write synthetic fields of view with ground-truth sidecars."""
    cfg = _load(config_path)
    s = cfg.synth
    cfg = replace(cfg, synth=replace(s, n_rods=s.n_rods if rods is None else rods,
                                     n_debris=s.n_debris if debris is None else debris))
    try:
        written = run_synth(cfg, out_dir, seed, count, touching)
    except AfbError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"wrote {len(written)} images to {out_dir}", err=True)


@main.command()
@_config_option
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", type=click.Path(dir_okay=False), help="Write the gates fragment here.")
@click.option("--validate/--no-validate", default=True, help="Report acceptance on a held-out rod set.")
def calibrate(config_path, seed, out, validate):
    """Derive classifier gates from a synthetic calibration corpus."""
    cfg = _load(config_path)
    try:
        gates = run_calibrate(cfg, seed)
    except AfbError as exc:
        raise click.ClickException(str(exc))
    header = f"# calibrated gates, seed {seed}\n"
    _emit(header + gates_fragment(gates), out)
    if validate:
        from .calibration import acceptance_rate
        rate = acceptance_rate(replace(cfg, gates=gates), gates, seed + 1)
        click.echo(f"held-out rod acceptance: {rate:.4f}", err=True)


@main.command()
@click.argument("input_dir", type=click.Path(exists=True, file_okay=False))
@_config_option
@click.option("--tolerance", type=float, help="Centroid matching distance in pixels.")
@click.option("--out", type=click.Path(dir_okay=False), help="Write the summary here.")
def evaluate(input_dir, config_path, tolerance, out):
    """Score detections against synthetic ground truth."""
    cfg = _load(config_path)
    try:
        summary = run_evaluate(cfg, input_dir, tolerance)
    except (ValueError, AfbError) as exc:
        raise click.ClickException(str(exc))
    _emit(json.dumps(summary, indent=2, sort_keys=True) + "\n", out)


@main.command()
def version():
    """Print the package version and kernel backend."""
    click.echo(f"afb-screen {__version__} ({_kernels.BACKEND_NAME} kernels)")


if __name__ == "__main__":
    main()

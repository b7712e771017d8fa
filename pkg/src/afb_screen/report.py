"""Per-FOV reports, smear severity grading, overlays and the clinical record log."""

from __future__ import annotations

import fcntl
import json
import os
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum

import numpy as np

from .errors import InsufficientFields, StoreUnavailable
from .features import Verdict
from .imaging import RgbImage


@dataclass(eq=False)
class FovReport:
    image_id: str
    detections: list
    parameters_digest: str
    width: int = 0
    height: int = 0

    @property
    def bacilli_count(self) -> int:
        return sum(1 for d in self.detections if d.verdict is Verdict.BACILLUS)

    def to_dict(self):
        return {
            "image_id": self.image_id,
            "bacilli_count": self.bacilli_count,
            "width": self.width,
            "height": self.height,
            "parameters_digest": self.parameters_digest,
            "detections": [
                {
                    "label": d.component.label,
                    "bbox": list(d.component.bbox),
                    "centroid": [round(v, 6) for v in d.component.centroid],
                    "descriptors": {k: _num(v) for k, v in d.descriptors.as_dict().items()},
                    "verdict": d.verdict.value,
                    "rejected_by": list(d.rejected_by),
                }
                for d in self.detections
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _num(v):
    if isinstance(v, float):
        if v != v or v in (float("inf"), float("-inf")):
            return None
        return round(v, 9)
    return v


class SeverityGrade(str, Enum):
    NEGATIVE = "negative"
    SCANTY = "scanty"
    ONE_PLUS = "1+"
    TWO_PLUS = "2+"
    THREE_PLUS = "3+"

    @property
    def rank(self) -> int:
        return _RANK[self]

    def __lt__(self, other):
        if not isinstance(other, SeverityGrade):
            return NotImplemented
        return self.rank < other.rank

    def __le__(self, other):
        if not isinstance(other, SeverityGrade):
            return NotImplemented
        return self.rank <= other.rank

    # str supplies its own > and >=, so both must be overridden explicitly
    def __gt__(self, other):
        if not isinstance(other, SeverityGrade):
            return NotImplemented
        return self.rank > other.rank

    def __ge__(self, other):
        if not isinstance(other, SeverityGrade):
            return NotImplemented
        return self.rank >= other.rank


_RANK = {g: i for i, g in enumerate(SeverityGrade)}

# fields a grade must be read over before it is conclusive
_FIELDS_FOR_THREE_PLUS = 20
_FIELDS_FOR_TWO_PLUS = 50


def grade_smear(per_fov_counts) -> SeverityGrade:
    """Grade a smear from its per-field AFB counts.

    Rows are tried from most to least severe: >10/field over 20+ fields,
    1-10/field over 50+ fields, 10-99 total, 1-9 total, none. Counts that
    fit no row (too many AFB for 1+ but too few fields for 2+/3+) take the
    grade their per-field average implies, which keeps grading monotone.
    """
    counts = [int(c) for c in per_fov_counts]
    if not counts:
        raise ValueError("need at least one field count")
    if any(c < 0 for c in counts):
        raise ValueError("field counts must be non-negative")
    n = len(counts)
    total = sum(counts)
    # avg > 10 and 1 <= avg <= 10 compared exactly, without float division
    if n >= _FIELDS_FOR_THREE_PLUS and total > 10 * n:
        return SeverityGrade.THREE_PLUS
    if n >= _FIELDS_FOR_TWO_PLUS and n <= total <= 10 * n:
        return SeverityGrade.TWO_PLUS
    if 10 <= total <= 99:
        return SeverityGrade.ONE_PLUS
    if 1 <= total <= 9:
        return SeverityGrade.SCANTY
    if total == 0:
        return SeverityGrade.NEGATIVE
    if total > 10 * n:
        return SeverityGrade.THREE_PLUS
    if total >= n:
        return SeverityGrade.TWO_PLUS
    return SeverityGrade.ONE_PLUS


def fields_required(grade: SeverityGrade, min_fields: int = 100) -> int:
    if grade is SeverityGrade.THREE_PLUS:
        return _FIELDS_FOR_THREE_PLUS
    if grade is SeverityGrade.TWO_PLUS:
        return _FIELDS_FOR_TWO_PLUS
    return min_fields


@dataclass
class SmearReport:
    smear_id: str
    per_fov_counts: list
    grade: SeverityGrade
    provisional: bool = False

    @property
    def fields_examined(self) -> int:
        return len(self.per_fov_counts)

    @property
    def total_afb(self) -> int:
        return sum(self.per_fov_counts)

    def to_dict(self):
        return {
            "smear_id": self.smear_id,
            "fields_examined": self.fields_examined,
            "per_fov_counts": list(self.per_fov_counts),
            "total_afb": self.total_afb,
            "grade": self.grade.value,
            "provisional": self.provisional,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def build_smear_report(smear_id, per_fov_counts, min_fields: int = 100) -> SmearReport:
    """Grade a smear; fewer fields than the grade needs marks it provisional and warns."""
    counts = [int(c) for c in per_fov_counts]
    grade = grade_smear(counts)
    need = fields_required(grade, min_fields)
    provisional = len(counts) < need
    if provisional:
        warnings.warn(f"smear {smear_id}: {grade.value} from {len(counts)} fields, "
                      f"{need} needed for a conclusive grade", InsufficientFields, stacklevel=2)
    return SmearReport(smear_id, counts, grade, provisional)


# --- overlay ----------------------------------------------------------------

BACILLUS_COLOR = (0, 255, 0)
DEBRIS_COLOR = (128, 128, 128)
FRAME = 2
LABEL_SCALE = 2

# 3x5 bitmap digits, rows top to bottom
_GLYPHS = {
    "0": ("111", "101", "101", "101", "111"),
    "1": ("010", "110", "010", "010", "111"),
    "2": ("111", "001", "111", "100", "111"),
    "3": ("111", "001", "111", "001", "111"),
    "4": ("101", "101", "111", "001", "001"),
    "5": ("111", "100", "111", "001", "111"),
    "6": ("111", "100", "111", "101", "111"),
    "7": ("111", "001", "001", "001", "001"),
    "8": ("111", "101", "111", "101", "111"),
    "9": ("111", "101", "111", "001", "111"),
}


def label_box(text: str, width: int, height: int):
    """Pixel extent ``(x0, y0, x1, y1)``, exclusive ends, of the burned-in count label."""
    s = LABEL_SCALE
    w = (len(text) * 4 + 1) * s
    h = 7 * s
    return 0, 0, min(w, width), min(h, height)


def frame_pixels(bbox, width, height):
    """Boolean mask of the 2-pixel frame drawn just outside ``bbox``."""
    x0, y0, x1, y1 = bbox
    out = np.zeros((height, width), dtype=bool)
    ox0, oy0 = max(x0 - FRAME, 0), max(y0 - FRAME, 0)
    ox1, oy1 = min(x1 + FRAME, width - 1), min(y1 + FRAME, height - 1)
    out[oy0:oy1 + 1, ox0:ox1 + 1] = True
    out[max(y0, 0):y1 + 1, max(x0, 0):x1 + 1] = False
    return out


def render_overlay(img: RgbImage, report: FovReport, show_debris: bool = False) -> RgbImage:
    """Frame each detection's bbox and burn the bacilli count into the top-left corner."""
    canvas = img.data.copy()
    h, w = canvas.shape[:2]
    if show_debris:
        for d in report.detections:
            if d.verdict is Verdict.DEBRIS:
                canvas[frame_pixels(d.component.bbox, w, h)] = DEBRIS_COLOR
    for d in report.detections:
        if d.verdict is Verdict.BACILLUS:
            canvas[frame_pixels(d.component.bbox, w, h)] = BACILLUS_COLOR
    _burn_label(canvas, str(report.bacilli_count))
    return RgbImage(canvas)


def _burn_label(canvas, text):
    h, w = canvas.shape[:2]
    x0, y0, x1, y1 = label_box(text, w, h)
    canvas[y0:y1, x0:x1] = 0
    s = LABEL_SCALE
    for i, ch in enumerate(text):
        for row, bits in enumerate(_GLYPHS[ch]):
            for col, bit in enumerate(bits):
                if bit == "1":
                    px = (1 + i * 4 + col) * s
                    py = (1 + row) * s
                    canvas[py:min(py + s, y1), px:min(px + s, x1)] = 255


# --- clinical records -------------------------------------------------------

@dataclass(frozen=True)
class ClinicalRecord:
    patient_id: str
    smear_id: str
    grade: SeverityGrade
    timestamp: datetime = field(default_factory=lambda: datetime.now(timezone.utc))
    pipeline_version: str = ""

    def to_json(self) -> str:
        return json.dumps({
            "patient_id": self.patient_id,
            "smear_id": self.smear_id,
            "grade": self.grade.value,
            "timestamp": self.timestamp.astimezone(timezone.utc).isoformat(),
            "pipeline_version": self.pipeline_version,
        }, sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> "ClinicalRecord":
        d = json.loads(line)
        return cls(d["patient_id"], d["smear_id"], SeverityGrade(d["grade"]),
                   datetime.fromisoformat(d["timestamp"]), d["pipeline_version"])


def append_record(store_path, record: ClinicalRecord) -> int:
    """Append one record line under an exclusive lock and fsync it.

    Returns the byte offset the record was written at.
    """
    line = (record.to_json() + "\n").encode("utf-8")
    try:
        fd = os.open(store_path, os.O_WRONLY | os.O_APPEND | os.O_CREAT, 0o644)
    except OSError as exc:
        raise StoreUnavailable(f"cannot open record store {store_path}: {exc}") from exc
    try:
        fcntl.flock(fd, fcntl.LOCK_EX)
        try:
            offset = os.lseek(fd, 0, os.SEEK_END)
            os.write(fd, line)
            os.fsync(fd)
        finally:
            fcntl.flock(fd, fcntl.LOCK_UN)
    except OSError as exc:
        raise StoreUnavailable(f"cannot append to record store {store_path}: {exc}") from exc
    finally:
        os.close(fd)
    return offset


def read_records(store_path):
    with open(store_path, encoding="utf-8") as fh:
        return [ClinicalRecord.from_json(line) for line in fh if line.strip()]

"""Core data types and on-disk interchange formats.

Three text formats travel between pipeline stages:

* detection / track logs: one record per line,
  ``frame_index track_id x y w h confidence``, separated by single
  spaces or commas. track_id -1 marks an untracked raw detection.
* dataset manifests: CSV lines ``video_id,class_label,frame_dir`` with
  an optional fourth ``feature_path`` column.
* frame directories: 8-bit PNG files whose sorted file names give the
  frame order.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np
from PIL import Image

DEFAULT_CLASSES = ("Normal", "Burglary", "Fighting", "Arson", "Explosion")


class ManifestError(ValueError):
    """Raised for structurally invalid dataset manifests."""


class TrackLogError(ValueError):
    """Raised for unparseable detection / track log lines."""


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in pixel coordinates, top-left origin."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box sides must be positive, got w={self.w} h={self.h}")

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)


def clamp_box(box: BoundingBox, frame_h: int, frame_w: int) -> BoundingBox:
    """Clip a box to frame bounds. The box must overlap the frame."""
    x1 = min(max(box.x, 0.0), frame_w)
    y1 = min(max(box.y, 0.0), frame_h)
    x2 = min(max(box.x2, 0.0), frame_w)
    y2 = min(max(box.y2, 0.0), frame_h)
    if x2 <= x1 or y2 <= y1:
        raise ValueError(f"box {box} does not intersect a {frame_w}x{frame_h} frame")
    return BoundingBox(x1, y1, x2 - x1, y2 - y1)


def expand_box(box: BoundingBox, margin: float, frame_h: int, frame_w: int) -> BoundingBox:
    """Grow a box by margin pixels on every side, then clamp to the frame."""
    grown = BoundingBox(box.x - margin, box.y - margin,
                        box.w + 2 * margin, box.h + 2 * margin)
    return clamp_box(grown, frame_h, frame_w)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes; 0 when disjoint."""
    ix = min(a.x2, b.x2) - max(a.x, b.x)
    iy = min(a.y2, b.y2) - max(a.y, b.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


@dataclass(frozen=True)
class Detection:
    """One detector hit in one frame."""

    frame_index: int
    box: BoundingBox
    confidence: float
    class_label: str = "person"

    def __post_init__(self):
        if self.frame_index < 0:
            raise ValueError(f"frame_index must be >= 0, got {self.frame_index}")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence must lie in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class TrackRecord:
    """One identity-resolved box in one frame."""

    frame_index: int
    track_id: int
    box: BoundingBox
    confidence: float

    def __post_init__(self):
        if self.frame_index < 0:
            raise ValueError(f"frame_index must be >= 0, got {self.frame_index}")
        if self.track_id <= 0:
            raise ValueError(f"track_id must be positive, got {self.track_id}")


@dataclass(frozen=True)
class ManifestEntry:
    video_id: str
    class_label: str
    frame_dir: str
    feature_path: str | None = None


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]
    class_names: tuple[str, ...] = DEFAULT_CLASSES

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[ManifestEntry]:
        return iter(self.entries)

    def class_histogram(self) -> dict[str, int]:
        counts = {name: 0 for name in self.class_names}
        for entry in self.entries:
            counts[entry.class_label] += 1
        return counts

    def by_class(self) -> dict[str, list[ManifestEntry]]:
        grouped: dict[str, list[ManifestEntry]] = {n: [] for n in self.class_names}
        for entry in self.entries:
            grouped[entry.class_label].append(entry)
        return grouped

    def replace_entries(self, entries: Iterable[ManifestEntry]) -> "DatasetManifest":
        return dataclasses.replace(self, entries=tuple(entries))


def load_manifest(path: str | Path,
                  class_names: tuple[str, ...] = DEFAULT_CLASSES) -> DatasetManifest:
    path = Path(path)
    entries = []
    seen: set[str] = set()
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) not in (3, 4):
            raise ManifestError(f"{path}:{lineno}: expected 3 or 4 fields, got {len(parts)}")
        video_id, class_label, frame_dir = parts[:3]
        feature_path = parts[3] if len(parts) == 4 and parts[3] else None
        if not video_id:
            raise ManifestError(f"{path}:{lineno}: empty video_id")
        if video_id in seen:
            raise ManifestError(f"{path}:{lineno}: duplicate video_id '{video_id}'")
        if class_label not in class_names:
            raise ManifestError(f"{path}:{lineno}: unknown class label '{class_label}'")
        seen.add(video_id)
        entries.append(ManifestEntry(video_id, class_label, frame_dir, feature_path))
    return DatasetManifest(tuple(entries), class_names)


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for e in manifest.entries:
        fields = [e.video_id, e.class_label, e.frame_dir]
        if e.feature_path is not None:
            fields.append(e.feature_path)
        lines.append(",".join(fields))
    path.write_text("\n".join(lines) + ("\n" if lines else ""))


def _format_float(v: float) -> str:
    return repr(round(float(v), 6))


def _parse_log_line(line: str, where: str):
    sep = "," if "," in line else None
    parts = [p for p in line.split(sep) if p != ""]
    if len(parts) != 7:
        raise TrackLogError(f"{where}: expected 7 fields, got {len(parts)}")
    try:
        frame = int(parts[0])
        tid = int(parts[1])
        x, y, w, h, conf = (float(p) for p in parts[2:])
    except ValueError as exc:
        raise TrackLogError(f"{where}: {exc}") from exc
    return frame, tid, x, y, w, h, conf


def read_track_log(path: str | Path) -> list[TrackRecord]:
    """Read identity-resolved records; raw detections (id -1) are rejected."""
    path = Path(path)
    records = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        frame, tid, x, y, w, h, conf = _parse_log_line(line, f"{path}:{lineno}")
        if tid == -1:
            raise TrackLogError(f"{path}:{lineno}: raw detection (track_id -1) in track log")
        records.append(TrackRecord(frame, tid, BoundingBox(x, y, w, h), conf))
    return records


def write_track_log(records: Iterable[TrackRecord], path: str | Path,
                    sep: str = " ") -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for r in records:
        fields = [str(r.frame_index), str(r.track_id),
                  _format_float(r.box.x), _format_float(r.box.y),
                  _format_float(r.box.w), _format_float(r.box.h),
                  _format_float(r.confidence)]
        lines.append(sep.join(fields))
    path.write_text("\n".join(lines) + ("\n" if lines else ""))


def read_detections(path: str | Path, num_frames: int | None = None
                    ) -> list[list[Detection]]:
    """Read a raw detection log into per-frame lists.

    Lines may carry track_id -1 (detector output) or a real id (the id is
    ignored; only geometry and confidence matter here). The result has
    num_frames slots, or max frame index + 1 when not given.
    """
    path = Path(path)
    parsed = []
    max_frame = -1
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        frame, _tid, x, y, w, h, conf = _parse_log_line(line, f"{path}:{lineno}")
        parsed.append(Detection(frame, BoundingBox(x, y, w, h), conf))
        max_frame = max(max_frame, frame)
    if num_frames is None:
        num_frames = max_frame + 1
    elif max_frame >= num_frames:
        raise TrackLogError(f"{path}: frame index {max_frame} outside 0..{num_frames - 1}")
    per_frame: list[list[Detection]] = [[] for _ in range(num_frames)]
    for det in parsed:
        per_frame[det.frame_index].append(det)
    return per_frame


def write_detections(detections: Iterable[Detection], path: str | Path,
                     sep: str = " ") -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for d in detections:
        fields = [str(d.frame_index), "-1",
                  _format_float(d.box.x), _format_float(d.box.y),
                  _format_float(d.box.w), _format_float(d.box.h),
                  _format_float(d.confidence)]
        lines.append(sep.join(fields))
    path.write_text("\n".join(lines) + ("\n" if lines else ""))


@dataclass(frozen=True)
class LogIssue:
    kind: str
    frame_index: int
    track_id: int
    message: str


@dataclass(frozen=True)
class TrackLogReport:
    issues: tuple[LogIssue, ...]

    @property
    def ok(self) -> bool:
        return not self.issues


def validate_track_log(records: Iterable[TrackRecord], frame_count: int
                       ) -> TrackLogReport:
    """Check a track log against the frame count of its video.

    Flags out-of-range frame indices, duplicate (frame, id) pairs, and
    non-positive box sides.
    """
    issues = []
    seen: set[tuple[int, int]] = set()
    for r in records:
        if not (0 <= r.frame_index < frame_count):
            issues.append(LogIssue("frame_out_of_range", r.frame_index, r.track_id,
                                   f"frame {r.frame_index} outside 0..{frame_count - 1}"))
        key = (r.frame_index, r.track_id)
        if key in seen:
            issues.append(LogIssue("duplicate_record", r.frame_index, r.track_id,
                                   f"track {r.track_id} appears twice in frame {r.frame_index}"))
        seen.add(key)
        if r.box.w <= 0 or r.box.h <= 0:  # unreachable via BoundingBox, kept for raw data
            issues.append(LogIssue("non_positive_box", r.frame_index, r.track_id,
                                   f"box sides {r.box.w}x{r.box.h}"))
    return TrackLogReport(tuple(issues))


def list_frame_files(frame_dir: str | Path) -> list[Path]:
    frame_dir = Path(frame_dir)
    if not frame_dir.is_dir():
        raise FileNotFoundError(f"frame directory not found: {frame_dir}")
    files = sorted(p for p in frame_dir.iterdir()
                   if p.suffix.lower() in (".png", ".jpg", ".jpeg"))
    if not files:
        raise FileNotFoundError(f"no frame images in {frame_dir}")
    return files


def load_frame(path: str | Path) -> np.ndarray:
    """Load an image as uint8, (H, W) for grayscale or (H, W, 3) for colour."""
    with Image.open(path) as img:
        if img.mode not in ("L", "RGB"):
            img = img.convert("RGB")
        return np.asarray(img, dtype=np.uint8)


def save_frame(array: np.ndarray, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = np.asarray(array)
    if arr.dtype != np.uint8:
        arr = np.clip(np.rint(arr), 0, 255).astype(np.uint8)
    Image.fromarray(arr).save(path)


def load_video_frames(frame_dir: str | Path) -> list[np.ndarray]:
    return [load_frame(p) for p in list_frame_files(frame_dir)]

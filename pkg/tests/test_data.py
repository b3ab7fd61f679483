"""Boxes, manifests, and track-log round trips."""

import numpy as np
import pytest

from vadkit.data import (BoundingBox, DatasetManifest, Detection, ManifestEntry,
                         ManifestError, TrackLogError, TrackRecord, clamp_box,
                         expand_box, iou, load_frame, load_manifest,
                         read_detections, read_track_log, save_frame,
                         save_manifest, validate_track_log, write_detections,
                         write_track_log)


# ---- boxes -------------------------------------------------------------------

def test_box_geometry():
    box = BoundingBox(2.0, 3.0, 4.0, 6.0)
    assert box.x2 == 6.0 and box.y2 == 9.0
    assert box.area == 24.0
    assert box.center == (4.0, 6.0)


@pytest.mark.parametrize("w,h", [(0.0, 1.0), (1.0, 0.0), (-2.0, 3.0)])
def test_box_rejects_non_positive_sides(w, h):
    with pytest.raises(ValueError):
        BoundingBox(0.0, 0.0, w, h)


def test_clamp_box_clips_to_frame():
    box = BoundingBox(-5.0, -5.0, 20.0, 20.0)
    clamped = clamp_box(box, frame_h=10, frame_w=12)
    assert (clamped.x, clamped.y, clamped.x2, clamped.y2) == (0.0, 0.0, 12.0, 10.0)


def test_clamp_box_rejects_disjoint():
    with pytest.raises(ValueError):
        clamp_box(BoundingBox(100.0, 100.0, 5.0, 5.0), frame_h=10, frame_w=10)


def test_expand_box_grows_then_clamps():
    box = BoundingBox(5.0, 5.0, 4.0, 4.0)
    grown = expand_box(box, margin=2.0, frame_h=20, frame_w=20)
    assert (grown.x, grown.y, grown.w, grown.h) == (3.0, 3.0, 8.0, 8.0)
    near_edge = expand_box(BoundingBox(0.0, 0.0, 4.0, 4.0), 3.0, 20, 20)
    assert (near_edge.x, near_edge.y, near_edge.x2, near_edge.y2) == (0.0, 0.0, 7.0, 7.0)


def test_iou_known_values():
    a = BoundingBox(0.0, 0.0, 2.0, 2.0)
    assert iou(a, a) == 1.0
    assert iou(a, BoundingBox(10.0, 10.0, 2.0, 2.0)) == 0.0
    b = BoundingBox(1.0, 0.0, 2.0, 2.0)  # overlap 2, union 6
    assert abs(iou(a, b) - 1.0 / 3.0) < 1e-12
    # boxes touching along an edge do not overlap
    assert iou(a, BoundingBox(2.0, 0.0, 2.0, 2.0)) == 0.0


def test_detection_validation():
    box = BoundingBox(0.0, 0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        Detection(-1, box, 0.5)
    with pytest.raises(ValueError):
        Detection(0, box, 1.5)
    with pytest.raises(ValueError):
        TrackRecord(0, 0, box, 0.5)  # ids start at 1


# ---- manifest ----------------------------------------------------------------

def _sample_manifest():
    entries = (
        ManifestEntry("normal_00", "Normal", "frames/normal_00"),
        ManifestEntry("arson_00", "Arson", "frames/arson_00", "cache/arson_00.fseq"),
        ManifestEntry("normal_01", "Normal", "frames/normal_01"),
    )
    return DatasetManifest(entries)


def test_manifest_round_trip_is_stable(tmp_path):
    manifest = _sample_manifest()
    path = tmp_path / "manifest.csv"
    save_manifest(manifest, path)
    loaded = load_manifest(path)
    assert loaded.entries == manifest.entries
    first = path.read_bytes()
    save_manifest(loaded, path)
    assert path.read_bytes() == first


def test_manifest_histogram_and_grouping():
    manifest = _sample_manifest()
    hist = manifest.class_histogram()
    assert hist["Normal"] == 2 and hist["Arson"] == 1
    assert hist["Burglary"] == 0
    grouped = manifest.by_class()
    assert [e.video_id for e in grouped["Normal"]] == ["normal_00", "normal_01"]


def test_manifest_rejects_unknown_class(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("v0,Skydiving,frames/v0\n")
    with pytest.raises(ManifestError, match="unknown class"):
        load_manifest(path)


def test_manifest_rejects_duplicates_and_bad_rows(tmp_path):
    path = tmp_path / "dup.csv"
    path.write_text("v0,Normal,frames/v0\nv0,Arson,frames/v0\n")
    with pytest.raises(ManifestError, match="duplicate"):
        load_manifest(path)
    path.write_text("v0,Normal\n")
    with pytest.raises(ManifestError, match="fields"):
        load_manifest(path)


def test_manifest_skips_comments_and_blank_lines(tmp_path):
    path = tmp_path / "manifest.csv"
    path.write_text("# corpus\n\nv0,Normal,frames/v0\n")
    loaded = load_manifest(path)
    assert len(loaded) == 1


# ---- track logs --------------------------------------------------------------

def _sample_records():
    return [
        TrackRecord(0, 1, BoundingBox(1.0, 2.0, 3.0, 4.0), 0.9),
        TrackRecord(0, 2, BoundingBox(10.5, 2.25, 3.0, 4.0), 0.8),
        TrackRecord(1, 1, BoundingBox(2.0, 2.0, 3.0, 4.0), 0.85),
    ]


@pytest.mark.parametrize("sep", [" ", ","])
def test_track_log_round_trip(tmp_path, sep):
    records = _sample_records()
    path = tmp_path / "track.txt"
    write_track_log(records, path, sep=sep)
    loaded = read_track_log(path)
    assert loaded == records
    first = path.read_bytes()
    write_track_log(loaded, path, sep=sep)
    assert path.read_bytes() == first


def test_track_log_rejects_raw_detections(tmp_path):
    path = tmp_path / "raw.txt"
    path.write_text("0 -1 1.0 2.0 3.0 4.0 0.9\n")
    with pytest.raises(TrackLogError, match="raw detection"):
        read_track_log(path)


def test_track_log_rejects_malformed_lines(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("0 1 1.0 2.0 3.0\n")
    with pytest.raises(TrackLogError, match="7 fields"):
        read_track_log(path)
    path.write_text("0 1 a b c d e\n")
    with pytest.raises(TrackLogError):
        read_track_log(path)


def test_detections_round_trip_per_frame(tmp_path):
    dets = [Detection(0, BoundingBox(1.0, 1.0, 2.0, 2.0), 0.9),
            Detection(2, BoundingBox(5.0, 1.0, 2.0, 2.0), 0.4)]
    path = tmp_path / "dets.txt"
    write_detections(dets, path)
    per_frame = read_detections(path)
    assert len(per_frame) == 3
    assert len(per_frame[0]) == 1 and len(per_frame[1]) == 0
    assert per_frame[2][0].confidence == 0.4

    padded = read_detections(path, num_frames=5)
    assert len(padded) == 5
    with pytest.raises(TrackLogError, match="outside"):
        read_detections(path, num_frames=2)


def test_validate_track_log_flags_issues():
    records = [
        TrackRecord(0, 1, BoundingBox(0.0, 0.0, 1.0, 1.0), 0.9),
        TrackRecord(0, 1, BoundingBox(0.0, 0.0, 1.0, 1.0), 0.9),  # duplicate
        TrackRecord(9, 2, BoundingBox(0.0, 0.0, 1.0, 1.0), 0.9),  # out of range
    ]
    report = validate_track_log(records, frame_count=5)
    kinds = sorted(issue.kind for issue in report.issues)
    assert kinds == ["duplicate_record", "frame_out_of_range"]
    assert not report.ok
    assert validate_track_log(records[:1], frame_count=5).ok


# ---- frames ------------------------------------------------------------------

def test_frame_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    frame = rng.integers(0, 256, (6, 8, 3), dtype=np.uint8)
    path = tmp_path / "frame.png"
    save_frame(frame, path)
    loaded = load_frame(path)
    assert loaded.dtype == np.uint8
    np.testing.assert_array_equal(loaded, frame)

    gray = rng.integers(0, 256, (6, 8), dtype=np.uint8)
    save_frame(gray, tmp_path / "gray.png")
    loaded_gray = load_frame(tmp_path / "gray.png")
    np.testing.assert_array_equal(loaded_gray, gray)

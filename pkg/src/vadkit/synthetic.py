"""Synthetic scenes and a bundled miniature dataset.

Two kinds of material: detection streams with known ground-truth motion
for exercising the tracker, and a five-class corpus of tiny rendered
videos (a handful of clips per class, distinct appearance and motion per
class) that drives the whole pipeline end to end in seconds. Everything
derives from explicit seeds, so fixtures are reproducible byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import render_config
from .data import (DEFAULT_CLASSES, BoundingBox, DatasetManifest, Detection,
                   ManifestEntry, save_frame, save_manifest, write_detections)


def linear_motion_scene(num_frames: int = 30,
                        speeds: tuple[int, ...] = (4, 0, -4),
                        frame_hw: tuple[int, int] = (160, 320),
                        box_hw: tuple[int, int] = (40, 18),
                        jitter: int = 1,
                        confidence: float = 0.9,
                        seed: int = 0) -> tuple[list[list[Detection]],
                                                dict[int, list[BoundingBox]]]:
    """Constant-velocity objects with jittered detections.

    Returns per-frame detections and, per object index, its true box in
    every frame. Rows are one box height plus a gap apart so objects
    never overlap, and start positions keep every trajectory inside the
    frame; geometry that cannot fit raises instead of silently clipping.
    """
    rng = np.random.default_rng(seed)
    frame_h, frame_w = frame_hw
    box_h, box_w = box_hw
    truth: dict[int, list[BoundingBox]] = {}
    starts = []
    row_pitch = box_h + 8
    for obj, speed in enumerate(speeds):
        y = 8 + obj * row_pitch
        if y + box_h > frame_h:
            raise ValueError("rows leave the frame; raise frame height or "
                             "shrink the boxes")
        travel = abs(speed) * (num_frames - 1)
        x = 8 if speed >= 0 else frame_w - box_w - 8
        if speed >= 0 and x + travel + box_w >= frame_w:
            raise ValueError("trajectory leaves the frame; shrink speed or frames")
        if speed < 0 and x - travel < 0:
            raise ValueError("trajectory leaves the frame; shrink speed or frames")
        starts.append((x, y))
        truth[obj] = []
    detections: list[list[Detection]] = []
    for frame in range(num_frames):
        frame_dets = []
        for obj, speed in enumerate(speeds):
            x0, y0 = starts[obj]
            box = BoundingBox(float(x0 + speed * frame), float(y0),
                              float(box_w), float(box_h))
            truth[obj].append(box)
            dx = int(rng.integers(-jitter, jitter + 1)) if jitter else 0
            dy = int(rng.integers(-jitter, jitter + 1)) if jitter else 0
            jittered = BoundingBox(
                float(np.clip(box.x + dx, 0, frame_w - box_w)),
                float(np.clip(box.y + dy, 0, frame_h - box_h)),
                float(box_w), float(box_h))
            frame_dets.append(Detection(frame, jittered, confidence))
        detections.append(frame_dets)
    return detections, truth


@dataclass(frozen=True)
class ClassRecipe:
    """Appearance and motion template for one class of synthetic clips."""

    background: int
    box_color: tuple[int, int, int]
    speed: int
    num_actors: int = 1
    flicker_period: int = 0      # box brightness toggles every N frames
    brightness_ramp: bool = False  # box brightens over the clip
    background_jump: bool = False  # background steps up mid-clip


CLASS_RECIPES: dict[str, ClassRecipe] = {
    "Normal": ClassRecipe(background=30, box_color=(120, 120, 120), speed=1),
    "Burglary": ClassRecipe(background=35, box_color=(70, 80, 60), speed=3,
                            flicker_period=4),
    "Fighting": ClassRecipe(background=28, box_color=(200, 190, 180), speed=3,
                            num_actors=2),
    "Arson": ClassRecipe(background=32, box_color=(90, 40, 20), speed=1,
                         brightness_ramp=True),
    "Explosion": ClassRecipe(background=25, box_color=(230, 220, 200), speed=2,
                             background_jump=True),
}


def make_class_video(class_label: str, num_frames: int = 40,
                     frame_hw: tuple[int, int] = (48, 64),
                     seed: int | list[int] = 0
                     ) -> tuple[list[np.ndarray], list[list[BoundingBox]]]:
    """Render one clip of a class archetype.

    Returns uint8 RGB frames and the true actor boxes per frame. Boxes
    bounce off frame edges, so any speed is safe.
    """
    recipe = CLASS_RECIPES[class_label]
    rng = np.random.default_rng(seed)
    frame_h, frame_w = frame_hw
    box_h, box_w = max(frame_h // 4, 8), max(frame_w // 5, 8)

    actors = []
    for a in range(recipe.num_actors):
        x = int(rng.integers(2, frame_w - box_w - 2))
        y = 4 + a * (frame_h // 2 - 4)
        direction = 1 if a % 2 == 0 else -1
        actors.append({"x": x, "y": y, "dx": recipe.speed * direction})

    frames: list[np.ndarray] = []
    boxes_per_frame: list[list[BoundingBox]] = []
    for t in range(num_frames):
        background = recipe.background
        if recipe.background_jump and t >= num_frames // 2:
            background = min(background + 125, 240)
        frame = np.full((frame_h, frame_w, 3), background, dtype=np.float64)
        frame += rng.normal(0.0, 5.0, frame.shape)

        frame_boxes = []
        for actor in actors:
            color = np.array(recipe.box_color, dtype=np.float64)
            if recipe.flicker_period and (t // recipe.flicker_period) % 2 == 1:
                color = color + 40.0
            if recipe.brightness_ramp:
                color = color + (150.0 * t) / max(num_frames - 1, 1)
            x, y = actor["x"], actor["y"]
            frame[y:y + box_h, x:x + box_w] = color
            frame_boxes.append(BoundingBox(float(x), float(y),
                                           float(box_w), float(box_h)))
            nx = x + actor["dx"]
            if nx < 0 or nx + box_w > frame_w:
                actor["dx"] = -actor["dx"]
                nx = x + actor["dx"]
            actor["x"] = nx
        frames.append(np.clip(np.rint(frame), 0, 255).astype(np.uint8))
        boxes_per_frame.append(frame_boxes)
    return frames, boxes_per_frame


def detections_from_truth(boxes_per_frame: list[list[BoundingBox]],
                          frame_hw: tuple[int, int], seed: int | list[int] = 0,
                          jitter: int = 1, drop_rate: float = 0.05
                          ) -> list[Detection]:
    """Turn true boxes into a plausible detector stream: one jittered box
    per actor with noisy confidence, occasionally dropped (never in the
    first frame, so every video starts a track)."""
    rng = np.random.default_rng(seed)
    frame_h, frame_w = frame_hw
    detections: list[Detection] = []
    for frame_index, boxes in enumerate(boxes_per_frame):
        for box in boxes:
            if frame_index > 0 and rng.random() < drop_rate:
                continue
            dx = int(rng.integers(-jitter, jitter + 1)) if jitter else 0
            dy = int(rng.integers(-jitter, jitter + 1)) if jitter else 0
            jittered = BoundingBox(
                float(np.clip(box.x + dx, 0, frame_w - box.w)),
                float(np.clip(box.y + dy, 0, frame_h - box.h)),
                box.w, box.h)
            confidence = float(np.clip(rng.normal(0.86, 0.04), 0.65, 0.98))
            detections.append(Detection(frame_index, jittered, confidence))
    return detections


FIXTURE_CONFIG = {
    "margin": 4,
    "kernel_size": 9,
    "sigma": 0.0,
    "clip_length": 32,
    "target_height": 32,
    "target_width": 32,
    "adapter": "mock",
    "feature_dim": 32,
    "test_fraction": 0.2,
    "val_fraction": 0.2,
    "arch_preset": "bilstm",
    "rnn1_units": 16,
    "rnn2_units": 8,
    "dense_units": 8,
    "dropout1": 0.2,
    "dropout2": 0.1,
    "epochs": 8,
    "batch_size": 8,
    "learning_rate": 0.005,
    "num_trials": 2,
    "seed": 0,
}


def write_fixture(root: str | Path, clips_per_class: int = 6,
                  frames_per_clip: int = 40, short_clip_frames: int = 20,
                  frame_hw: tuple[int, int] = (48, 64), seed: int = 7,
                  classes: tuple[str, ...] = DEFAULT_CLASSES) -> Path:
    """Write a complete miniature dataset under root.

    Layout: frames/<video_id>/*.png, detections/<video_id>.txt,
    manifest.csv (relative frame dirs), and pipeline.cfg tuned for this
    corpus. The last clip of each class is shorter than a model clip, so
    padding paths get exercised. Returns the manifest path.
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for class_index, class_label in enumerate(classes):
        for clip_index in range(clips_per_class):
            video_id = f"{class_label.lower()}_{clip_index:02d}"
            length = short_clip_frames if clip_index == clips_per_class - 1 \
                else frames_per_clip
            clip_seed = [seed, class_index, clip_index]
            frames, truth = make_class_video(class_label, length, frame_hw,
                                             seed=clip_seed)
            frame_dir = root / "frames" / video_id
            for t, frame in enumerate(frames):
                save_frame(frame, frame_dir / f"{t:05d}.png")
            dets = detections_from_truth(truth, frame_hw, seed=clip_seed + [1])
            write_detections(dets, root / "detections" / f"{video_id}.txt")
            entries.append(ManifestEntry(video_id, class_label,
                                         f"frames/{video_id}"))
    manifest = DatasetManifest(tuple(entries), tuple(classes))
    manifest_path = root / "manifest.csv"
    save_manifest(manifest, manifest_path)

    config = dict(FIXTURE_CONFIG)
    config["manifest"] = str(manifest_path)
    config["detections_root"] = str(root / "detections")
    config["out_root"] = str(root / "out")
    config["class_names"] = tuple(classes)
    (root / "pipeline.cfg").write_text(render_config(config))
    return manifest_path

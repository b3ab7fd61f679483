"""Background suppression: kernels, masks, and the composition identity."""

import numpy as np
import pytest

from helpers import direct_conv2d_reflect
from vadkit.data import BoundingBox, TrackRecord
from vadkit.suppress import (SuppressionParams, blur_frame,
                             compose_suppressed_frame, derived_sigma,
                             gaussian_kernel, person_mask, suppress_frame,
                             suppress_video)


# ---- kernel ------------------------------------------------------------------

def test_derived_sigma_values():
    assert derived_sigma(51) == 8.0  # exactly
    assert derived_sigma(3) == 0.8
    assert derived_sigma(1) == 0.5


@pytest.mark.parametrize("k", [1, 3, 5, 9, 21, 51])
def test_gaussian_kernel_normalised_and_symmetric(k):
    for sigma in (0.0, 0.8, 3.5):
        kernel = gaussian_kernel(k, sigma)
        assert kernel.shape == (k,)
        assert abs(kernel.sum() - 1.0) < 1e-12
        np.testing.assert_array_equal(kernel, kernel[::-1])
        assert np.all(kernel > 0)


def test_gaussian_kernel_peaks_at_center():
    kernel = gaussian_kernel(9, 2.0)
    assert np.argmax(kernel) == 4


def test_gaussian_kernel_rejects_even_size():
    with pytest.raises(ValueError):
        gaussian_kernel(4)


# ---- blur --------------------------------------------------------------------

def test_blur_matches_direct_oracle():
    rng = np.random.default_rng(1)
    frame = rng.uniform(0.0, 255.0, (16, 16))
    params = SuppressionParams(margin=0, kernel_size=5, sigma=1.2)
    got = blur_frame(frame, params)
    want = direct_conv2d_reflect(frame, gaussian_kernel(5, 1.2))
    assert np.max(np.abs(got - want)) < 1e-9


def test_blur_uint8_rounds_and_preserves_dtype():
    rng = np.random.default_rng(2)
    frame = rng.integers(0, 256, (12, 10, 3), dtype=np.uint8)
    params = SuppressionParams(margin=0, kernel_size=5, sigma=1.2)
    got = blur_frame(frame, params)
    assert got.dtype == np.uint8
    want_float = np.stack([direct_conv2d_reflect(frame[:, :, c],
                                                 gaussian_kernel(5, 1.2))
                           for c in range(3)], axis=2)
    want = np.clip(np.rint(want_float), 0, 255).astype(np.uint8)
    np.testing.assert_array_equal(got, want)


def test_blur_kernel_size_one_is_identity():
    rng = np.random.default_rng(3)
    frame = rng.integers(0, 256, (8, 8), dtype=np.uint8)
    out = blur_frame(frame, SuppressionParams(kernel_size=1))
    np.testing.assert_array_equal(out, frame)


def test_blur_constant_frame_unchanged():
    frame = np.full((9, 9, 3), 77, dtype=np.uint8)
    out = blur_frame(frame, SuppressionParams(kernel_size=9))
    np.testing.assert_array_equal(out, frame)


# ---- mask --------------------------------------------------------------------

def test_person_mask_rasterisation():
    mask = person_mask((8, 8), [BoundingBox(2.3, 1.7, 3.1, 2.0)], margin=0)
    assert mask.dtype == np.uint8
    want = np.zeros((8, 8), dtype=np.uint8)
    want[1:4, 2:6] = 1  # floor(1.7)..ceil(3.7), floor(2.3)..ceil(5.4)
    np.testing.assert_array_equal(mask, want)


def test_person_mask_margin_expands():
    base = person_mask((20, 20), [BoundingBox(8.0, 8.0, 4.0, 4.0)], margin=0)
    grown = person_mask((20, 20), [BoundingBox(8.0, 8.0, 4.0, 4.0)], margin=3)
    assert grown.sum() > base.sum()
    assert np.all(grown[base.astype(bool)])  # expansion is a superset
    want = np.zeros((20, 20), dtype=np.uint8)
    want[5:15, 5:15] = 1
    np.testing.assert_array_equal(grown, want)


def test_person_mask_clamps_to_frame():
    mask = person_mask((10, 10), [BoundingBox(8.0, 8.0, 6.0, 6.0)], margin=4)
    assert mask[9, 9] and mask[4, 4]
    assert mask.shape == (10, 10)


def test_person_mask_skips_disjoint_boxes():
    boxes = [BoundingBox(50.0, 50.0, 5.0, 5.0), BoundingBox(1.0, 1.0, 2.0, 2.0)]
    mask = person_mask((10, 10), boxes, margin=0)
    assert mask[2, 2] == 1
    assert mask.sum() == 4  # only the in-frame box contributes


def test_person_mask_unions_boxes():
    boxes = [BoundingBox(0.0, 0.0, 2.0, 2.0), BoundingBox(6.0, 6.0, 2.0, 2.0)]
    mask = person_mask((10, 10), boxes, margin=0)
    assert mask[0, 0] and mask[7, 7] and not mask[4, 4]


# ---- composition -------------------------------------------------------------

def test_compose_selects_per_pixel():
    rng = np.random.default_rng(4)
    frame = rng.integers(0, 256, (6, 6, 3), dtype=np.uint8)
    blurred = rng.integers(0, 256, (6, 6, 3), dtype=np.uint8)
    mask = rng.random((6, 6)) > 0.5
    out = compose_suppressed_frame(frame, mask, blurred)
    np.testing.assert_array_equal(out, np.where(mask[:, :, None], frame, blurred))


def test_compose_shape_checks():
    frame = np.zeros((4, 4), dtype=np.uint8)
    with pytest.raises(ValueError):
        compose_suppressed_frame(frame, np.zeros((3, 3), dtype=bool), frame)
    with pytest.raises(ValueError):
        compose_suppressed_frame(frame, np.zeros((4, 4), dtype=bool),
                                 np.zeros((5, 5), dtype=np.uint8))


def test_suppress_frame_composition_identity():
    rng = np.random.default_rng(5)
    frame = rng.integers(0, 256, (32, 40, 3), dtype=np.uint8)
    params = SuppressionParams(margin=3, kernel_size=7)
    boxes = [BoundingBox(10.0, 8.0, 8.0, 12.0)]
    out = suppress_frame(frame, boxes, params)
    blurred = blur_frame(frame, params)
    keep = person_mask(frame.shape[:2], boxes, params.margin).astype(bool)
    np.testing.assert_array_equal(out[keep], frame[keep])
    np.testing.assert_array_equal(out[~keep], blurred[~keep])


def test_suppress_frame_without_boxes_is_fully_blurred():
    rng = np.random.default_rng(6)
    frame = rng.integers(0, 256, (16, 16), dtype=np.uint8)
    params = SuppressionParams(margin=2, kernel_size=5)
    out = suppress_frame(frame, [], params)
    np.testing.assert_array_equal(out, blur_frame(frame, params))


def test_suppress_grayscale_frames():
    rng = np.random.default_rng(8)
    frame = rng.integers(0, 256, (16, 16), dtype=np.uint8)
    params = SuppressionParams(margin=1, kernel_size=3)
    boxes = [BoundingBox(4.0, 4.0, 5.0, 5.0)]
    out = suppress_frame(frame, boxes, params)
    assert out.shape == frame.shape and out.dtype == np.uint8
    keep = person_mask(frame.shape, boxes, params.margin).astype(bool)
    np.testing.assert_array_equal(out[keep], frame[keep])


def test_suppress_video_groups_records_by_frame():
    rng = np.random.default_rng(7)
    frames = [rng.integers(0, 256, (24, 24, 3), dtype=np.uint8) for _ in range(4)]
    params = SuppressionParams(margin=2, kernel_size=5)
    records = [TrackRecord(0, 1, BoundingBox(4.0, 4.0, 6.0, 8.0), 0.9),
               TrackRecord(2, 1, BoundingBox(6.0, 4.0, 6.0, 8.0), 0.9)]
    out = suppress_video(frames, records, params)
    assert len(out) == 4
    assert all(o.dtype == np.uint8 for o in out)
    # frames without any record are fully blurred
    np.testing.assert_array_equal(out[1], blur_frame(frames[1], params))
    np.testing.assert_array_equal(out[3], blur_frame(frames[3], params))
    # tracked frames keep the boxed pixels
    keep0 = person_mask((24, 24), [records[0].box], params.margin).astype(bool)
    np.testing.assert_array_equal(out[0][keep0], frames[0][keep0])

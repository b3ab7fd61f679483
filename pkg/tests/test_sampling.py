"""Frame sampling, resizing, and clip assembly."""

import numpy as np
import pytest

from vadkit.sampling import (ClipTensor, SamplerParams, assemble_clip,
                             backbone_preprocess, resize_frame,
                             uniform_sample_indices)


def test_uniform_indices_frozen_case():
    want = [0, 3, 6, 9, 12, 15, 18, 21, 25, 28, 31, 34, 37, 40, 43, 46,
            50, 53, 56, 59, 62, 65, 68, 71, 75, 78, 81, 84, 87, 90, 93, 96]
    assert uniform_sample_indices(100, 32) == want


def test_uniform_indices_edge_cases():
    assert uniform_sample_indices(32, 32) == list(range(32))
    assert uniform_sample_indices(64, 32) == list(range(0, 64, 2))
    assert uniform_sample_indices(5, 32) == [0, 1, 2, 3, 4]  # short: keep all
    assert uniform_sample_indices(0, 32) == []
    assert uniform_sample_indices(7, 1) == [0]


def test_uniform_indices_properties():
    rng = np.random.default_rng(0)
    for _ in range(50):
        total = int(rng.integers(1, 500))
        target = int(rng.integers(1, 64))
        indices = uniform_sample_indices(total, target)
        assert len(indices) == min(total, target)
        assert indices[0] == 0
        assert all(0 <= i < total for i in indices)
        assert all(a <= b for a, b in zip(indices, indices[1:]))


def test_uniform_indices_validation():
    with pytest.raises(ValueError):
        uniform_sample_indices(10, 0)
    with pytest.raises(ValueError):
        uniform_sample_indices(-1, 10)


def test_resize_frame_identity_is_a_copy():
    frame = np.arange(12, dtype=np.uint8).reshape(3, 4)
    out = resize_frame(frame, 3, 4)
    assert out is not frame
    np.testing.assert_array_equal(out, frame)


def test_resize_frame_uint8_rounding():
    frame = np.array([[0, 255]], dtype=np.uint8)
    out = resize_frame(frame, 1, 4)
    assert out.dtype == np.uint8
    # interpolated values 63.75 and 191.25 round to nearest
    np.testing.assert_array_equal(out, [[0, 64, 191, 255]])


def test_resize_frame_float_dtype_preserved():
    frame = np.array([[0.0, 1.0]], dtype=np.float32)
    out = resize_frame(frame, 1, 4)
    assert out.dtype == np.float32
    np.testing.assert_allclose(out, [[0.0, 0.25, 0.75, 1.0]], atol=1e-6)


def test_backbone_preprocess_range():
    frame = np.array([[0, 127, 255]], dtype=np.uint8)
    out = backbone_preprocess(frame)
    assert out.dtype == np.float32
    assert out[0, 0] == np.float32(-1.0)
    assert out[0, 2] == np.float32(1.0)
    assert abs(float(out[0, 1]) - (127 / 127.5 - 1.0)) < 1e-7


def test_assemble_clip_pads_short_videos():
    rng = np.random.default_rng(1)
    frames = [rng.integers(0, 256, (20, 24, 3), dtype=np.uint8) for _ in range(10)]
    params = SamplerParams(clip_length=16, target_height=8, target_width=8)
    clip = assemble_clip(frames, params)
    assert clip.frames.shape == (16, 8, 8, 3)
    assert clip.frames.dtype == np.float32
    assert clip.valid_length == 10
    assert np.all(clip.frames[10:] == 0.0)
    assert np.any(clip.frames[9] != 0.0)


def test_assemble_clip_downsamples_long_videos():
    frames = [np.full((4, 4, 3), t, dtype=np.uint8) for t in range(64)]
    params = SamplerParams(clip_length=8, target_height=4, target_width=4,
                           preprocess="none")
    clip = assemble_clip(frames, params)
    assert clip.valid_length == 8
    picked = [int(clip.frames[i, 0, 0, 0]) for i in range(8)]
    assert picked == [0, 8, 16, 24, 32, 40, 48, 56]


def test_assemble_clip_scales_to_unit_interval():
    frames = [np.full((4, 4, 3), 255, dtype=np.uint8)]
    clip = assemble_clip(frames, SamplerParams(clip_length=2, target_height=4,
                                               target_width=4))
    assert np.all(clip.frames[0] == 1.0)
    assert clip.valid_length == 1


def test_assemble_clip_replicates_grayscale():
    frames = [np.arange(16, dtype=np.uint8).reshape(4, 4)]
    params = SamplerParams(clip_length=1, target_height=4, target_width=4,
                           preprocess="none")
    clip = assemble_clip(frames, params)
    np.testing.assert_array_equal(clip.frames[0, :, :, 0], clip.frames[0, :, :, 1])
    np.testing.assert_array_equal(clip.frames[0, :, :, 0], clip.frames[0, :, :, 2])


def test_assemble_clip_rejects_empty_input():
    with pytest.raises(ValueError):
        assemble_clip([], SamplerParams())


def test_preset_shapes_and_validation():
    assert SamplerParams().target_height == 299
    assert SamplerParams().target_width == 224
    with pytest.raises(ValueError):
        SamplerParams(clip_length=0)
    with pytest.raises(ValueError):
        SamplerParams(preprocess="weird")


def test_clip_tensor_validation():
    with pytest.raises(ValueError):
        ClipTensor(np.zeros((4, 2, 2, 1), dtype=np.float32), 2)
    with pytest.raises(ValueError):
        ClipTensor(np.zeros((4, 2, 2, 3), dtype=np.float32), 5)
    with pytest.raises(ValueError):
        ClipTensor(np.zeros((4, 2, 2, 3), dtype=np.float32), 0)

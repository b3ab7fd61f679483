"""Classifier parameters, checkpoints, forward pass, and the optimiser."""

import numpy as np
import pytest

from vadkit.model import (AdamState, ArchConfig, CheckpointFormatError,
                          ModelParams, adam_step, apply_dropout,
                          cross_entropy_loss, init_params, load_checkpoint,
                          loss_and_grads, model_forward, preset,
                          save_checkpoint)


TINY = ArchConfig(input_dim=6, num_classes=3, rnn1_units=4, rnn2_units=3,
                  dense_units=5, dropout1=0.3, dropout2=0.2)


# ---- configuration -----------------------------------------------------------

def test_arch_config_derived_dimensions():
    assert TINY.directions == 2
    assert TINY.rnn1_out_dim == 8
    assert TINY.context_dim == 6
    uni = ArchConfig(bidirectional=False, rnn1_units=16, rnn2_units=8)
    assert uni.directions == 1
    assert uni.rnn1_out_dim == 16
    assert uni.context_dim == 8


def test_arch_config_validation():
    with pytest.raises(ValueError):
        ArchConfig(rnn1_units=0)
    with pytest.raises(ValueError):
        ArchConfig(dropout1=1.0)
    with pytest.raises(ValueError):
        ArchConfig(l2_lambda=-0.1)


def test_presets():
    assert preset("bilstm").bidirectional
    base = preset("lstm-base")
    assert not base.bidirectional and base.dense_units == 32
    tweaked = preset("bilstm", rnn1_units=32)
    assert tweaked.rnn1_units == 32
    with pytest.raises(ValueError):
        preset("transformer")


# ---- parameters --------------------------------------------------------------

def test_init_params_shapes_and_dtype():
    params = init_params(TINY, seed=0)
    assert params.dtype == np.float32
    assert len(params.rnn1) == 2 and len(params.rnn2) == 2
    for layer in params.rnn1:
        assert layer.w.shape == (16, 6)
        assert layer.u.shape == (16, 4)
        assert layer.b.shape == (16,)
    for layer in params.rnn2:
        assert layer.w.shape == (12, 8)
        assert layer.u.shape == (12, 3)
        assert layer.b.shape == (12,)
    assert params.dense_w.shape == (5, 6)
    assert params.dense_b.shape == (5,)
    assert params.out_w.shape == (3, 5)
    assert params.out_b.shape == (3,)


def test_init_forget_gate_bias_is_one():
    params = init_params(TINY, seed=1)
    for layer in params.rnn1 + params.rnn2:
        units = layer.u.shape[1]
        np.testing.assert_array_equal(layer.b[units:2 * units], 1.0)
        np.testing.assert_array_equal(layer.b[:units], 0.0)


def test_init_recurrent_blocks_are_orthogonal():
    params = init_params(TINY, seed=2)
    for layer in params.rnn1:
        units = layer.u.shape[1]
        for g in range(4):
            block = layer.u[g * units:(g + 1) * units].astype(np.float64)
            np.testing.assert_allclose(block @ block.T, np.eye(units), atol=1e-5)


def test_named_arrays_round_trip_mutation():
    params = init_params(TINY, seed=3)
    arrays = params.as_dict()
    assert "rnn1_fwd_w" in arrays and "out_b" in arrays
    arrays["out_b"][:] = 7.0
    np.testing.assert_array_equal(params.out_b, 7.0)  # views, not copies
    clone = params.copy()
    clone.out_b[:] = 0.0
    np.testing.assert_array_equal(params.out_b, 7.0)  # copies detach


def test_astype_converts_every_array():
    params = init_params(TINY, seed=4).astype(np.float64)
    assert params.dtype == np.float64
    for array in params.as_dict().values():
        assert array.dtype == np.float64


# ---- checkpoints -------------------------------------------------------------

def test_checkpoint_round_trip(tmp_path):
    params = init_params(TINY, seed=5)
    path = tmp_path / "model.seqc"
    save_checkpoint(params, path)
    loaded = load_checkpoint(path)
    assert loaded.config == params.config
    for name, array in params.as_dict().items():
        np.testing.assert_array_equal(loaded.as_dict()[name], array)
    first = path.read_bytes()
    save_checkpoint(loaded, path)
    assert path.read_bytes() == first


def test_checkpoint_preserves_exact_rates(tmp_path):
    config = ArchConfig(input_dim=4, num_classes=2, rnn1_units=2, rnn2_units=2,
                        dense_units=2, dropout1=0.123456789, dropout2=0.3,
                        l2_lambda=1e-4, input_dropout=0.05,
                        recurrent_dropout=0.025)
    params = init_params(config, seed=6)
    path = tmp_path / "model.seqc"
    save_checkpoint(params, path)
    loaded = load_checkpoint(path)
    assert loaded.config.dropout1 == 0.123456789
    assert loaded.config.l2_lambda == 1e-4
    assert loaded.config.recurrent_dropout == 0.025


def test_checkpoint_rejects_corruption(tmp_path):
    params = init_params(TINY, seed=7)
    path = tmp_path / "model.seqc"
    save_checkpoint(params, path)
    good = path.read_bytes()

    path.write_bytes(b"WRONG" + good[5:])
    with pytest.raises(CheckpointFormatError, match="magic"):
        load_checkpoint(path)

    path.write_bytes(good[:20])
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(path)

    path.write_bytes(good[:-8])
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(path)

    path.write_bytes(good + b"\x00" * 4)
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(path)


# ---- dropout -----------------------------------------------------------------

def test_apply_dropout_identity_at_rate_zero():
    rng = np.random.default_rng(0)
    values = rng.normal(0, 1, 100).astype(np.float32)
    out, mask = apply_dropout(values, 0.0, rng, training=True)
    assert mask is None
    np.testing.assert_array_equal(out, values)
    out, mask = apply_dropout(values, 0.5, rng, training=False)
    assert mask is None
    np.testing.assert_array_equal(out, values)


def test_apply_dropout_inverted_scaling():
    rng = np.random.default_rng(1)
    values = np.ones(20000, dtype=np.float64)
    out, mask = apply_dropout(values, 0.25, rng, training=True)
    kept = out[out != 0.0]
    np.testing.assert_allclose(kept, 1.0 / 0.75)
    drop_fraction = float((out == 0.0).mean())
    assert abs(drop_fraction - 0.25) < 0.02
    np.testing.assert_array_equal(out, values * mask)


# ---- forward pass ------------------------------------------------------------

def _random_input(t_len=7, valid=5, seed=0, dim=6):
    rng = np.random.default_rng(seed)
    matrix = np.zeros((t_len, dim), dtype=np.float32)
    matrix[:valid] = rng.normal(0, 1, (valid, dim))
    return matrix


def test_forward_returns_distribution():
    params = init_params(TINY, seed=8)
    probs = model_forward(_random_input(), 5, params)
    assert probs.shape == (3,)
    assert np.all(probs > 0)
    assert abs(float(probs.sum()) - 1.0) < 1e-6


def test_forward_inference_deterministic():
    params = init_params(TINY, seed=9)
    matrix = _random_input(seed=1)
    np.testing.assert_array_equal(model_forward(matrix, 5, params),
                                  model_forward(matrix, 5, params))


def test_forward_training_seed_controls_masks():
    params = init_params(TINY, seed=10)
    matrix = _random_input(seed=2)
    a = model_forward(matrix, 5, params, training=True, seed=11)
    b = model_forward(matrix, 5, params, training=True, seed=11)
    c = model_forward(matrix, 5, params, training=True, seed=12)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_forward_unidirectional():
    config = ArchConfig(input_dim=6, num_classes=3, rnn1_units=4, rnn2_units=3,
                        dense_units=5, bidirectional=False)
    params = init_params(config, seed=12)
    probs = model_forward(_random_input(), 5, params)
    assert probs.shape == (3,)
    assert abs(float(probs.sum()) - 1.0) < 1e-6


def test_forward_validates_input():
    params = init_params(TINY, seed=13)
    with pytest.raises(ValueError):
        model_forward(np.zeros((4, 9), dtype=np.float32), 2, params)  # wrong dim
    with pytest.raises(ValueError):
        model_forward(np.zeros((4, 6), dtype=np.float32), 0, params)
    with pytest.raises(ValueError):
        model_forward(np.zeros((4, 6), dtype=np.float32), 5, params)


def test_cross_entropy_includes_l2_penalty():
    params = init_params(TINY, seed=14)
    y = np.array([1.0, 0.0, 0.0])
    certain = np.array([1.0, 0.0, 0.0])
    lam = params.config.l2_lambda
    reg = lam * (float(np.sum(params.dense_w.astype(np.float64) ** 2))
                 + float(np.sum(params.out_w.astype(np.float64) ** 2)))
    assert abs(cross_entropy_loss(y, certain, params) - reg) < 1e-12
    # fully wrong certainty is floored, not infinite
    wrong = np.array([0.0, 1.0, 0.0])
    loss = cross_entropy_loss(y, wrong, params)
    assert np.isfinite(loss)
    assert abs(loss - (-np.log(1e-12) + reg)) < 1e-9


def test_grads_cover_every_parameter():
    params = init_params(TINY, seed=15).astype(np.float64)
    y = np.array([0.0, 1.0, 0.0])
    _loss, grads = loss_and_grads(_random_input(), 5, y, params)
    assert set(grads) == set(params.as_dict())
    for name, grad in grads.items():
        assert grad.shape == params.as_dict()[name].shape
        assert np.all(np.isfinite(grad))


# ---- optimiser ---------------------------------------------------------------

def _adam_reference(values, grads, m, v, t, lr, b1=0.9, b2=0.999, eps=1e-7):
    """Textbook update on python floats."""
    out, m2, v2 = [], [], []
    for x, g, mi, vi in zip(values, grads, m, v):
        mi = b1 * mi + (1 - b1) * g
        vi = b2 * vi + (1 - b2) * g * g
        m_hat = mi / (1 - b1 ** t)
        v_hat = vi / (1 - b2 ** t)
        out.append(x - lr * m_hat / (v_hat ** 0.5 + eps))
        m2.append(mi)
        v2.append(vi)
    return out, m2, v2


def test_adam_matches_reference_updates():
    config = ArchConfig(input_dim=2, num_classes=2, rnn1_units=1, rnn2_units=1,
                        dense_units=1)
    params = init_params(config, seed=16).astype(np.float64)
    state = AdamState.init_like(params, learning_rate=0.01)
    rng = np.random.default_rng(3)

    names = list(params.as_dict())
    reference = {n: params.as_dict()[n].copy().reshape(-1) for n in names}
    ref_m = {n: np.zeros_like(reference[n]) for n in names}
    ref_v = {n: np.zeros_like(reference[n]) for n in names}

    for step in range(1, 4):
        grads = {n: rng.normal(0, 1, params.as_dict()[n].shape)
                 for n in names}
        adam_step(params, grads, state)
        assert state.step == step
        for n in names:
            out, m2, v2 = _adam_reference(
                reference[n].tolist(), grads[n].reshape(-1).tolist(),
                ref_m[n].tolist(), ref_v[n].tolist(), step, 0.01)
            reference[n] = np.array(out)
            ref_m[n] = np.array(m2)
            ref_v[n] = np.array(v2)
            np.testing.assert_allclose(params.as_dict()[n].reshape(-1),
                                       reference[n], rtol=1e-12, atol=1e-15)


def test_adam_zero_gradient_keeps_params():
    params = init_params(TINY, seed=17)
    state = AdamState.init_like(params, learning_rate=0.1)
    before = {n: a.copy() for n, a in params.as_dict().items()}
    zero = {n: np.zeros_like(a) for n, a in params.as_dict().items()}
    adam_step(params, zero, state)
    for n, a in params.as_dict().items():
        np.testing.assert_array_equal(a, before[n])
    with pytest.raises(ValueError):
        AdamState.init_like(params, learning_rate=-0.1)
    with pytest.raises(ValueError):
        AdamState.init_like(params, beta1=1.0)
    missing = dict(zero)
    missing.pop("out_b")
    with pytest.raises(KeyError):
        adam_step(params, missing, state)


def test_adam_state_mirrors_param_dtype():
    params = init_params(TINY, seed=18)
    state = AdamState.init_like(params)
    for n, a in params.as_dict().items():
        assert state.m[n].dtype == a.dtype
        assert state.v[n].shape == a.shape

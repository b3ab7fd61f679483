"""Forward and backward passes of the recurrent sequence classifier.

Only the first valid_length rows of a feature matrix are ever touched,
so padded and unpadded copies of the same sequence produce identical
numbers. Dropout draws come from per-site child generators spawned off
one seed (layer masks, inter-layer dropout, head dropout each get their
own stream), which keeps every site reproducible regardless of what the
other sites consume.

The backward pass replays the exact forward arithmetic from caches, so
its gradients match finite differences of the realised loss; training
mode resolves dropout masks once per call and both passes share them.
"""

from __future__ import annotations

import numpy as np

from ..kernels.lstm import lstm_backward, lstm_forward
from .config import ArchConfig
from .params import LstmLayerParams, ModelParams

_PROB_FLOOR = 1e-12
_RNG_SITES = 6  # rnn1 fwd/bwd, rnn2 fwd/bwd, dropout1, dropout2


def _site_rngs(seed: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(_RNG_SITES)
    return [np.random.default_rng(c) for c in children]


def apply_dropout(values: np.ndarray, rate: float, rng: np.random.Generator,
                  training: bool) -> tuple[np.ndarray, np.ndarray | None]:
    """Inverted dropout: zero with probability rate, scale the rest.

    Returns (output, mask); inference or rate 0 passes values through
    with a None mask. Each kept element is scaled by 1 / (1 - rate) so
    expectations match between modes.
    """
    if not training or rate == 0.0:
        return values, None
    keep = 1.0 - rate
    mask = (rng.random(values.shape) >= rate).astype(values.dtype) / values.dtype.type(keep)
    return values * mask, mask


def _variational_masks(dim_in: int, units: int, config: ArchConfig,
                       rng: np.random.Generator, training: bool, dtype
                       ) -> tuple[np.ndarray, np.ndarray]:
    ones_in = np.ones(dim_in, dtype=dtype)
    ones_rec = np.ones(units, dtype=dtype)
    in_mask, _ = apply_dropout(ones_in, config.input_dropout, rng, training)
    rec_mask, _ = apply_dropout(ones_rec, config.recurrent_dropout, rng, training)
    return in_mask, rec_mask


def _run_direction(x: np.ndarray, layer: LstmLayerParams, reverse: bool,
                   in_mask: np.ndarray, rec_mask: np.ndarray) -> dict:
    x_seen = x[::-1] if reverse else x
    h_seq, c_seq, gates = lstm_forward(x_seen, layer.w, layer.u, layer.b,
                                       in_mask, rec_mask)
    return {"x": x_seen, "reverse": reverse, "in_mask": in_mask,
            "rec_mask": rec_mask, "h_seq": h_seq, "c_seq": c_seq, "gates": gates}


def _check_inputs(matrix: np.ndarray, valid_length: int, config: ArchConfig) -> None:
    if matrix.ndim != 2 or matrix.shape[1] != config.input_dim:
        raise ValueError(f"expected a (T, {config.input_dim}) feature matrix, "
                         f"got shape {matrix.shape}")
    if not (1 <= valid_length <= matrix.shape[0]):
        raise ValueError(f"valid_length {valid_length} outside 1..{matrix.shape[0]}")


def _forward_cache(matrix: np.ndarray, valid_length: int, params: ModelParams,
                   training: bool, seed: int) -> tuple[np.ndarray, dict]:
    config = params.config
    _check_inputs(matrix, valid_length, config)
    dtype = params.dtype
    x = np.ascontiguousarray(matrix[:valid_length], dtype=dtype)
    rngs = _site_rngs(seed)

    u1 = config.rnn1_units
    layer1 = []
    for d in range(config.directions):
        in_mask, rec_mask = _variational_masks(config.input_dim, u1, config,
                                               rngs[d], training, dtype)
        layer1.append(_run_direction(x, params.rnn1[d], reverse=(d == 1),
                                     in_mask=in_mask, rec_mask=rec_mask))
    if config.bidirectional:
        h1 = np.concatenate([layer1[0]["h_seq"], layer1[1]["h_seq"][::-1]], axis=1)
    else:
        h1 = layer1[0]["h_seq"]

    h1_dropped, drop1_mask = apply_dropout(h1, config.dropout1, rngs[4], training)

    u2 = config.rnn2_units
    layer2 = []
    for d in range(config.directions):
        in_mask, rec_mask = _variational_masks(config.rnn1_out_dim, u2, config,
                                               rngs[2 + d], training, dtype)
        layer2.append(_run_direction(h1_dropped, params.rnn2[d], reverse=(d == 1),
                                     in_mask=in_mask, rec_mask=rec_mask))
    finals = [entry["h_seq"][-1] for entry in layer2]
    context = np.concatenate(finals) if config.bidirectional else finals[0]

    ctx_dropped, drop2_mask = apply_dropout(context, config.dropout2, rngs[5], training)

    dense_pre = params.dense_w @ ctx_dropped + params.dense_b
    dense_act = np.maximum(dense_pre, 0)
    logits = params.out_w @ dense_act + params.out_b

    shifted = logits - logits.max()
    exp = np.exp(shifted)
    probs = exp / exp.sum()

    cache = {"x": x, "layer1": layer1, "layer2": layer2,
             "drop1_mask": drop1_mask, "drop2_mask": drop2_mask,
             "ctx_dropped": ctx_dropped, "dense_pre": dense_pre,
             "dense_act": dense_act, "probs": probs}
    return probs, cache


def model_forward(matrix: np.ndarray, valid_length: int, params: ModelParams,
                  training: bool = False, seed: int = 0) -> np.ndarray:
    """Class probabilities for one feature sequence; rows sum to one."""
    probs, _ = _forward_cache(matrix, valid_length, params, training, seed)
    return probs


def cross_entropy_loss(y: np.ndarray, probs: np.ndarray, params: ModelParams) -> float:
    """Categorical cross entropy plus the L2 penalty on the head kernels.

    Probabilities are floored at 1e-12 inside the log, so certainty-zero
    mistakes stay finite.
    """
    y = np.asarray(y, dtype=np.float64)
    p = np.maximum(np.asarray(probs, dtype=np.float64), _PROB_FLOOR)
    data = -float(np.sum(y * np.log(p)))
    lam = params.config.l2_lambda
    reg = lam * (float(np.sum(params.dense_w.astype(np.float64) ** 2))
                 + float(np.sum(params.out_w.astype(np.float64) ** 2)))
    return data + reg


def _backward_direction(entry: dict, layer: LstmLayerParams,
                        d_h_seq_core: np.ndarray) -> tuple[np.ndarray, dict]:
    # d_h_seq_core is in the direction's own time order; dx comes back
    # re-aligned to the original order.
    dx, dw, du, db = lstm_backward(entry["x"], layer.w, layer.u,
                                   entry["in_mask"], entry["rec_mask"],
                                   entry["h_seq"], entry["c_seq"], entry["gates"],
                                   np.ascontiguousarray(d_h_seq_core))
    if entry["reverse"]:
        dx = dx[::-1]
    return dx, {"w": dw, "u": du, "b": db}


def loss_and_grads(matrix: np.ndarray, valid_length: int, y: np.ndarray,
                   params: ModelParams, training: bool = False, seed: int = 0
                   ) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and the gradient of every parameter tensor for one sequence.

    Gradient keys match ModelParams.named_arrays(). The L2 penalty
    contributes 2 * lambda * w to the dense and output kernels.
    """
    config = params.config
    probs, cache = _forward_cache(matrix, valid_length, params, training, seed)
    y = np.asarray(y, dtype=params.dtype)
    if y.shape != probs.shape:
        raise ValueError(f"label vector shape {y.shape} does not match "
                         f"{probs.shape} classes")
    loss = cross_entropy_loss(y, probs, params)

    lam = params.dtype.type(config.l2_lambda)
    d_logits = (probs - y).astype(params.dtype)
    grads: dict[str, np.ndarray] = {}
    grads["out_w"] = np.outer(d_logits, cache["dense_act"]) + 2 * lam * params.out_w
    grads["out_b"] = d_logits
    d_act = params.out_w.T @ d_logits
    d_pre = d_act * (cache["dense_pre"] > 0)
    grads["dense_w"] = np.outer(d_pre, cache["ctx_dropped"]) + 2 * lam * params.dense_w
    grads["dense_b"] = d_pre
    d_ctx = params.dense_w.T @ d_pre
    if cache["drop2_mask"] is not None:
        d_ctx = d_ctx * cache["drop2_mask"]

    u2 = config.rnn2_units
    t_len = cache["x"].shape[0]
    d_h1_dropped = np.zeros((t_len, config.rnn1_out_dim), dtype=params.dtype)
    for d in range(config.directions):
        d_final = d_ctx[d * u2:(d + 1) * u2]
        d_h_seq = np.zeros((t_len, u2), dtype=params.dtype)
        d_h_seq[-1] = d_final
        dx, layer_grads = _backward_direction(cache["layer2"][d], params.rnn2[d], d_h_seq)
        d_h1_dropped += dx
        for suffix, g in layer_grads.items():
            grads[f"rnn2_{ModelParams._DIRECTION_NAMES[d]}_{suffix}"] = g

    d_h1 = d_h1_dropped
    if cache["drop1_mask"] is not None:
        d_h1 = d_h1 * cache["drop1_mask"]

    u1 = config.rnn1_units
    for d in range(config.directions):
        d_h_seq = d_h1[:, d * u1:(d + 1) * u1]
        if cache["layer1"][d]["reverse"]:
            d_h_seq = d_h_seq[::-1]  # original time order -> core order
        _dx, layer_grads = _backward_direction(cache["layer1"][d], params.rnn1[d],
                                               d_h_seq)
        for suffix, g in layer_grads.items():
            grads[f"rnn1_{ModelParams._DIRECTION_NAMES[d]}_{suffix}"] = g

    return loss, grads


def model_backward(matrix: np.ndarray, valid_length: int, y: np.ndarray,
                   params: ModelParams, training: bool = False, seed: int = 0
                   ) -> dict[str, np.ndarray]:
    """Gradients only; see loss_and_grads."""
    _loss, grads = loss_and_grads(matrix, valid_length, y, params, training, seed)
    return grads

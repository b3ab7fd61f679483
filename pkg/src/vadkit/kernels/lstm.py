"""LSTM sequence forward and backward kernels.

Layout conventions shared by every caller:

* weights w: (4u, d), recurrent weights u: (4u, u), bias b: (4u,),
  with the four gate blocks stacked in the order input, forget,
  cell candidate, output;
* the cell recurrence is c_t = f * c_{t-1} + i * g and h_t = o * tanh(c_t)
  with h_0 = c_0 = 0;
* in_mask (d,) and rec_mask (u,) are dropout masks applied to the input
  and to the recurrent hidden state before the matrix products; pass
  all-ones vectors when dropout is off. The same mask is reused at every
  timestep (variational dropout), so the kernels take plain vectors.

The forward pass returns the full hidden and cell traces plus the
activated gate values, which is exactly the cache the backward pass
needs. Both kernels come in a jitted loop flavour and a numpy flavour;
results agree to rounding error and each backward is exact for its own
forward. Matrix products in the jitted flavour are hand-rolled loops so
the kernels stay self-contained under nopython compilation.
"""

from __future__ import annotations

import numpy as np

from .. import accel
from ..accel import maybe_njit


@maybe_njit(cache=True, inline="always")
def _sigmoid_scalar(v):
    if v >= 0.0:
        return 1.0 / (1.0 + np.exp(-v))
    e = np.exp(v)
    return e / (1.0 + e)


def _sigmoid_vec(z: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(z))
    return np.where(z >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))


@maybe_njit(cache=True)
def _lstm_forward_loops(x, w, u, b, in_mask, rec_mask):
    t_len, d = x.shape
    uu = u.shape[1]
    h_seq = np.zeros((t_len, uu), x.dtype)
    c_seq = np.zeros((t_len, uu), x.dtype)
    gates = np.zeros((t_len, 4 * uu), x.dtype)
    xt = np.empty(d, x.dtype)
    hp = np.empty(uu, x.dtype)
    z = np.empty(4 * uu, x.dtype)
    for t in range(t_len):
        for k in range(d):
            xt[k] = x[t, k] * in_mask[k]
        for k in range(uu):
            hp[k] = h_seq[t - 1, k] * rec_mask[k] if t > 0 else 0.0
        for gi in range(4 * uu):
            acc = b[gi]
            for k in range(d):
                acc += w[gi, k] * xt[k]
            for k in range(uu):
                acc += u[gi, k] * hp[k]
            z[gi] = acc
        for j in range(uu):
            ig = _sigmoid_scalar(z[j])
            fg = _sigmoid_scalar(z[uu + j])
            gg = np.tanh(z[2 * uu + j])
            og = _sigmoid_scalar(z[3 * uu + j])
            c_prev = c_seq[t - 1, j] if t > 0 else 0.0
            c = fg * c_prev + ig * gg
            gates[t, j] = ig
            gates[t, uu + j] = fg
            gates[t, 2 * uu + j] = gg
            gates[t, 3 * uu + j] = og
            c_seq[t, j] = c
            h_seq[t, j] = og * np.tanh(c)
    return h_seq, c_seq, gates


def _lstm_forward_numpy(x, w, u, b, in_mask, rec_mask):
    t_len, _ = x.shape
    uu = u.shape[1]
    dtype = x.dtype
    h_seq = np.zeros((t_len, uu), dtype=dtype)
    c_seq = np.zeros((t_len, uu), dtype=dtype)
    gates = np.zeros((t_len, 4 * uu), dtype=dtype)
    zx = (x * in_mask) @ w.T + b
    h = np.zeros(uu, dtype=dtype)
    c = np.zeros(uu, dtype=dtype)
    for t in range(t_len):
        z = zx[t] + u @ (h * rec_mask)
        ig = _sigmoid_vec(z[:uu])
        fg = _sigmoid_vec(z[uu:2 * uu])
        gg = np.tanh(z[2 * uu:3 * uu])
        og = _sigmoid_vec(z[3 * uu:])
        c = fg * c + ig * gg
        h = og * np.tanh(c)
        gates[t, :uu] = ig
        gates[t, uu:2 * uu] = fg
        gates[t, 2 * uu:3 * uu] = gg
        gates[t, 3 * uu:] = og
        c_seq[t] = c
        h_seq[t] = h
    return h_seq, c_seq, gates


@maybe_njit(cache=True)
def _lstm_backward_loops(x, w, u, in_mask, rec_mask, h_seq, c_seq, gates, d_h_seq):
    t_len, d = x.shape
    uu = u.shape[1]
    dx = np.zeros((t_len, d), x.dtype)
    dw = np.zeros(w.shape, x.dtype)
    du = np.zeros(u.shape, x.dtype)
    db = np.zeros(4 * uu, x.dtype)
    dh_carry = np.zeros(uu, x.dtype)
    dc_carry = np.zeros(uu, x.dtype)
    dz = np.empty(4 * uu, x.dtype)
    for t in range(t_len - 1, -1, -1):
        for j in range(uu):
            ig = gates[t, j]
            fg = gates[t, uu + j]
            gg = gates[t, 2 * uu + j]
            og = gates[t, 3 * uu + j]
            c_prev = c_seq[t - 1, j] if t > 0 else 0.0
            dh = d_h_seq[t, j] + dh_carry[j]
            tc = np.tanh(c_seq[t, j])
            dov = dh * tc
            dc = dc_carry[j] + dh * og * (1.0 - tc * tc)
            dz[j] = dc * gg * ig * (1.0 - ig)
            dz[uu + j] = dc * c_prev * fg * (1.0 - fg)
            dz[2 * uu + j] = dc * ig * (1.0 - gg * gg)
            dz[3 * uu + j] = dov * og * (1.0 - og)
            dc_carry[j] = dc * fg
        for gi in range(4 * uu):
            val = dz[gi]
            db[gi] += val
            for k in range(d):
                dw[gi, k] += val * x[t, k] * in_mask[k]
            if t > 0:
                for k in range(uu):
                    du[gi, k] += val * h_seq[t - 1, k] * rec_mask[k]
        for k in range(d):
            acc = 0.0
            for gi in range(4 * uu):
                acc += w[gi, k] * dz[gi]
            dx[t, k] = acc * in_mask[k]
        for k in range(uu):
            acc = 0.0
            for gi in range(4 * uu):
                acc += u[gi, k] * dz[gi]
            dh_carry[k] = acc * rec_mask[k]
    return dx, dw, du, db


def _lstm_backward_numpy(x, w, u, in_mask, rec_mask, h_seq, c_seq, gates, d_h_seq):
    t_len, _ = x.shape
    uu = u.shape[1]
    dtype = x.dtype
    dx = np.zeros_like(x)
    dw = np.zeros(w.shape, dtype=dtype)
    du = np.zeros(u.shape, dtype=dtype)
    db = np.zeros(4 * uu, dtype=dtype)
    dh_carry = np.zeros(uu, dtype=dtype)
    dc_carry = np.zeros(uu, dtype=dtype)
    xm = x * in_mask
    zeros = np.zeros(uu, dtype=dtype)
    for t in range(t_len - 1, -1, -1):
        ig = gates[t, :uu]
        fg = gates[t, uu:2 * uu]
        gg = gates[t, 2 * uu:3 * uu]
        og = gates[t, 3 * uu:]
        c_prev = c_seq[t - 1] if t > 0 else zeros
        h_prev = h_seq[t - 1] if t > 0 else zeros
        dh = d_h_seq[t] + dh_carry
        tc = np.tanh(c_seq[t])
        dov = dh * tc
        dc = dc_carry + dh * og * (1.0 - tc * tc)
        dz = np.concatenate([
            dc * gg * ig * (1.0 - ig),
            dc * c_prev * fg * (1.0 - fg),
            dc * ig * (1.0 - gg * gg),
            dov * og * (1.0 - og),
        ])
        dw += np.outer(dz, xm[t])
        du += np.outer(dz, h_prev * rec_mask)
        db += dz
        dx[t] = (w.T @ dz) * in_mask
        dh_carry = (u.T @ dz) * rec_mask
        dc_carry = dc * fg
    return dx, dw, du, db


def _check_common(x, w, u, b_or_none, in_mask, rec_mask):
    if x.ndim != 2:
        raise ValueError("x must be (T, d)")
    uu = u.shape[1]
    if w.shape != (4 * uu, x.shape[1]) or u.shape != (4 * uu, uu):
        raise ValueError("weight shapes inconsistent with gate layout")
    if b_or_none is not None and b_or_none.shape != (4 * uu,):
        raise ValueError("bias shape inconsistent with gate layout")
    if in_mask.shape != (x.shape[1],) or rec_mask.shape != (uu,):
        raise ValueError("mask shapes inconsistent with inputs")


def lstm_forward(x, w, u, b, in_mask, rec_mask):
    """Run the recurrence over x (T, d); see module docstring for layout.

    Returns (h_seq, c_seq, gates), each with T rows. T = 0 is legal and
    yields empty traces.
    """
    _check_common(x, w, u, b, in_mask, rec_mask)
    args = [np.ascontiguousarray(a) for a in (x, w, u, b, in_mask, rec_mask)]
    if accel.NUMBA_ENABLED and x.shape[0] > 0:
        return _lstm_forward_loops(*args)
    return _lstm_forward_numpy(*args)


def lstm_backward(x, w, u, in_mask, rec_mask, h_seq, c_seq, gates, d_h_seq):
    """Backpropagate d_h_seq (T, u) through a cached forward pass.

    Returns (dx, dw, du, db). The caches must come from lstm_forward on
    the same inputs; gradients are exact for the realised arithmetic.
    """
    _check_common(x, w, u, None, in_mask, rec_mask)
    args = [np.ascontiguousarray(a) for a in
            (x, w, u, in_mask, rec_mask, h_seq, c_seq, gates, d_h_seq)]
    if accel.NUMBA_ENABLED and x.shape[0] > 0:
        return _lstm_backward_loops(*args)
    return _lstm_backward_numpy(*args)

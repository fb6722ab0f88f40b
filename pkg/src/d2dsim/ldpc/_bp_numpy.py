"""Vectorized sum-product decoder, the fallback for the compiled kernel.

Flooding schedule.  Check-node exclusion products are computed with padded
prefix/suffix cumulative products (division-free, so zero messages are
handled exactly).  The batch shrinks as blocks converge.

Convergence means the hard decisions satisfy every check AND every
posterior has a definite sign; an all-zero input therefore never converges.
"""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"

_LLR_CLAMP = 30.0
_ATANH_LIMIT = 1.0 - 1e-15


def _check_pass(v2c, ce, scatter):
    """Check-node update: per-edge exclusion products -> 2*atanh."""
    t = np.tanh(0.5 * np.clip(v2c, -_LLR_CLAMP, _LLR_CLAMP))
    t_ext = np.concatenate([t, np.ones((t.shape[0], 1))], axis=1)
    tg = t_ext[:, ce]  # (b, m, d_max), pads contribute 1
    fwd = np.cumprod(tg, axis=2)
    bwd = np.cumprod(tg[:, :, ::-1], axis=2)[:, :, ::-1]
    excl = np.ones_like(tg)
    excl[:, :, 1:] *= fwd[:, :, :-1]
    excl[:, :, :-1] *= bwd[:, :, 1:]
    np.clip(excl, -_ATANH_LIMIT, _ATANH_LIMIT, out=excl)
    msgs = 2.0 * np.arctanh(excl)
    return msgs.reshape(t.shape[0], -1)[:, scatter]


def bp_decode_batch(llrs, edge_var, check_edges, var_edges, max_iters):
    """Decode a batch of LLR rows.

    llrs: (B, n) float64; edge_var: (E,) int32; check_edges: (m, d_max)
    int32 with -1 padding (real edges packed first); var_edges: (n, 3) int32.
    Returns (bits uint8 (B, n), converged bool (B,), iters int32 (B,)).
    """
    llrs = np.clip(np.asarray(llrs, dtype=np.float64), -_LLR_CLAMP, _LLR_CLAMP)
    bsz, n = llrs.shape
    n_edges = edge_var.shape[0]

    ce = check_edges.astype(np.int64).copy()
    pad = ce < 0
    ce[pad] = n_edges  # sentinel edge slot
    valid_flat = np.nonzero(~pad.ravel())[0]
    # each real edge appears exactly once in check_edges
    scatter = np.empty(n_edges, dtype=np.int64)
    scatter[ce.ravel()[valid_flat]] = valid_flat

    ev = edge_var.astype(np.int64)
    ev_ext = np.concatenate([ev, [n]])  # sentinel variable for pads
    slot_var = ev_ext[ce]  # (m, d_max)
    ve = var_edges.astype(np.int64)

    out_bits = np.zeros((bsz, n), dtype=np.uint8)
    out_conv = np.zeros(bsz, dtype=bool)
    out_iters = np.full(bsz, max_iters, dtype=np.int32)

    active = np.arange(bsz)
    v2c = llrs[:, ev]

    for it in range(1, max_iters + 1):
        c2v = _check_pass(v2c, ce, scatter)
        totals = llrs[active] + c2v[:, ve].sum(axis=2)

        bits = totals < 0.0
        bits_ext = np.concatenate([bits, np.zeros((bits.shape[0], 1), dtype=bool)], axis=1)
        syndrome_bad = ((bits_ext[:, slot_var].sum(axis=2) & 1) != 0).any(axis=1)
        definite = (totals != 0.0).all(axis=1)
        done = ~syndrome_bad & definite

        if done.any():
            idx = active[done]
            out_bits[idx] = bits[done]
            out_conv[idx] = True
            out_iters[idx] = it
        keep = ~done
        active = active[keep]
        if active.size == 0:
            return out_bits, out_conv, out_iters
        if it == max_iters:
            out_bits[active] = bits[keep]
            return out_bits, out_conv, out_iters
        v2c = totals[keep][:, ev] - c2v[keep]

    raise AssertionError("unreachable")

"""Belief-propagation decoding with a compiled kernel when available.

The Cython extension is optional; `pip install` falls back to a pure
numpy kernel with the same message-passing schedule and clamps, so the
two backends agree on decisions.  Set D2DSIM_FORCE_NUMPY=1 to skip the
extension.
"""

from __future__ import annotations

import os

import numpy as np

from . import _bp_numpy
from .code import LdpcCode

if os.environ.get("D2DSIM_FORCE_NUMPY", "") not in ("", "0"):
    _kernel = _bp_numpy
else:
    try:
        from . import _bp as _kernel  # type: ignore[no-redef]
    except ImportError:
        _kernel = _bp_numpy

DEFAULT_MAX_ITERS = 50


def backend_name():
    """Name of the active kernel, "cython" or "numpy"."""
    return _kernel.BACKEND


def decode_batch(code: LdpcCode, llrs, max_iters: int = DEFAULT_MAX_ITERS):
    """Decode rows of channel LLRs (positive means bit 0).

    Returns (info_bits (B, k) uint8, converged (B,) bool, iters (B,) int32).
    Non-converged rows still carry the best-effort hard decisions.
    """
    llrs = np.atleast_2d(np.asarray(llrs, dtype=np.float64))
    if llrs.shape[1] != code.n:
        raise ValueError(f"expected {code.n} LLRs per block, got {llrs.shape[1]}")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    st = code.edge_structure()
    bits, conv, iters = _kernel.bp_decode_batch(
        llrs, st["edge_var"], st["check_edges"], st["var_edges"], int(max_iters)
    )
    return bits[:, code.info_cols], conv, iters


def decode(code: LdpcCode, llrs, max_iters: int = DEFAULT_MAX_ITERS):
    """Single-block decode.  Returns (info_bits (k,) uint8, converged bool)."""
    bits, conv, _ = decode_batch(code, np.asarray(llrs)[None, :], max_iters)
    return bits[0], bool(conv[0])

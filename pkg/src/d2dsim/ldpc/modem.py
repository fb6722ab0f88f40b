"""Gray-mapped QPSK/QAM over complex AWGN with max-log LLR demapping.

Square constellations only.  Each symbol carries b bits: the first b/2
select the I-axis level (Gray code, MSB first), the last b/2 the Q-axis.
Symbol energy is normalized to 1, and snr_db is Es/N0: the complex noise
variance is N0 = 10^(-snr_db/10).

LLR sign convention: positive means bit 0 is more likely (llr = log p0/p1).
"""

from __future__ import annotations

from enum import Enum

import numpy as np


class Modulation(Enum):
    QPSK = "qpsk"
    QAM16 = "qam16"
    QAM64 = "qam64"
    QAM256 = "qam256"

    @property
    def bits_per_symbol(self) -> int:
        return {"qpsk": 2, "qam16": 4, "qam64": 6, "qam256": 8}[self.value]

    @property
    def order_index(self) -> int:
        """1 for QPSK up to 4 for QAM256 (used by the latency model)."""
        return self.bits_per_symbol // 2


MODULATIONS = tuple(Modulation)


def _gray_levels(bits_per_axis: int):
    """PAM levels indexed by the Gray-coded bit pattern of each axis.

    levels[g] is the amplitude whose Gray label is g (MSB first); spacing 2
    around zero, unnormalized.
    """
    m = 1 << bits_per_axis
    idx = np.arange(m)
    gray = idx ^ (idx >> 1)  # label of the level at position idx
    levels = np.empty(m)
    levels[gray] = 2 * idx - (m - 1)
    return levels


def _axis_tables(mod: Modulation):
    b_axis = mod.bits_per_symbol // 2
    levels = _gray_levels(b_axis)
    scale = np.sqrt(2.0 * (levels.size**2 - 1) / 3.0)  # unit symbol energy
    return levels / scale, b_axis


def modulate(bits: np.ndarray, mod: Modulation) -> np.ndarray:
    """Map a (B, nbits) bit batch to complex symbols, zero-padding the tail."""
    bits = np.atleast_2d(np.asarray(bits, dtype=np.uint8))
    b = mod.bits_per_symbol
    nbits = bits.shape[1]
    n_sym = -(-nbits // b)
    padded = np.zeros((bits.shape[0], n_sym * b), dtype=np.uint8)
    padded[:, :nbits] = bits
    grouped = padded.reshape(bits.shape[0], n_sym, b)
    levels, b_axis = _axis_tables(mod)
    weights = 1 << np.arange(b_axis - 1, -1, -1)
    i_label = grouped[:, :, :b_axis] @ weights
    q_label = grouped[:, :, b_axis:] @ weights
    return levels[i_label] + 1j * levels[q_label]


def _axis_llrs(y_axis: np.ndarray, levels: np.ndarray, b_axis: int, n0: float) -> np.ndarray:
    """Max-log LLRs for the bits of one axis; shape (..., b_axis)."""
    d2 = (y_axis[..., None] - levels[None, :]) ** 2  # (..., m)
    labels = np.arange(levels.size)
    out = np.empty(y_axis.shape + (b_axis,))
    for i in range(b_axis):
        bit_mask = (labels >> (b_axis - 1 - i)) & 1
        d0 = d2[..., bit_mask == 0].min(axis=-1)
        d1 = d2[..., bit_mask == 1].min(axis=-1)
        out[..., i] = (d1 - d0) / n0
    return out


def demap(symbols: np.ndarray, mod: Modulation, snr_db: float, nbits: int) -> np.ndarray:
    """Max-log LLRs for the first `nbits` bits carried by `symbols`."""
    n0 = 10.0 ** (-snr_db / 10.0)
    levels, b_axis = _axis_tables(mod)
    li = _axis_llrs(symbols.real, levels, b_axis, n0)
    lq = _axis_llrs(symbols.imag, levels, b_axis, n0)
    llr = np.concatenate([li, lq], axis=-1)  # (..., n_sym, b)
    flat = llr.reshape(llr.shape[:-2] + (-1,))
    return flat[..., :nbits]


def transmit_awgn(codeword: np.ndarray, mod: Modulation, snr_db: float, seed=None,
                  rng: np.random.Generator | None = None) -> np.ndarray:
    """Modulate, add complex AWGN at the given Es/N0, and demap to LLRs.

    Accepts one codeword (n,) or a batch (B, n); output matches.
    """
    if rng is None:
        rng = np.random.default_rng(seed)
    bits = np.asarray(codeword, dtype=np.uint8)
    single = bits.ndim == 1
    bits = np.atleast_2d(bits)
    nbits = bits.shape[1]
    sym = modulate(bits, mod)
    n0 = 10.0 ** (-snr_db / 10.0)
    noise = rng.normal(scale=np.sqrt(n0 / 2.0), size=sym.shape + (2,))
    y = sym + noise[..., 0] + 1j * noise[..., 1]
    llr = demap(y, mod, snr_db, nbits)
    return llr[0] if single else llr


def hard_decisions(llrs: np.ndarray) -> np.ndarray:
    """Bit decisions from LLR signs (positive -> 0)."""
    return (np.asarray(llrs) < 0).astype(np.uint8)

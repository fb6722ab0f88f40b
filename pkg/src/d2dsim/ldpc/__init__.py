"""LDPC link level: code construction, Gray-QAM modem, BP decoding, BLER curves."""

from .code import LdpcCode, encode, gf2_rank, gf2_rref, make_code
from .curves import BlerCurve, CalibrationTable, calibrate, pav_nonincreasing, snr_grid
from .decoder import DEFAULT_MAX_ITERS, backend_name, decode, decode_batch
from .modem import MODULATIONS, Modulation, demap, hard_decisions, modulate, transmit_awgn

__all__ = [
    "BlerCurve",
    "CalibrationTable",
    "calibrate",
    "pav_nonincreasing",
    "snr_grid",
    "MODULATIONS",
    "LdpcCode",
    "encode",
    "gf2_rank",
    "gf2_rref",
    "make_code",
    "DEFAULT_MAX_ITERS",
    "backend_name",
    "decode",
    "decode_batch",
    "Modulation",
    "demap",
    "hard_decisions",
    "modulate",
    "transmit_awgn",
]

"""Per-link radio abstractions: UMa propagation, SNR, link adaptation,
throughput, packet latency and jitter.

Distances feed the propagation formulas directly (heights enter through
the height correction and the LOS breakpoint only).  NLOS is the default
for every link; D2D reuses the UMa formula with UE heights at both ends.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .ldpc.curves import CalibrationTable
from .ldpc.modem import MODULATIONS, Modulation

SPEED_OF_LIGHT = 3e8

DEFAULT_BS_HEIGHT_M = 25.0
DEFAULT_UE_HEIGHT_M = 1.5

# dB backoff applied when predicting link quality for denser constellations
DEFAULT_MOD_PENALTIES_DB = {
    Modulation.QPSK: 0.0,
    Modulation.QAM16: 0.5,
    Modulation.QAM64: 1.0,
    Modulation.QAM256: 1.5,
}
DEFAULT_SPEED_PENALTY_DB_PER_MPS = 0.2
DEFAULT_CODE_RATE = 0.5
DEFAULT_OVERHEAD = 0.14
DEFAULT_BLER_TARGET = 0.1

DEFAULT_SCHED_TTIS = 0.5
DEFAULT_DECODE_TTIS = 0.1
DEFAULT_HARQ_RTT_TTIS = 8.0
DEFAULT_QUEUE_BASE_MS = 2.0
DEFAULT_LATENCY_CAP_MS = 100.0
DEFAULT_JITTER_WINDOW = 20


class RatId(Enum):
    NR = "nr"
    LTE = "lte"
    D2D = "d2d"


@dataclass(frozen=True)
class Rat:
    """One radio access technology and its link-budget constants."""

    id: RatId
    carrier_ghz: float
    bandwidth_hz: float
    scs_khz: float
    tx_power_dbm: float
    noise_figure_db: float
    max_modulation: Modulation
    diversity_bonus_db: float = 0.0

    @property
    def tti_ms(self) -> float:
        return 15.0 / self.scs_khz


def default_rats() -> dict:
    return {
        RatId.NR: Rat(RatId.NR, 5.5, 20e6, 30.0, 35.0, 6.0, Modulation.QAM256),
        RatId.LTE: Rat(RatId.LTE, 2.1, 20e6, 15.0, 35.0, 7.0, Modulation.QAM64),
        RatId.D2D: Rat(RatId.D2D, 2.4, 20e6, 15.0, 15.0, 5.0, Modulation.QAM64),
    }


@dataclass(frozen=True)
class LinkBudget:
    """Radio state of one hop."""

    rat: Rat
    distance_m: float
    shadow_db: float
    rsrp_dbm: float
    snr_db: float
    effective_snr_db: float


@dataclass(frozen=True)
class PacketOutcome:
    throughput_bps: float
    bler: float
    ber: float
    latency_ms: float
    delivered: bool


def pathloss_uma(
    carrier_ghz: float,
    distance_m: float,
    bs_height_m: float = DEFAULT_BS_HEIGHT_M,
    ue_height_m: float = DEFAULT_UE_HEIGHT_M,
    los: bool = False,
) -> float:
    """UMa path loss in dB; distances below 1 m are clamped to 1 m."""
    if distance_m <= 0:
        raise ValueError("distance_m must be positive")
    d = max(float(distance_m), 1.0)
    f = float(carrier_ghz)
    # breakpoint uses effective antenna heights (1 m environment height)
    d_bp = 4.0 * (bs_height_m - 1.0) * (ue_height_m - 1.0) * f * 1e9 / SPEED_OF_LIGHT
    if d_bp > 0 and d > d_bp:
        pl_los = (
            28.0
            + 40.0 * np.log10(d)
            + 20.0 * np.log10(f)
            - 9.0 * np.log10(d_bp**2 + (bs_height_m - ue_height_m) ** 2)
        )
    else:
        pl_los = 28.0 + 22.0 * np.log10(d) + 20.0 * np.log10(f)
    if los:
        return float(pl_los)
    pl_nlos = 13.54 + 39.08 * np.log10(d) + 20.0 * np.log10(f) - 0.6 * (ue_height_m - 1.5)
    return float(max(pl_los, pl_nlos))


def rsrp(
    rat: Rat,
    distance_m: float,
    shadow_db: float = 0.0,
    *,
    bs_height_m: float = DEFAULT_BS_HEIGHT_M,
    ue_height_m: float = DEFAULT_UE_HEIGHT_M,
) -> float:
    """Received power in dBm; D2D uses the UE height at both ends."""
    tx_height = ue_height_m if rat.id is RatId.D2D else bs_height_m
    pl = pathloss_uma(rat.carrier_ghz, distance_m, tx_height, ue_height_m)
    return rat.tx_power_dbm - pl - shadow_db


def noise_floor_dbm(rat: Rat) -> float:
    return -174.0 + 10.0 * np.log10(rat.bandwidth_hz) + rat.noise_figure_db


def snr(rsrp_dbm: float, rat: Rat) -> float:
    return rsrp_dbm - noise_floor_dbm(rat)


def effective_snr(
    snr_db: float,
    speed_mps: float,
    mod: Modulation,
    rat: Rat,
    *,
    speed_penalty_db_per_mps: float = DEFAULT_SPEED_PENALTY_DB_PER_MPS,
    mod_penalties_db=None,
) -> float:
    if speed_mps < 0:
        raise ValueError("speed_mps must be >= 0")
    penalties = DEFAULT_MOD_PENALTIES_DB if mod_penalties_db is None else mod_penalties_db
    return (
        snr_db
        - speed_penalty_db_per_mps * speed_mps
        - penalties[mod]
        + rat.diversity_bonus_db
    )


def _allowed_mods(rat: Rat):
    cap = rat.max_modulation.bits_per_symbol
    return [m for m in MODULATIONS if m.bits_per_symbol <= cap]


def select_mcs(effective_snr_db: float, rat: Rat, table: CalibrationTable):
    """Highest modulation under the RAT cap with BLER <= target at this SNR.

    Falls back to QPSK (whatever its BLER) when nothing qualifies.
    """
    for mod in reversed(_allowed_mods(rat)):
        bler = table.bler(mod, effective_snr_db)
        if bler <= DEFAULT_BLER_TARGET:
            return mod, bler
    return Modulation.QPSK, table.bler(Modulation.QPSK, effective_snr_db)


def link_adaptation(
    snr_db: float,
    speed_mps: float,
    rat: Rat,
    table: CalibrationTable,
    *,
    bler_target: float = DEFAULT_BLER_TARGET,
    speed_penalty_db_per_mps: float = DEFAULT_SPEED_PENALTY_DB_PER_MPS,
    mod_penalties_db=None,
):
    """Pick the MCS evaluating each modulation at its own effective SNR.

    Returns (mod, bler, effective_snr_db) for the chosen modulation.
    """
    choice = None
    for mod in reversed(_allowed_mods(rat)):
        eff = effective_snr(
            snr_db,
            speed_mps,
            mod,
            rat,
            speed_penalty_db_per_mps=speed_penalty_db_per_mps,
            mod_penalties_db=mod_penalties_db,
        )
        bler = table.bler(mod, eff)
        if bler <= bler_target:
            return mod, bler, eff
        if mod is Modulation.QPSK:
            choice = (mod, bler, eff)
    assert choice is not None
    return choice


def throughput(
    mod: Modulation,
    bler: float,
    rat: Rat,
    *,
    code_rate: float = DEFAULT_CODE_RATE,
    overhead: float = DEFAULT_OVERHEAD,
) -> float:
    """Goodput in bps: bandwidth x spectral efficiency x (1 - BLER)."""
    if not 0.0 <= bler <= 1.0:
        raise ValueError("bler must be in [0, 1]")
    eff = mod.bits_per_symbol * code_rate * (1.0 - overhead)
    return rat.bandwidth_hz * eff * (1.0 - bler)


def packet_latency(
    packet_bits: int,
    tput_bps: float,
    bler: float,
    rat: Rat,
    load_factor: float,
    speed_mps: float,
    distance_m: float,
    mod: Modulation = Modulation.QPSK,
    *,
    sched_ttis: float = DEFAULT_SCHED_TTIS,
    decode_ttis: float = DEFAULT_DECODE_TTIS,
    harq_rtt_ttis: float = DEFAULT_HARQ_RTT_TTIS,
    queue_base_ms: float = DEFAULT_QUEUE_BASE_MS,
) -> float:
    """One-hop packet latency in ms (six additive terms)."""
    if tput_bps <= 0:
        raise ValueError("tput_bps must be positive")
    if not 0.0 <= bler < 1.0:
        raise ValueError("bler must be in [0, 1)")
    tti = rat.tti_ms
    t_tx = packet_bits / tput_bps * 1e3
    t_sched = sched_ttis * tti
    t_dec = decode_ttis * tti * (1.0 + mod.order_index)
    t_harq = bler / (1.0 - bler) * harq_rtt_ttis * tti
    t_queue = queue_base_ms * load_factor * (1.0 + speed_mps / 10.0)
    t_prop = distance_m / SPEED_OF_LIGHT * 1e3
    return t_tx + t_sched + t_dec + t_harq + t_queue + t_prop


def packet_outcome(
    packet_bits: int,
    mod: Modulation,
    bler: float,
    ber: float,
    rat: Rat,
    load_factor: float,
    speed_mps: float,
    distance_m: float,
    *,
    code_rate: float = DEFAULT_CODE_RATE,
    overhead: float = DEFAULT_OVERHEAD,
    latency_cap_ms: float = DEFAULT_LATENCY_CAP_MS,
    **latency_kwargs,
) -> PacketOutcome:
    """Throughput/latency bundle for one hop, with the undeliverable cap."""
    tput = throughput(mod, bler, rat, code_rate=code_rate, overhead=overhead)
    if bler >= 1.0 or tput <= 0.0:
        return PacketOutcome(tput, bler, ber, latency_cap_ms, False)
    lat = packet_latency(
        packet_bits, tput, bler, rat, load_factor, speed_mps, distance_m, mod,
        **latency_kwargs,
    )
    return PacketOutcome(tput, bler, ber, min(lat, latency_cap_ms), lat <= latency_cap_ms)


def combine_relayed(first: PacketOutcome, second: PacketOutcome, latency_cap_ms: float = DEFAULT_LATENCY_CAP_MS) -> PacketOutcome:
    """End-to-end outcome of a two-hop (relayed) transfer."""
    lat = first.latency_ms + second.latency_ms
    delivered = first.delivered and second.delivered and lat <= latency_cap_ms
    return PacketOutcome(
        min(first.throughput_bps, second.throughput_bps),
        e2e_error_rate(first.bler, second.bler),
        e2e_error_rate(first.ber, second.ber),
        min(lat, latency_cap_ms),
        delivered,
    )


def e2e_error_rate(a: float, b: float) -> float:
    """Error rate of two independent hops in series."""
    return 1.0 - (1.0 - a) * (1.0 - b)


def jitter(latencies, window: int = DEFAULT_JITTER_WINDOW) -> float:
    """Sample std dev (n-1) of the last `window` latencies; 0 below 2 samples."""
    tail = np.asarray(latencies, dtype=float)[-window:]
    if tail.size < 2:
        return 0.0
    return float(np.std(tail, ddof=1))

"""Propagation, link budget, adaptation, latency and jitter."""

import numpy as np
import pytest

from d2dsim.ldpc import Modulation
from d2dsim.ldpc.curves import BlerCurve, CalibrationTable
from d2dsim.radio import (
    LinkBudget,
    Rat,
    RatId,
    combine_relayed,
    default_rats,
    e2e_error_rate,
    effective_snr,
    jitter,
    link_adaptation,
    noise_floor_dbm,
    packet_latency,
    packet_outcome,
    pathloss_uma,
    rsrp,
    select_mcs,
    snr,
    throughput,
)

RATS = default_rats()
NR = RATS[RatId.NR]
LTE = RATS[RatId.LTE]
D2D = RATS[RatId.D2D]


def synthetic_table():
    grid = np.array([0.0, 10.0, 20.0, 30.0])
    blers = {
        Modulation.QPSK: [0.5, 0.05, 0.001, 0.0],
        Modulation.QAM16: [0.9, 0.2, 0.05, 0.001],
        Modulation.QAM64: [1.0, 0.5, 0.2, 0.01],
        Modulation.QAM256: [1.0, 0.9, 0.5, 0.05],
    }
    curves = {
        mod: BlerCurve(mod, grid, np.array(v), np.array(v) / 10.0, np.full(4, 100))
        for mod, v in blers.items()
    }
    meta = {"n": 512, "k": 256, "rate": 0.5, "code_seed": 7, "channel_seed": 1, "max_iters": 50}
    return CalibrationTable(meta, curves)


def test_rat_defaults():
    assert NR.carrier_ghz == 5.5 and NR.tx_power_dbm == 35 and NR.noise_figure_db == 6
    assert LTE.carrier_ghz == 2.1 and LTE.noise_figure_db == 7
    assert D2D.tx_power_dbm == 15 and D2D.noise_figure_db == 5
    assert NR.max_modulation is Modulation.QAM256
    assert LTE.max_modulation is Modulation.QAM64 and D2D.max_modulation is Modulation.QAM64
    assert NR.tti_ms == pytest.approx(0.5)
    assert LTE.tti_ms == pytest.approx(1.0) and D2D.tti_ms == pytest.approx(1.0)


def test_nlos_pathloss_at_100m():
    assert pathloss_uma(5.5, 100.0) == pytest.approx(106.5073, abs=1e-3)


def test_nlos_pathloss_at_1km():
    assert pathloss_uma(5.5, 1000.0) == pytest.approx(145.5873, abs=1e-3)


def test_pathloss_doubling_increases():
    for d in [10, 50, 100, 400, 2000]:
        assert pathloss_uma(3.5, 2 * d) > pathloss_uma(3.5, d)


def test_los_branch_and_breakpoint():
    # below the breakpoint: slope 22 dB/decade
    assert pathloss_uma(5.5, 100.0, los=True) == pytest.approx(
        28.0 + 44.0 + 20.0 * np.log10(5.5), abs=1e-6
    )
    # above it (d_bp = 880 m at 25/1.5 m heights): slope 40 with height correction
    d_bp = 4.0 * 24.0 * 0.5 * 5.5e9 / 3e8
    assert d_bp == pytest.approx(880.0)
    want = 28.0 + 40.0 * np.log10(2000.0) + 20.0 * np.log10(5.5) - 9.0 * np.log10(
        d_bp**2 + 23.5**2
    )
    assert pathloss_uma(5.5, 2000.0, los=True) == pytest.approx(want, abs=1e-6)


def test_nlos_never_below_los():
    for d in [1, 5, 30, 200, 900, 5000]:
        assert pathloss_uma(2.1, d) >= pathloss_uma(2.1, d, los=True) - 1e-9


def test_pathloss_rejects_nonpositive_distance():
    with pytest.raises(ValueError):
        pathloss_uma(5.5, 0.0)


def test_rsrp_oracle():
    assert rsrp(NR, 100.0) == pytest.approx(35.0 - 106.5073, abs=1e-3)


def test_shadow_is_additive():
    base = rsrp(NR, 250.0, 0.0)
    assert rsrp(NR, 250.0, 6.0) == pytest.approx(base - 6.0)


def test_d2d_uses_ue_heights_both_ends():
    got = rsrp(D2D, 80.0)
    want = D2D.tx_power_dbm - pathloss_uma(2.4, 80.0, 1.5, 1.5)
    assert got == pytest.approx(want)
    assert np.isfinite(got)


def test_noise_floor_and_snr():
    assert noise_floor_dbm(NR) == pytest.approx(-174.0 + 73.0103 + 6.0, abs=1e-3)
    assert snr(-71.5073, NR) == pytest.approx(23.4824, abs=1e-3)
    # one extra dB of noise figure costs exactly one dB
    assert snr(-71.5073, NR) - snr(-71.5073, LTE) == pytest.approx(1.0)
    assert snr(noise_floor_dbm(NR), NR) == pytest.approx(0.0)


def test_effective_snr_penalties():
    assert effective_snr(20.0, 0.0, Modulation.QPSK, NR) == pytest.approx(20.0)
    assert effective_snr(20.0, 10.0, Modulation.QPSK, NR) == pytest.approx(18.0)
    assert effective_snr(20.0, 0.0, Modulation.QAM256, NR) == pytest.approx(18.5)
    for lo, hi in [(0.0, 4.0), (4.0, 10.0)]:
        assert effective_snr(20.0, hi, Modulation.QAM16, NR) <= effective_snr(
            20.0, lo, Modulation.QAM16, NR
        )
    with pytest.raises(ValueError):
        effective_snr(20.0, -1.0, Modulation.QPSK, NR)


def test_select_mcs_cap_and_fallback():
    table = synthetic_table()
    assert select_mcs(35.0, NR, table)[0] is Modulation.QAM256
    assert select_mcs(35.0, LTE, table)[0] is Modulation.QAM64
    assert select_mcs(35.0, D2D, table)[0] is Modulation.QAM64
    mod, bler = select_mcs(10.0, NR, table)
    assert mod is Modulation.QPSK and bler == pytest.approx(0.05)
    mod, bler = select_mcs(0.0, NR, table)
    assert mod is Modulation.QPSK and bler == pytest.approx(0.5)  # above target


def test_link_adaptation_order_never_grows_with_speed():
    table = synthetic_table()
    for s in np.linspace(-5, 40, 19):
        prev = None
        for speed in [0.0, 5.0, 10.0, 20.0]:
            mod, bler, eff = link_adaptation(float(s), speed, NR, table)
            assert 0.0 <= bler <= 1.0
            if prev is not None:
                assert mod.order_index <= prev
            prev = mod.order_index


def test_link_adaptation_matches_select_mcs_without_penalties():
    table = synthetic_table()
    zero = {m: 0.0 for m in Modulation}
    for s in [0.0, 10.0, 20.0, 30.0]:
        mod, bler, eff = link_adaptation(s, 0.0, NR, table, mod_penalties_db=zero)
        assert (mod, bler) == select_mcs(s, NR, table)
        assert eff == pytest.approx(s)


def test_throughput_values():
    assert throughput(Modulation.QPSK, 0.0, LTE) == pytest.approx(17.2e6)
    assert throughput(Modulation.QPSK, 1.0, LTE) == 0.0
    assert throughput(Modulation.QAM256, 0.3, NR) == pytest.approx(
        4.0 * throughput(Modulation.QPSK, 0.3, NR)
    )
    with pytest.raises(ValueError):
        throughput(Modulation.QPSK, 1.5, LTE)


def test_packet_latency_example():
    lat = packet_latency(12000, 17.2e6, 0.0, LTE, 0.0, 0.0, 0.0, Modulation.QPSK)
    assert lat == pytest.approx(1.3977, abs=1e-3)


def test_packet_latency_harq_term():
    base = packet_latency(12000, 17.2e6, 0.0, LTE, 0.0, 0.0, 0.0)
    half = packet_latency(12000, 17.2e6, 0.5, LTE, 0.0, 0.0, 0.0)
    assert half - base == pytest.approx(8.0 * LTE.tti_ms)


def test_packet_latency_monotone_in_load_and_bler():
    args = (12000, 17.2e6)
    lat = [packet_latency(*args, 0.0, LTE, lf, 3.0, 50.0) for lf in [0.0, 0.5, 1.0]]
    assert lat[0] < lat[1] < lat[2]
    lat = [packet_latency(*args, b, LTE, 0.2, 3.0, 50.0) for b in [0.0, 0.2, 0.6]]
    assert lat[0] < lat[1] < lat[2]


def test_packet_latency_rejects_degenerate_links():
    with pytest.raises(ValueError):
        packet_latency(12000, 0.0, 0.0, LTE, 0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        packet_latency(12000, 1e6, 1.0, LTE, 0.0, 0.0, 0.0)


def test_packet_outcome_caps_undeliverable():
    out = packet_outcome(12000, Modulation.QPSK, 1.0, 0.4, LTE, 0.0, 0.0, 100.0)
    assert not out.delivered
    assert out.latency_ms == 100.0
    assert out.throughput_bps == 0.0
    ok = packet_outcome(12000, Modulation.QPSK, 0.0, 0.0, LTE, 0.0, 0.0, 100.0)
    assert ok.delivered and ok.latency_ms < 2.0


def test_combine_relayed():
    a = packet_outcome(12000, Modulation.QPSK, 0.1, 0.01, D2D, 0.0, 0.0, 40.0)
    b = packet_outcome(12000, Modulation.QAM16, 0.2, 0.02, NR, 0.3, 0.0, 200.0)
    both = combine_relayed(a, b)
    assert both.throughput_bps == min(a.throughput_bps, b.throughput_bps)
    assert both.latency_ms == pytest.approx(a.latency_ms + b.latency_ms)
    assert both.bler == pytest.approx(1.0 - 0.9 * 0.8)
    assert both.ber == pytest.approx(1.0 - 0.99 * 0.98)
    assert both.delivered


def test_combine_relayed_respects_cap():
    bad = packet_outcome(12000, Modulation.QPSK, 0.99, 0.3, D2D, 5.0, 10.0, 80.0)
    good = packet_outcome(12000, Modulation.QPSK, 0.0, 0.0, NR, 0.0, 0.0, 10.0)
    both = combine_relayed(bad, good)
    assert both.latency_ms <= 100.0
    assert not both.delivered


def test_e2e_error_rate_bounds():
    assert e2e_error_rate(0.0, 0.0) == 0.0
    assert e2e_error_rate(1.0, 0.3) == pytest.approx(1.0)
    assert 0.0 <= e2e_error_rate(0.37, 0.11) <= 1.0


def test_jitter_values():
    assert jitter([5.0, 5.0, 5.0, 5.0]) == 0.0
    assert jitter([10.0, 20.0]) == pytest.approx(7.0711, abs=1e-3)
    assert jitter([3.0]) == 0.0
    assert jitter([]) == 0.0
    window = list(np.linspace(1, 30, 25))
    assert jitter(window) == pytest.approx(np.std(window[-20:], ddof=1))
    base = [2.0, 4.0, 9.0]
    assert jitter([3 * x for x in base]) == pytest.approx(3 * jitter(base))


def test_link_budget_fields():
    lb = LinkBudget(NR, 100.0, 2.0, -73.5, 21.5, 20.0)
    assert lb.rat is NR and lb.snr_db == 21.5

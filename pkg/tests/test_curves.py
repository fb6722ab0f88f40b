"""Calibration campaigns, isotonic fit, and table file round-trips."""

import numpy as np
import pytest

from d2dsim.ldpc import CalibrationTable, Modulation, calibrate, pav_nonincreasing, snr_grid


@pytest.fixture(scope="module")
def small_table():
    return calibrate(
        n=128,
        rate=0.5,
        code_seed=3,
        snr_min_db=0.0,
        snr_max_db=8.0,
        snr_step_db=4.0,
        trials=40,
        seed=500,
        modulations=(Modulation.QPSK, Modulation.QAM16),
    )


def test_pav_pools_violators():
    got = pav_nonincreasing([1.0, 0.8, 0.9, 0.2])
    assert np.allclose(got, [1.0, 0.85, 0.85, 0.2])


def test_pav_keeps_monotone_input():
    y = [0.9, 0.5, 0.5, 0.1, 0.0]
    assert np.allclose(pav_nonincreasing(y), y)


def test_pav_weights():
    got = pav_nonincreasing([0.0, 1.0], weights=[3.0, 1.0])
    assert np.allclose(got, [0.25, 0.25])


def test_snr_grid_includes_endpoint():
    assert np.allclose(snr_grid(-2, 26, 2), np.arange(-2, 27, 2))
    with pytest.raises(ValueError):
        snr_grid(0, 10, 0)


def test_bler_nonincreasing_and_bounded(small_table):
    for cu in small_table.curves.values():
        assert (np.diff(cu.bler) <= 1e-12).all()
        assert (cu.bler >= 0).all() and (cu.bler <= 1).all()
        assert (cu.ber <= cu.bler + 1e-12).all()


def test_calibration_reproducible(small_table):
    again = calibrate(
        n=128,
        rate=0.5,
        code_seed=3,
        snr_min_db=0.0,
        snr_max_db=8.0,
        snr_step_db=4.0,
        trials=40,
        seed=500,
        modulations=(Modulation.QPSK, Modulation.QAM16),
    )
    for mod, cu in small_table.curves.items():
        assert np.array_equal(cu.bler, again.curves[mod].bler)
        assert np.array_equal(cu.ber, again.curves[mod].ber)


def test_points_seeded_per_modulation(small_table):
    # calibrating one modulation alone reproduces its curve from the pair
    solo = calibrate(
        n=128,
        rate=0.5,
        code_seed=3,
        snr_min_db=0.0,
        snr_max_db=8.0,
        snr_step_db=4.0,
        trials=40,
        seed=500,
        modulations=(Modulation.QAM16,),
    )
    assert np.array_equal(
        solo.curves[Modulation.QAM16].ber, small_table.curves[Modulation.QAM16].ber
    )


def test_lookup_clamps_at_grid_edges(small_table):
    cu = small_table.curve(Modulation.QPSK)
    assert cu.bler_at(-50.0) == cu.bler[0]
    assert cu.bler_at(50.0) == cu.bler[-1]
    mid = cu.bler_at(2.0)
    lo, hi = sorted((cu.bler[0], cu.bler[1]))
    assert lo <= mid <= hi


def test_file_roundtrip(tmp_path, small_table):
    path = tmp_path / "cal.txt"
    small_table.save(path, extra_comments=("config 0123456789ab",))
    loaded = CalibrationTable.load(path)
    assert loaded.meta == small_table.meta
    for mod, cu in small_table.curves.items():
        got = loaded.curves[mod]
        assert np.array_equal(got.snr_db, cu.snr_db)
        assert np.allclose(got.bler, cu.bler, atol=1e-8)
        assert np.allclose(got.ber, cu.ber, atol=1e-8)
    # a second save of the loaded table is byte identical
    path2 = tmp_path / "cal2.txt"
    loaded.save(path2, extra_comments=("config 0123456789ab",))
    assert path.read_bytes() == path2.read_bytes()


def test_mismatch_reporting(small_table):
    assert small_table.mismatches({"n": 128, "code_seed": 3, "rate": 0.5}) == []
    diffs = small_table.mismatches({"n": 512, "max_iters": 10})
    assert len(diffs) == 2
    assert any("512" in d for d in diffs)


def test_load_rejects_bad_files(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("qpsk 0.0 1.0 0.5 10\n")
    with pytest.raises(ValueError, match="metadata"):
        CalibrationTable.load(p)
    p2 = tmp_path / "bad2.txt"
    p2.write_text(
        "# n 8\n# k 4\n# rate 0.5\n# code_seed 1\n# channel_seed 2\n# max_iters 5\n"
        "qpsk 0.0 1.0\n"
    )
    with pytest.raises(ValueError, match="row"):
        CalibrationTable.load(p2)


def test_missing_curve_error(small_table):
    with pytest.raises(ValueError, match="qam256"):
        small_table.curve(Modulation.QAM256)

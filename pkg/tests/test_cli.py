"""CLI contract: subcommands, refusals, file formats, determinism."""

import shutil

import pytest

from d2dsim import cli
from tests.conftest import DEFAULT_CAL

TINY_CAL = ["--set", "ldpc.n=128", "--set", "cal.trials=25",
            "--set", "cal.snr_max_db=4"]
SMALL_SWEEP = ["--set", "engine.runs=3", "--set", "engine.steps=20",
               "--set", "engine.n_ue=10", "--set", "sweep.speeds=4,10",
               "--selectors", "proposed,sdn_joint"]


def put_default_calibration(out_dir, default_table):
    out_dir.mkdir(exist_ok=True)
    shutil.copy(DEFAULT_CAL, out_dir / "calibration.txt")


def test_rank_urllc_puts_d2d_first(capsys):
    assert cli.main(["rank", "urllc"]) == 0
    out = capsys.readouterr().out
    assert "1. d2d" in out
    assert "lambda_max" in out and "CR" in out


def test_rank_mmtc_ordering(capsys):
    assert cli.main(["rank", "mmtc"]) == 0
    lines = [ln.strip() for ln in capsys.readouterr().out.splitlines()]
    order = [ln for ln in lines if ln[:2] in ("1.", "2.", "3.")]
    assert [ln.split()[1] for ln in order] == ["d2d", "lte", "nr"]


def test_rank_embb_recomputed_prints_discrepancy_note(capsys):
    assert cli.main(["rank", "embb", "--level1", "recomputed"]) == 0
    out = capsys.readouterr().out
    assert "disagree" in out
    assert "LTE ranks last under both" in out
    assert "level-1 consistency per criterion" in out


def test_config_error_names_key_and_exits_2(capsys):
    assert cli.main(["rank", "urllc", "--set", "engine.runs=0"]) == 2
    assert "engine.runs" in capsys.readouterr().err


def test_calibrate_idempotent_and_complete(tmp_path, capsys):
    args = ["calibrate", "--out", str(tmp_path)] + TINY_CAL
    assert cli.main(args) == 0
    first = (tmp_path / "calibration.txt").read_bytes()
    data = [ln for ln in first.decode().splitlines() if not ln.startswith("#")]
    assert len(data) == 4 * 4  # modulations x SNR grid points
    assert b"# config " in first
    assert cli.main(args) == 0
    assert (tmp_path / "calibration.txt").read_bytes() == first
    assert (tmp_path / "effective.conf").exists()


def test_sweep_refuses_without_calibration(tmp_path, capsys):
    assert cli.main(["sweep", "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "d2dsim calibrate" in err


def test_sweep_refuses_mismatched_calibration(tmp_path, capsys):
    assert cli.main(["calibrate", "--out", str(tmp_path)] + TINY_CAL) == 0
    assert cli.main(["sweep", "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "mismatch" in err and "d2dsim calibrate" in err


def test_sweep_outputs_and_determinism(tmp_path, default_table, capsys):
    put_default_calibration(tmp_path, default_table)
    args = ["sweep", "--out", str(tmp_path)] + SMALL_SWEEP
    assert cli.main(args) == 0
    csv = (tmp_path / "results.csv").read_text().splitlines()
    assert csv[0] == "# d2dsim sweep results v1"
    assert csv[1].startswith("# config ")
    assert csv[2] == cli.CSV_SCHEMA
    rows = csv[3:]
    assert len(rows) == 2 * 2 * 5  # selectors x speeds x KPIs
    assert all(len(r.split(",")) == 8 for r in rows)
    first = (tmp_path / "results.csv").read_bytes()
    assert cli.main(args) == 0
    assert (tmp_path / "results.csv").read_bytes() == first
    for kpi in ("throughput_bps", "ber", "latency_ms", "jitter_ms",
                "handovers"):
        plot = (tmp_path / f"plot_{kpi}.dat").read_text().splitlines()
        assert plot[0] == "# d2dsim plot data v1"
        assert plot[3].startswith("# speed proposed_mean proposed_ci")
        assert len(plot) == 4 + 2  # comments plus one row per speed


def test_sweep_csv_matches_log_replay(tmp_path, default_table, capsys):
    import numpy as np

    put_default_calibration(tmp_path, default_table)
    args = (["sweep", "--out", str(tmp_path)] + SMALL_SWEEP
            + ["--set", "engine.log_file=steps.log"])
    assert cli.main(args) == 0
    sections = {}
    current = None
    for line in (tmp_path / "steps.log").read_text().splitlines()[1:]:
        if line.startswith("# run "):
            current = line[6:]
            sections[current] = []
        else:
            f = line.split(",")
            sections[current].append((int(f[0]), float(f[7]), float(f[8])))
    per_point = {}
    for name, rows in sections.items():
        sel, var, _ = name.split()
        arr = np.array(rows)
        steps = np.unique(arr[:, 0])
        tput = np.mean([arr[arr[:, 0] == s, 1].mean() for s in steps])
        lat = np.mean([arr[arr[:, 0] == s, 2].mean() for s in steps])
        per_point.setdefault((sel.split("=")[1], var), []).append((tput, lat))
    for line in (tmp_path / "results.csv").read_text().splitlines()[3:]:
        sel, _, var, val, kpi, mean = line.split(",")[:6]
        if kpi not in ("throughput_bps", "latency_ms"):
            continue
        runs = per_point[(sel, f"speed={float(val)}")]
        idx = 0 if kpi == "throughput_bps" else 1
        replayed = float(np.mean([r[idx] for r in runs]))
        assert replayed == pytest.approx(float(mean), rel=1e-5)


def test_logged_sweeps_in_different_dirs_stamp_same_hash(tmp_path, default_table, capsys):
    # the out dir must not leak into the config hash via log path resolution
    small = ["--set", "engine.runs=2", "--set", "engine.steps=10",
             "--set", "engine.n_ue=5", "--set", "sweep.speeds=4,10",
             "--selectors", "proposed", "--set", "engine.log_file=sweep.log"]
    outs = []
    for name in ("a", "b"):
        d = tmp_path / name
        put_default_calibration(d, default_table)
        assert cli.main(["sweep", "--out", str(d)] + small) == 0
        outs.append(d)
    a, b = outs
    assert (a / "results.csv").read_bytes() == (b / "results.csv").read_bytes()
    assert (a / "sweep.log").read_bytes() == (b / "sweep.log").read_bytes()
    assert "engine.log_file=sweep.log" in (a / "effective.conf").read_text()


def test_sweep_failure_leaves_marker(tmp_path, default_table, capsys):
    put_default_calibration(tmp_path, default_table)
    args = ["sweep", "--out", str(tmp_path), "--set", "engine.runs=1",
            "--set", "engine.steps=5", "--set", "engine.n_ue=4",
            "--set", "sweep.speeds=4", "--selectors", "proposed"]
    assert cli.main(args) == 1
    marker = tmp_path / "FAILED"
    assert marker.exists()
    assert "config " in marker.read_text()
    assert not (tmp_path / "results.csv").exists()


def test_flag_overrides_file_in_echo(tmp_path, capsys):
    conf = tmp_path / "my.conf"
    conf.write_text("engine.steps = 12\n")
    assert cli.main(["rank", "urllc", "--config", str(conf),
                     "--out", str(tmp_path), "--set", "engine.steps=34"]) == 0
    echoed = (tmp_path / "effective.conf").read_text()
    assert "engine.steps=34" in echoed
    assert echoed.startswith("# d2dsim effective config v1")

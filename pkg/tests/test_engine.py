"""System engine: placement, mobility, runs, aggregation, log replay."""

import io

import numpy as np
import pytest

from d2dsim import engine
from d2dsim.config import build_config
from d2dsim.engine import (
    KPI_NAMES,
    LOG_HEADER,
    SimRun,
    UEState,
    aggregate,
    place,
    step_mobility,
    stream_rng,
)
from d2dsim.selection import Selector

AREA = (1000.0, 1000.0)


def small_cfg(**overrides):
    kv = {"engine.steps": "20", "engine.runs": "3", "engine.n_ue": "10",
          "selectors": "proposed,sdn_joint", "sweep.speeds": "4,10"}
    kv.update({k: str(v) for k, v in overrides.items()})
    return build_config(environ={}, overrides=list(kv.items()))


def test_place_deterministic_and_in_bounds():
    a = place(40, 1, 2, AREA, stream_rng(5, 0, 0))
    b = place(40, 1, 2, AREA, stream_rng(5, 0, 0))
    assert np.array_equal(a.ue_pos, b.ue_pos)
    assert np.array_equal(a.enb_pos, b.enb_pos)
    assert np.array_equal(a.gnb_pos, b.gnb_pos)
    assert a.d2d_pairs == b.d2d_pairs
    for pos in (a.ue_pos, a.enb_pos, a.gnb_pos):
        assert pos.min() >= 0.0 and pos.max() <= 1000.0
    assert a.enb_pos.shape == (1, 2) and a.gnb_pos.shape == (2, 2)


def test_place_uniform_mean_centered():
    topo = place(10_000, 1, 1, AREA, stream_rng(11, 0, 0))
    assert np.allclose(topo.ue_pos.mean(axis=0), [500.0, 500.0], atol=10.0)


def test_place_pairing_is_perfect_matching():
    topo = place(41, 1, 1, AREA, stream_rng(3, 0, 0))
    seen = [u for pair in topo.d2d_pairs for u in pair]
    assert len(seen) == len(set(seen)) == 40
    assert all(i != j for i, j in topo.d2d_pairs)
    even = place(40, 1, 1, AREA, stream_rng(3, 0, 0))
    assert len(even.d2d_pairs) == 20


def test_place_rejects_degenerate_inputs():
    rng = stream_rng(0, 0, 0)
    with pytest.raises(ValueError):
        place(40, 0, 1, AREA, rng)
    with pytest.raises(ValueError):
        place(40, 1, 1, (0.0, 1000.0), rng)
    with pytest.raises(ValueError):
        place(1, 1, 1, AREA, rng)


def test_mobility_zero_speed_is_static():
    ue = UEState(position=(10.0, 20.0), speed_mps=0.0, waypoint=(900.0, 900.0))
    assert step_mobility(ue, 1.0, AREA, stream_rng(0, 0, 2, 0)) is ue


def test_mobility_displacement_bounded_by_travel():
    rng = stream_rng(21, 0, 2, 0)
    ue = UEState(position=(500.0, 500.0), speed_mps=7.0,
                 waypoint=tuple(rng.uniform(0, 1000, 2)))
    for _ in range(200):
        nxt = step_mobility(ue, 1.0, AREA, rng)
        d = np.hypot(nxt.position[0] - ue.position[0],
                     nxt.position[1] - ue.position[1])
        assert d <= 7.0 + 1e-9
        assert 0.0 <= nxt.position[0] <= 1000.0
        assert 0.0 <= nxt.position[1] <= 1000.0
        ue = nxt


def test_mobility_covers_the_area():
    rng = stream_rng(8, 0, 2, 0)
    ue = UEState(position=(500.0, 500.0), speed_mps=30.0,
                 waypoint=tuple(rng.uniform(0, 1000, 2)))
    quadrants = np.zeros(4)
    for _ in range(10_000):
        ue = step_mobility(ue, 1.0, AREA, rng)
        q = (ue.position[0] >= 500.0) * 2 + (ue.position[1] >= 500.0)
        quadrants[int(q)] += 1
    shares = quadrants / quadrants.sum()
    assert shares.min() > 0.10 and shares.max() < 0.40


def test_mobility_rejects_nonpositive_dt():
    ue = UEState(position=(0.0, 0.0), speed_mps=1.0, waypoint=(1.0, 1.0))
    with pytest.raises(ValueError):
        step_mobility(ue, 0.0, AREA, stream_rng(0, 0, 2, 0))


def test_aggregate_known_pair():
    mean, ci = aggregate([8.0, 12.0])
    assert mean == pytest.approx(10.0)
    assert ci == pytest.approx(3.92, abs=0.01)


def test_aggregate_needs_two_runs():
    with pytest.raises(ValueError, match="at least 2"):
        aggregate([5.0])


def test_run_deterministic_per_seed(default_table):
    cfg = small_cfg()
    a = engine.run(cfg, default_table, Selector.PROPOSED, run_idx=0)
    b = engine.run(cfg, default_table, Selector.PROPOSED, run_idx=0)
    assert a == b
    c = engine.run(cfg, default_table, Selector.PROPOSED, run_idx=1)
    assert a != c
    d = engine.run(cfg.replace(seed=2), default_table, Selector.PROPOSED,
                   run_idx=0)
    assert a != d


def test_static_population_never_hands_over(default_table):
    cfg = small_cfg()
    s = engine.run(cfg, default_table, Selector.PROPOSED, run_idx=0,
                   speed_mps=0.0)
    assert s.handovers == 0.0


def test_load_tracks_attachment_counts(default_table):
    cfg = small_cfg()
    sim = SimRun(cfg, default_table, Selector.PROPOSED, run_idx=0)
    assert sim.load.sum() == 0.0
    sim.step()
    attached = sim.load.sum() * cfg["engine.node_capacity"]
    assert attached == pytest.approx(cfg["engine.n_ue"])


def test_log_replay_matches_summary(default_table):
    cfg = small_cfg()
    sink = io.StringIO()
    summary = engine.run(cfg, default_table, Selector.PROPOSED, run_idx=0,
                         log_sink=sink)
    rows = np.array([
        [float(x) for x in (f[0], f[7], f[8])]
        for f in (line.split(",") for line in sink.getvalue().splitlines())
    ])
    steps = np.unique(rows[:, 0])
    assert steps.size == cfg["engine.steps"]
    tput = np.mean([rows[rows[:, 0] == s, 1].mean() for s in steps])
    lat = np.mean([rows[rows[:, 0] == s, 2].mean() for s in steps])
    assert tput == pytest.approx(summary.throughput_bps, rel=1e-6)
    assert lat == pytest.approx(summary.latency_ms, rel=1e-5)


def test_rsrp_static_while_parked(default_table):
    cfg = small_cfg()
    sink = io.StringIO()
    engine.run(cfg, default_table, Selector.RSRP_MAX, run_idx=0,
               speed_mps=0.0, log_sink=sink)
    per_ue = {}
    for line in sink.getvalue().splitlines():
        f = line.split(",")
        per_ue.setdefault(f[1], set()).add(f[3])
    assert all(len(v) == 1 for v in per_ue.values())


def test_sweep_order_and_shape(default_table):
    cfg = small_cfg()
    results = engine.sweep(cfg, default_table)
    key = [(r.selector, r.sweep_value) for r in results]
    assert key == [(Selector.PROPOSED, 4.0), (Selector.PROPOSED, 10.0),
                   (Selector.SDN_JOINT, 4.0), (Selector.SDN_JOINT, 10.0)]
    for r in results:
        assert r.slice_name == "embb"
        assert set(r.kpis) == set(KPI_NAMES)
        assert all(n == 3 for _, _, n in r.kpis.values())


def test_sweep_log_file_sections(tmp_path, default_table):
    path = tmp_path / "steps.log"
    cfg = small_cfg(**{"engine.log_file": str(path)})
    engine.sweep(cfg, default_table)
    lines = path.read_text().splitlines()
    assert lines[0] == LOG_HEADER
    markers = [ln for ln in lines if ln.startswith("# run ")]
    assert len(markers) == 4 * 3
    data = [ln for ln in lines[1:] if not ln.startswith("#")]
    assert len(data) == 4 * 3 * 20 * 10


def test_sweep_parallel_matches_serial(default_table):
    cfg = small_cfg()
    serial = engine.sweep(cfg, default_table)
    parallel = engine.sweep(cfg.replace(engine__workers=2), default_table)
    for a, b in zip(serial, parallel):
        assert a.kpis == b.kpis


def test_common_random_numbers_across_selectors(default_table):
    cfg = small_cfg()
    a = SimRun(cfg, default_table, Selector.PROPOSED, run_idx=0)
    b = SimRun(cfg, default_table, Selector.RSRP_MAX, run_idx=0)
    assert np.array_equal(a.topology.ue_pos, b.topology.ue_pos)
    assert np.array_equal(a.shadow_node, b.shadow_node)

"""Time-stepped system simulation.

A run places nodes and UEs, moves UEs by random waypoint, and at each
step enumerates candidate modes per UE, applies the configured selector,
and records PHY outcomes.  KPIs average per-UE first and across steps
second; handovers are a plain total.  Multi-run aggregation reports the
mean with a 1.96 s/sqrt(n) confidence half-width.

Seed hierarchy: master seed -> per-run spawn key -> independent streams
for placement, shadowing, per-UE mobility, and per-UE channel noise, so
a change to one stream's consumers does not perturb the others.
"""

from __future__ import annotations

import io
import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import radio
from .ahp import SliceName, slice_ranking
from .config import (
    Config,
    mod_penalties_from_config,
    rats_from_config,
    selectors_from_config,
    slice_from_config,
    sweep_speeds,
    sweep_users,
    tables_from_config,
)
from .ldpc.code import encode, make_code
from .ldpc.curves import CalibrationTable
from .ldpc.decoder import decode_batch
from .ldpc.modem import Modulation, transmit_awgn
from .radio import RatId
from .selection import (
    Mode,
    SelectionState,
    Selector,
    enumerate_candidates,
    jmsra_select,
    proposed_select,
    rsrp_select,
    sdn_select,
)

KPI_NAMES = ("throughput_bps", "ber", "latency_ms", "jitter_ms", "handovers")

STREAM_PLACEMENT, STREAM_SHADOW, STREAM_MOBILITY, STREAM_CHANNEL = range(4)

LOG_HEADER = "step,ue,mode,rsrp_dbm,snr_db,mcs,bler,throughput_bps,latency_ms,handover"


def stream_rng(master_seed: int, run_idx: int, stream: int, *rest) -> np.random.Generator:
    key = (run_idx, stream) + tuple(rest)
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=key))


@dataclass(frozen=True)
class UEState:
    position: tuple
    speed_mps: float
    waypoint: tuple


@dataclass(frozen=True)
class Topology:
    """Static placement of one run; d2d_pairs is a random perfect matching."""

    area_m: tuple
    enb_pos: np.ndarray
    gnb_pos: np.ndarray
    ue_pos: np.ndarray
    d2d_pairs: tuple


@dataclass(frozen=True)
class StepMetrics:
    ue: int
    mode: Mode
    serving_node: int
    rsrp_dbm: float
    snr_db: float
    modulation: Modulation
    bler: float
    ber: float
    throughput_bps: float
    latency_ms: float
    jitter_ms: float
    effective_snr_db: float
    handover: bool


@dataclass(frozen=True)
class RunSummary:
    """Per-run KPIs: means over UEs then steps; handovers is the total."""

    throughput_bps: float
    ber: float
    latency_ms: float
    jitter_ms: float
    handovers: float
    effective_snr_db: float

    def kpi(self, name: str) -> float:
        return getattr(self, name)


@dataclass(frozen=True)
class SweepResult:
    selector: Selector
    slice_name: SliceName
    sweep_var: str
    sweep_value: float
    kpis: dict  # kpi name -> (mean, ci_halfwidth, n_runs)


def place(n_ue: int, n_enb: int, n_gnb: int, area_m, rng) -> Topology:
    """Uniform placement plus a random perfect matching of UEs into pairs."""
    width, height = float(area_m[0]), float(area_m[1])
    if width <= 0 or height <= 0:
        raise ValueError("area dimensions must be positive")
    if n_enb < 1 or n_gnb < 1:
        raise ValueError("need at least one eNB and one gNB")
    if n_ue < 2:
        raise ValueError("need at least two UEs for pairing")
    high = np.array([width, height])
    enb = rng.uniform(0.0, high, size=(n_enb, 2))
    gnb = rng.uniform(0.0, high, size=(n_gnb, 2))
    ue = rng.uniform(0.0, high, size=(n_ue, 2))
    perm = rng.permutation(n_ue)
    pairs = tuple(
        (int(perm[2 * i]), int(perm[2 * i + 1])) for i in range(n_ue // 2)
    )
    return Topology((width, height), enb, gnb, ue, pairs)


def step_mobility(ue: UEState, dt_s: float, area_m, rng) -> UEState:
    """One random-waypoint step: move toward the waypoint, redraw on arrival."""
    if dt_s <= 0:
        raise ValueError("dt_s must be positive")
    travel = ue.speed_mps * dt_s
    if travel <= 0.0:
        return ue
    px, py = ue.position
    wx, wy = ue.waypoint
    dx, dy = wx - px, wy - py
    dist = math.hypot(dx, dy)
    if dist <= travel:
        # arrival consumes the step; zero pause time
        new_wp = rng.uniform(0.0, np.asarray(area_m, dtype=float))
        return UEState((wx, wy), ue.speed_mps, (float(new_wp[0]), float(new_wp[1])))
    frac = travel / dist
    nx = min(max(px + dx * frac, 0.0), float(area_m[0]))
    ny = min(max(py + dy * frac, 0.0), float(area_m[1]))
    return UEState((nx, ny), ue.speed_mps, ue.waypoint)


def aggregate(values):
    """Sample mean and 1.96 s/sqrt(n) half-width; needs n >= 2."""
    vals = np.asarray(list(values), dtype=float)
    if vals.size < 2:
        raise ValueError("aggregate needs at least 2 runs")
    mean = float(vals.mean())
    ci = float(1.96 * vals.std(ddof=1) / math.sqrt(vals.size))
    return mean, ci


def aggregate_runs(summaries, selector: Selector, slice_name: SliceName,
                   sweep_var: str, sweep_value) -> SweepResult:
    kpis = {}
    for name in KPI_NAMES:
        mean, ci = aggregate([s.kpi(name) for s in summaries])
        kpis[name] = (mean, ci, len(summaries))
    return SweepResult(selector, getattr(slice_name, "value", str(slice_name)),
                       sweep_var, float(sweep_value), kpis)


def format_log_row(step: int, m: StepMetrics) -> str:
    return (
        f"{step},{m.ue},{m.mode.value},{m.rsrp_dbm:.4f},{m.snr_db:.4f},"
        f"{m.modulation.value},{m.bler:.6f},{m.throughput_bps:.3f},"
        f"{m.latency_ms:.4f},{int(m.handover)}"
    )


_CODE_CACHE = {}


def _ldpc_code(cfg: Config):
    key = (cfg["ldpc.n"], cfg["ldpc.rate"], cfg["ldpc.seed"])
    if key not in _CODE_CACHE:
        _CODE_CACHE[key] = make_code(*key)
    return _CODE_CACHE[key]


class _StepEnv:
    """One step's geometry view consumed by candidate enumeration."""

    def __init__(self, sim: "SimRun"):
        self._sim = sim
        pos = np.array([ue.position for ue in sim.ues])
        self._pos = pos
        dist = np.linalg.norm(pos[:, None, :] - sim.node_pos[None, :, :], axis=2)
        self._dist = np.maximum(dist, 1e-3)
        n_ue, n_nodes = dist.shape
        rs = np.empty((n_ue, n_nodes))
        for k in range(n_nodes):
            rat = sim.node_rat[k]
            for u in range(n_ue):
                rs[u, k] = radio.rsrp(
                    rat, self._dist[u, k], sim.shadow_node[u, k],
                    bs_height_m=sim.bs_height_m, ue_height_m=sim.ue_height_m,
                )
        self._rsrp = rs
        self._snr = rs - sim.node_noise[None, :]
        self._budgets = {}
        self._d2d_budgets = {}

    def lte_nodes(self):
        return self._sim.lte_ids

    def nr_nodes(self):
        return self._sim.nr_ids

    def rsrp_ue_node(self, ue: int, node: int) -> float:
        return float(self._rsrp[ue, node])

    def budget_ue_node(self, ue: int, node: int) -> radio.LinkBudget:
        key = (ue, node)
        budget = self._budgets.get(key)
        if budget is None:
            sim = self._sim
            rat = sim.node_rat[node]
            snr_db = float(self._snr[ue, node])
            budget = radio.LinkBudget(
                rat=rat,
                distance_m=float(self._dist[ue, node]),
                shadow_db=float(sim.shadow_node[ue, node]),
                rsrp_dbm=float(self._rsrp[ue, node]),
                snr_db=snr_db,
                effective_snr_db=sim.effective_snr(snr_db, rat),
            )
            self._budgets[key] = budget
        return budget

    def neighbors(self, ue: int):
        other = self._sim.partner.get(ue)
        if other is None:
            return ()
        d = float(np.linalg.norm(self._pos[ue] - self._pos[other]))
        return ((other, d),)

    def rsrp_d2d(self, ue: int, other: int) -> float:
        return self.budget_d2d(ue, other).rsrp_dbm

    def budget_d2d(self, ue: int, other: int) -> radio.LinkBudget:
        key = (min(ue, other), max(ue, other))
        budget = self._d2d_budgets.get(key)
        if budget is None:
            sim = self._sim
            rat = sim.d2d_rat
            d = max(float(np.linalg.norm(self._pos[ue] - self._pos[other])), 1e-3)
            shadow = float(sim.shadow_d2d[ue, other])
            rsrp_dbm = radio.rsrp(
                rat, d, shadow,
                bs_height_m=sim.bs_height_m, ue_height_m=sim.ue_height_m,
            )
            snr_db = rsrp_dbm - sim.d2d_noise
            budget = radio.LinkBudget(rat, d, shadow, rsrp_dbm, snr_db,
                                      sim.effective_snr(snr_db, rat))
            self._d2d_budgets[key] = budget
        return budget


class SimRun:
    """One seeded run: owns the topology, per-UE state, and KPI accumulators."""

    def __init__(self, cfg: Config, table: CalibrationTable, selector: Selector,
                 *, run_idx: int = 0, speed_mps=None, n_ue=None, log_sink=None):
        self.cfg = cfg
        self.table = table
        self.selector = selector
        self.run_idx = run_idx
        self.log_sink = log_sink

        tables = tables_from_config(cfg)
        self.slice_name = slice_from_config(cfg)
        self.rank = slice_ranking(
            tables.profile(self.slice_name, cfg["ahp.level1_source"]), tables
        ).table
        rats = rats_from_config(cfg)
        self.d2d_rat = rats[RatId.D2D]
        self.penalties = mod_penalties_from_config(cfg)

        self.speed = float(cfg["engine.speed_mps"] if speed_mps is None else speed_mps)
        self.n_ue = int(cfg["engine.n_ue"] if n_ue is None else n_ue)
        n_enb, n_gnb = cfg["engine.n_enb"], cfg["engine.n_gnb"]
        self.area = (float(cfg["engine.area_m"]),) * 2
        seed = cfg["seed"]

        self.topology = place(self.n_ue, n_enb, n_gnb, self.area,
                              stream_rng(seed, run_idx, STREAM_PLACEMENT))
        self.node_pos = np.vstack([self.topology.enb_pos, self.topology.gnb_pos])
        self.node_rat = [rats[RatId.LTE]] * n_enb + [rats[RatId.NR]] * n_gnb
        self.lte_ids = tuple(range(n_enb))
        self.nr_ids = tuple(range(n_enb, n_enb + n_gnb))
        self.node_noise = np.array([radio.noise_floor_dbm(r) for r in self.node_rat])
        self.d2d_noise = radio.noise_floor_dbm(self.d2d_rat)
        self.bs_height_m = cfg["phy.bs_height_m"]
        self.ue_height_m = cfg["phy.ue_height_m"]

        sigma = cfg["phy.shadow_sigma_db"]
        rng_sh = stream_rng(seed, run_idx, STREAM_SHADOW)
        self.shadow_node = rng_sh.normal(0.0, sigma, (self.n_ue, len(self.node_rat)))
        upper = np.triu(rng_sh.normal(0.0, sigma, (self.n_ue, self.n_ue)), 1)
        self.shadow_d2d = upper + upper.T

        self.mob_rngs = [stream_rng(seed, run_idx, STREAM_MOBILITY, u)
                         for u in range(self.n_ue)]
        area_arr = np.asarray(self.area)
        self.ues = []
        for u in range(self.n_ue):
            wp = self.mob_rngs[u].uniform(0.0, area_arr)
            self.ues.append(UEState(
                (float(self.topology.ue_pos[u, 0]), float(self.topology.ue_pos[u, 1])),
                self.speed, (float(wp[0]), float(wp[1])),
            ))

        self.partner = {}
        for a, b in self.topology.d2d_pairs:
            self.partner[a] = b
            self.partner[b] = a

        self.states = [SelectionState(selector) for _ in range(self.n_ue)]
        self.windows = [deque(maxlen=cfg["phy.jitter_window"]) for _ in range(self.n_ue)]
        self.load = np.zeros(len(self.node_rat))
        self.capacity = cfg["engine.node_capacity"]
        self.dt = cfg["engine.dt_s"]
        self.packet_bits = cfg["phy.packet_bytes"] * 8
        self.code_rate = cfg["ldpc.rate"]
        self.max_d2d = cfg["select.max_d2d_distance_m"]
        self.jitter_window = cfg["phy.jitter_window"]
        self.handover_penalty_ms = cfg["engine.handover_penalty_ms"]

        self.per_packet = cfg["phy.per_packet_decoding"]
        if self.per_packet:
            self.code = _ldpc_code(cfg)
            self.chan_rngs = [stream_rng(seed, run_idx, STREAM_CHANNEL, u)
                              for u in range(self.n_ue)]

        self.steps_done = 0
        self.handover_total = 0
        self._step_means = {name: [] for name in
                            ("throughput_bps", "ber", "latency_ms", "jitter_ms",
                             "effective_snr_db")}

    def effective_snr(self, snr_db: float, rat) -> float:
        return radio.effective_snr(
            snr_db, self.speed, Modulation.QPSK, rat,
            speed_penalty_db_per_mps=self.cfg["phy.speed_penalty_db_per_mps"],
            mod_penalties_db=self.penalties,
        )

    def _hop_phy(self, budget: radio.LinkBudget):
        """Link adaptation plus BER/throughput lookup for one hop."""
        cfg = self.cfg
        mod, bler, eff = radio.link_adaptation(
            budget.snr_db, self.speed, budget.rat, self.table,
            bler_target=cfg["phy.bler_target"],
            speed_penalty_db_per_mps=cfg["phy.speed_penalty_db_per_mps"],
            mod_penalties_db=self.penalties,
        )
        ber = self.table.ber(mod, eff)
        tput = radio.throughput(mod, bler, budget.rat,
                                code_rate=self.code_rate,
                                overhead=cfg["phy.overhead"])
        return mod, bler, ber, eff, tput

    def _predict(self, candidate):
        """(throughput, ber) estimate over the candidate's hops for JMSRA."""
        tputs, bers = [], []
        for budget in candidate.link_budgets:
            _, _, ber, _, tput = self._hop_phy(budget)
            tputs.append(tput)
            bers.append(ber)
        ber = bers[0] if len(bers) == 1 else radio.e2e_error_rate(bers[0], bers[1])
        return min(tputs), ber

    def _hop_outcome(self, budget, mod, bler, ber, load):
        cfg = self.cfg
        return radio.packet_outcome(
            self.packet_bits, mod, bler, ber, budget.rat, load,
            self.speed, budget.distance_m,
            code_rate=self.code_rate,
            overhead=cfg["phy.overhead"],
            latency_cap_ms=cfg["phy.latency_cap_ms"],
            sched_ttis=cfg["phy.sched_ttis"],
            decode_ttis=cfg["phy.decode_ttis"],
            harq_rtt_ttis=cfg["phy.harq_rtt_ttis"],
            queue_base_ms=cfg["phy.queue_base_ms"],
        )

    def _decode_block(self, mod, eff_snr_db, rng):
        """Actual coded transmission of one block; returns (ber, block_error)."""
        msg = rng.integers(0, 2, self.code.k, dtype=np.uint8)
        cw = encode(self.code, msg)
        llrs = transmit_awgn(cw, mod, eff_snr_db, rng=rng)
        bits, _, _ = decode_batch(self.code, llrs[None, :],
                                  max_iters=self.cfg["ldpc.max_iters"])
        errs = bits[0] != msg
        return float(errs.mean()), bool(errs.any())

    def _select(self, candidates, state):
        cfg = self.cfg
        if self.selector is Selector.PROPOSED:
            return proposed_select(
                self.rank, candidates, state,
                hysteresis_db=cfg["select.hysteresis_db"],
                sigmoid_center_dbm=cfg["select.sigmoid.center"],
                sigmoid_scale_db=cfg["select.sigmoid.scale"],
            )
        if self.selector is Selector.RSRP_MAX:
            return rsrp_select(candidates, state,
                               hysteresis_db=cfg["select.hysteresis_db"])
        if self.selector is Selector.SDN_JOINT:
            return sdn_select(candidates, state,
                              hom_cqi=cfg["select.sdn_hom_cqi"],
                              ttt_steps=cfg["select.sdn_ttt_steps"])
        return jmsra_select(candidates, state, self._predict,
                            ber_threshold=cfg["select.jmsra_ber_threshold"],
                            rate_min_bps=cfg["select.jmsra_rate_min_bps"])

    def _ue_step(self, u: int, env: _StepEnv) -> StepMetrics:
        candidates = enumerate_candidates(u, env, self.max_d2d)
        decision = self._select(candidates, self.states[u])
        chosen = decision.chosen
        access_load = float(self.load[chosen.serving_node])

        if chosen.mode.relayed:
            b1, b2 = chosen.link_budgets
            m1, bl1, be1, e1, _ = self._hop_phy(b1)
            m2, bl2, be2, e2, _ = self._hop_phy(b2)
            if self.per_packet:
                be1, err1 = self._decode_block(m1, e1, self.chan_rngs[u])
                be2, err2 = self._decode_block(m2, e2, self.chan_rngs[u])
            out1 = self._hop_outcome(b1, m1, bl1, be1, 0.0)
            out2 = self._hop_outcome(b2, m2, bl2, be2, access_load)
            outcome = radio.combine_relayed(out1, out2,
                                            self.cfg["phy.latency_cap_ms"])
            if self.per_packet and (err1 or err2):
                outcome = radio.PacketOutcome(
                    outcome.throughput_bps, outcome.bler, outcome.ber,
                    outcome.latency_ms, False)
            mcs, eff = m2, min(e1, e2)
        else:
            budget = chosen.link_budgets[0]
            mod, bler, ber, eff, _ = self._hop_phy(budget)
            if self.per_packet:
                ber, block_err = self._decode_block(mod, eff, self.chan_rngs[u])
            outcome = self._hop_outcome(budget, mod, bler, ber, access_load)
            if self.per_packet and block_err:
                outcome = radio.PacketOutcome(
                    outcome.throughput_bps, outcome.bler, outcome.ber,
                    outcome.latency_ms, False)
            mcs = mod

        # a handover interrupts service; the step's packet eats the outage
        latency = outcome.latency_ms
        if decision.handover:
            latency += self.handover_penalty_ms
        window = self.windows[u]
        window.append(latency)
        jit = radio.jitter(window, window=self.jitter_window)

        return StepMetrics(
            ue=u, mode=chosen.mode, serving_node=chosen.serving_node,
            rsrp_dbm=chosen.rsrp_dbm, snr_db=chosen.snr_db,
            modulation=mcs, bler=outcome.bler, ber=outcome.ber,
            throughput_bps=outcome.throughput_bps,
            latency_ms=latency, jitter_ms=jit,
            effective_snr_db=eff, handover=decision.handover,
        )

    def step(self):
        """Advance one step; returns this step's per-UE metrics."""
        if self.steps_done > 0:
            self.ues = [step_mobility(ue, self.dt, self.area, self.mob_rngs[u])
                        for u, ue in enumerate(self.ues)]
        env = _StepEnv(self)
        metrics = [self._ue_step(u, env) for u in range(self.n_ue)]

        counts = np.zeros(len(self.node_rat))
        for m in metrics:
            counts[m.serving_node] += 1
        self.load = counts / self.capacity

        self._step_means["throughput_bps"].append(
            float(np.mean([m.throughput_bps for m in metrics])))
        self._step_means["ber"].append(float(np.mean([m.ber for m in metrics])))
        self._step_means["latency_ms"].append(
            float(np.mean([m.latency_ms for m in metrics])))
        self._step_means["jitter_ms"].append(
            float(np.mean([m.jitter_ms for m in metrics])))
        self._step_means["effective_snr_db"].append(
            float(np.mean([m.effective_snr_db for m in metrics])))
        self.handover_total += sum(m.handover for m in metrics)

        if self.log_sink is not None:
            for m in metrics:
                self.log_sink.write(format_log_row(self.steps_done, m) + "\n")
        self.steps_done += 1
        return metrics

    def summary(self) -> RunSummary:
        if self.steps_done == 0:
            raise ValueError("no steps simulated")
        return RunSummary(
            throughput_bps=float(np.mean(self._step_means["throughput_bps"])),
            ber=float(np.mean(self._step_means["ber"])),
            latency_ms=float(np.mean(self._step_means["latency_ms"])),
            jitter_ms=float(np.mean(self._step_means["jitter_ms"])),
            handovers=float(self.handover_total),
            effective_snr_db=float(np.mean(self._step_means["effective_snr_db"])),
        )


def run(cfg: Config, table: CalibrationTable, selector: Selector, *,
        run_idx: int = 0, speed_mps=None, n_ue=None, log_sink=None) -> RunSummary:
    sim = SimRun(cfg, table, selector, run_idx=run_idx,
                 speed_mps=speed_mps, n_ue=n_ue, log_sink=log_sink)
    for _ in range(cfg["engine.steps"]):
        sim.step()
    return sim.summary()


def run_point(cfg: Config, table: CalibrationTable, selector: Selector,
              sweep_var: str, value, log_sink=None) -> SweepResult:
    """All runs of one (selector, sweep value) operating point, aggregated."""
    kw = {"speed_mps": value} if sweep_var == "speed" else {"n_ue": int(value)}
    summaries = []
    for r in range(cfg["engine.runs"]):
        if log_sink is not None:
            log_sink.write(
                f"# run selector={selector.value} {sweep_var}={float(value)} run={r}\n"
            )
        summaries.append(run(cfg, table, selector, run_idx=r,
                             log_sink=log_sink, **kw))
    return aggregate_runs(summaries, selector, slice_from_config(cfg),
                          sweep_var, value)


def sweep_grid(cfg: Config):
    var = cfg["sweep"]
    values = sweep_speeds(cfg) if var == "speed" else [float(v) for v in sweep_users(cfg)]
    return var, values


def _point_worker(args):
    cfg, table, sel, var, v, want_log = args
    sink = io.StringIO() if want_log else None
    res = run_point(cfg, table, sel, var, v, log_sink=sink)
    return res, sink.getvalue() if sink is not None else None


def sweep(cfg: Config, table: CalibrationTable, *, progress=None):
    """Every (selector, sweep value) point, in deterministic order.

    When engine.log_file is set, per-step rows from all points land in that
    one file, in point order, each run preceded by a '# run ...' marker.
    Points buffer their rows independently so worker processes stay isolated;
    a single collector writes the file, which keeps reruns byte-identical.
    """
    var, values = sweep_grid(cfg)
    selectors = selectors_from_config(cfg)
    log_path = cfg["engine.log_file"]
    points = [(cfg, table, sel, var, v, bool(log_path))
              for sel in selectors for v in values]
    workers = cfg["engine.workers"]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            pairs = list(pool.map(_point_worker, points))
    else:
        pairs = [_point_worker(p) for p in points]
    results = [res for res, _ in pairs]
    if log_path:
        with open(log_path, "w") as fh:
            fh.write(LOG_HEADER + "\n")
            for _, text in pairs:
                fh.write(text)
    if progress is not None:
        for res in results:
            progress(res)
    return results

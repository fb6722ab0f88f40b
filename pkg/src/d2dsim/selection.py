"""Mode selectors: the rank-times-sigmoid policy and three baselines.

Every selector maps a UE's candidate list to one decision and updates the
UE's selection state in place.  A handover is any change of attachment
identifier: the serving node for direct modes, the relay UE for relayed
modes.  The first attachment of a run is not counted as a handover.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from .ahp import Option, RankTable

DEFAULT_HYSTERESIS_DB = 0.6
DEFAULT_SIGMOID_CENTER_DBM = -90.0
DEFAULT_SIGMOID_SCALE_DB = 10.0
DEFAULT_SDN_HOM_CQI = 1
DEFAULT_SDN_TTT_STEPS = 3
DEFAULT_JMSRA_BER_THRESHOLD = 1e-3
DEFAULT_JMSRA_RATE_MIN_BPS = 1e6
DEFAULT_MAX_D2D_DISTANCE_M = 80.0


class Mode(Enum):
    LTE_DIRECT = "lte_direct"
    NR_DIRECT = "nr_direct"
    LTE_VIA_D2D = "lte_via_d2d"
    NR_VIA_D2D = "nr_via_d2d"

    @property
    def option(self) -> Option:
        if self in (Mode.LTE_VIA_D2D, Mode.NR_VIA_D2D):
            return Option.D2D
        return Option.LTE if self is Mode.LTE_DIRECT else Option.NR

    @property
    def relayed(self) -> bool:
        return self.option is Option.D2D


MODES = tuple(Mode)


class Selector(Enum):
    PROPOSED = "proposed"
    RSRP_MAX = "rsrp_max"
    SDN_JOINT = "sdn_joint"
    JMSRA = "jmsra"


@dataclass(frozen=True)
class Candidate:
    """One selectable link; relayed candidates carry two hop budgets."""

    mode: Mode
    serving_node: int
    relay: int | None
    rsrp_dbm: float  # min over hops for relayed modes
    snr_db: float    # likewise the bottleneck hop
    link_budgets: tuple = ()

    @property
    def attachment(self) -> int:
        return self.serving_node if self.relay is None else self.relay


@dataclass
class SelectionState:
    """Per-UE selector memory across steps."""

    selector: Selector
    current_mode: Mode | None = None
    current_attachment: int | None = None
    ttt_counters: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ModeDecision:
    chosen: Candidate
    combined_score: float
    handover: bool

    @property
    def mode(self) -> Mode:
        return self.chosen.mode


def sigmoid_norm(
    rsrp_dbm: float,
    center_dbm: float = DEFAULT_SIGMOID_CENTER_DBM,
    scale_db: float = DEFAULT_SIGMOID_SCALE_DB,
) -> float:
    """Squash RSRP into (0,1); 0.5 at the center, saturating over ~6 scales."""
    x = (rsrp_dbm - center_dbm) / scale_db
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def enumerate_candidates(ue, env, max_d2d_distance_m: float = DEFAULT_MAX_D2D_DISTANCE_M):
    """Build the UE's candidate list from an environment view.

    `env` provides lte_nodes()/nr_nodes(), rsrp_ue_node(ue, node),
    budget_ue_node(ue, node), neighbors(ue) -> (other, distance) pairs,
    rsrp_d2d(ue, other) and budget_d2d(ue, other).  One direct candidate
    per technology (strongest node), plus at most one relayed candidate
    per technology through the relay with the best bottleneck RSRP.
    """
    best_nodes = {}
    for option, nodes in ((Option.LTE, env.lte_nodes()), (Option.NR, env.nr_nodes())):
        node = max(nodes, key=lambda n: env.rsrp_ue_node(ue, n))
        best_nodes[option] = node

    out = []
    for mode, option in ((Mode.LTE_DIRECT, Option.LTE), (Mode.NR_DIRECT, Option.NR)):
        node = best_nodes[option]
        budget = env.budget_ue_node(ue, node)
        out.append(Candidate(mode, node, None, budget.rsrp_dbm, budget.snr_db, (budget,)))

    relayed = {}
    for other, distance in env.neighbors(ue):
        if distance > max_d2d_distance_m:
            continue
        d2d_budget = env.budget_d2d(ue, other)
        for mode, option in ((Mode.LTE_VIA_D2D, Option.LTE), (Mode.NR_VIA_D2D, Option.NR)):
            node = max(env.lte_nodes() if option is Option.LTE else env.nr_nodes(),
                       key=lambda n: env.rsrp_ue_node(other, n))
            access = env.budget_ue_node(other, node)
            cand = Candidate(
                mode,
                node,
                other,
                min(d2d_budget.rsrp_dbm, access.rsrp_dbm),
                min(d2d_budget.snr_db, access.snr_db),
                (d2d_budget, access),
            )
            prev = relayed.get(mode)
            if prev is None or cand.rsrp_dbm > prev.rsrp_dbm:
                relayed[mode] = cand
    for mode in (Mode.LTE_VIA_D2D, Mode.NR_VIA_D2D):
        if mode in relayed:
            out.append(relayed[mode])
    return out


def _find_current(candidates, state: SelectionState):
    for c in candidates:
        if c.mode is state.current_mode and c.attachment == state.current_attachment:
            return c
    return None


def _commit(state: SelectionState, winner: Candidate, score: float) -> ModeDecision:
    handover = (
        state.current_attachment is not None
        and winner.attachment != state.current_attachment
    )
    state.current_mode = winner.mode
    state.current_attachment = winner.attachment
    return ModeDecision(winner, score, handover)


def _gated_pick(candidates, state, key, hysteresis_db):
    """Argmax of `key` with an RSRP-domain switching margin.

    Leaving the current attachment requires the winner to beat the current
    candidate's RSRP by the margin; if the current candidate vanished
    (relay out of range, say), the switch is forced with no gate.
    """
    if not candidates:
        raise ValueError("no candidates to select from")
    winner = max(candidates, key=key)
    current = _find_current(candidates, state)
    if (
        hysteresis_db > 0
        and current is not None
        and winner.attachment != current.attachment
        and winner.rsrp_dbm < current.rsrp_dbm + hysteresis_db
    ):
        winner = current
    return _commit(state, winner, key(winner))


def proposed_select(
    rank: RankTable,
    candidates,
    state: SelectionState,
    *,
    hysteresis_db: float = DEFAULT_HYSTERESIS_DB,
    sigmoid_center_dbm: float = DEFAULT_SIGMOID_CENTER_DBM,
    sigmoid_scale_db: float = DEFAULT_SIGMOID_SCALE_DB,
) -> ModeDecision:
    """Slice rank times sigmoid-normalized RSRP, argmax, RSRP hysteresis."""

    def score(c: Candidate) -> float:
        return rank.scores[c.mode.option] * sigmoid_norm(
            c.rsrp_dbm, sigmoid_center_dbm, sigmoid_scale_db
        )

    return _gated_pick(candidates, state, score, hysteresis_db)


def rsrp_select(
    candidates,
    state: SelectionState,
    *,
    hysteresis_db: float = DEFAULT_HYSTERESIS_DB,
) -> ModeDecision:
    """Slice-blind strongest-RSRP baseline with the same hysteresis."""
    return _gated_pick(candidates, state, lambda c: c.rsrp_dbm, hysteresis_db)


def cqi_from_snr(snr_db: float) -> int:
    """15-level CQI: 0 at or below -6 dB, 15 at or above 22 dB."""
    return int(min(15, max(0, round(15.0 * (snr_db + 6.0) / 28.0))))


def sdn_select(
    candidates,
    state: SelectionState,
    *,
    hom_cqi: int = DEFAULT_SDN_HOM_CQI,
    ttt_steps: int = DEFAULT_SDN_TTT_STEPS,
) -> ModeDecision:
    """CQI-based handover with margin and time-to-trigger.

    A target must beat the serving CQI by `hom_cqi` for `ttt_steps`
    consecutive steps; counters reset when the condition lapses and on
    every switch.  Paired UEs run this rule independently, so one or both
    endpoints switching yields the half or full handover of the baseline.
    """
    if not candidates:
        raise ValueError("no candidates to select from")
    current = _find_current(candidates, state)
    if current is None:
        state.ttt_counters.clear()
        winner = max(candidates, key=lambda c: cqi_from_snr(c.snr_db))
        return _commit(state, winner, float(cqi_from_snr(winner.snr_db)))

    serving_cqi = cqi_from_snr(current.snr_db)
    qualified = []
    seen = set()
    for c in candidates:
        key = (c.mode.value, c.attachment)
        seen.add(key)
        if c.attachment == current.attachment:
            continue
        if cqi_from_snr(c.snr_db) >= serving_cqi + hom_cqi:
            state.ttt_counters[key] = state.ttt_counters.get(key, 0) + 1
            if state.ttt_counters[key] >= ttt_steps:
                qualified.append(c)
        else:
            state.ttt_counters[key] = 0
    for key in list(state.ttt_counters):
        if key not in seen:
            del state.ttt_counters[key]

    if qualified:
        winner = max(qualified, key=lambda c: cqi_from_snr(c.snr_db))
        state.ttt_counters.clear()
        return _commit(state, winner, float(cqi_from_snr(winner.snr_db)))
    return _commit(state, current, float(serving_cqi))


def jmsra_select(
    candidates,
    state: SelectionState,
    predict,
    *,
    ber_threshold: float = DEFAULT_JMSRA_BER_THRESHOLD,
    rate_min_bps: float = DEFAULT_JMSRA_RATE_MIN_BPS,
) -> ModeDecision:
    """Greedy joint selection: best rate subject to a BER constraint.

    `predict` maps a candidate to (throughput_bps, ber).  Feasible means
    ber <= threshold and throughput >= the rate floor; the best feasible
    throughput wins, otherwise the minimum-BER candidate.  No hysteresis.
    """
    if not candidates:
        raise ValueError("no candidates to select from")
    if ber_threshold <= 0 or rate_min_bps <= 0:
        raise ValueError("jmsra thresholds must be positive")
    preds = [predict(c) for c in candidates]
    feasible = [
        (c, tput) for c, (tput, ber) in zip(candidates, preds)
        if ber <= ber_threshold and tput >= rate_min_bps
    ]
    if feasible:
        winner, score = max(feasible, key=lambda pair: pair[1])
    else:
        winner, (_, score) = min(
            zip(candidates, preds), key=lambda pair: pair[1][1]
        )
    return _commit(state, winner, float(score))

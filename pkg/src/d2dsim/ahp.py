"""Two-level AHP decision core for slice-aware access ranking.

Level 0 weighs the four link criteria per service class from a 1-10
priority vector; level 1 carries per-criterion option weights (LTE / NR /
D2D) that are either taken from the bundled reference tables or recomputed
from the bundled pairwise matrices.  The synthesis is a plain weighted sum.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources

import numpy as np

__all__ = [
    "Criterion",
    "Option",
    "SliceName",
    "ComparisonMatrix",
    "NormalizedMatrix",
    "ConsistencyReport",
    "SliceProfile",
    "RankTable",
    "AhpTables",
    "ConsistencyWarning",
    "pcm_from_priorities",
    "normalize",
    "consistency",
    "synthesize_rank",
    "slice_ranking",
    "load_tables",
    "default_tables",
]

# Random consistency index for the matrix orders this engine supports.
RANDOM_INDEX = {3: 0.58, 4: 0.90}

CR_CONSISTENT_LIMIT = 0.1
RECIPROCITY_TOL = 0.15
PRIORITY_MIN, PRIORITY_MAX = 1.0, 10.0


class Criterion(Enum):
    DATA_RATE = "data_rate"
    RELIABILITY = "reliability"
    LATENCY = "latency"
    JITTER = "jitter"


class Option(Enum):
    LTE = "lte"
    NR = "nr"
    D2D = "d2d"


class SliceName(Enum):
    EMBB = "embb"
    URLLC = "urllc"
    MMTC = "mmtc"


CRITERIA = tuple(Criterion)
OPTIONS = tuple(Option)


class ConsistencyWarning(UserWarning):
    """Raised (as a warning) for tolerable AHP input irregularities."""


class ComparisonMatrix:
    """Square positive pairwise-comparison matrix of order 3 or 4.

    Diagonal must be 1; off-diagonal pairs are expected to be approximate
    reciprocals.  Published tables are rounded, so reciprocity breaches
    beyond the tolerance warn instead of raising: some of the bundled
    reference matrices are sloppier than the tolerance allows.
    """

    def __init__(self, entries) -> None:
        x = np.asarray(entries, dtype=float)
        if x.ndim != 2 or x.shape[0] != x.shape[1]:
            raise ValueError(f"comparison matrix must be square, got shape {x.shape}")
        n = x.shape[0]
        if n not in RANDOM_INDEX:
            raise ValueError(f"unsupported matrix order {n}; supported: {sorted(RANDOM_INDEX)}")
        if not np.all(x > 0):
            raise ValueError("comparison matrix entries must be positive")
        if not np.allclose(np.diag(x), 1.0, atol=1e-9):
            raise ValueError("comparison matrix diagonal must be 1")
        worst = float(np.max(np.abs(x * x.T - 1.0)))
        if worst > RECIPROCITY_TOL:
            warnings.warn(
                f"comparison matrix reciprocity off by {worst:.3f} "
                f"(tolerance {RECIPROCITY_TOL}); proceeding with entries as given",
                ConsistencyWarning,
                stacklevel=2,
            )
        self.entries = x
        self.order = n

    def column_sums(self) -> np.ndarray:
        return self.entries.sum(axis=0)


@dataclass
class NormalizedMatrix:
    """Column-normalized comparison matrix with row-mean weights."""

    entries: np.ndarray
    weights: np.ndarray


@dataclass
class ConsistencyReport:
    lambda_max: float
    ci: float
    cr: float
    consistent: bool


@dataclass
class SliceProfile:
    """Per-slice criterion priorities on the 1-10 scale."""

    name: SliceName
    priorities: dict  # Criterion -> float
    level1_source: str = "tabulated"  # "tabulated" | "recomputed"

    def priority_vector(self) -> np.ndarray:
        return np.array([self.priorities[c] for c in CRITERIA], dtype=float)


@dataclass
class RankTable:
    """Synthesized option scores; rank 1 is the best option."""

    scores: dict  # Option -> float
    ranks: dict   # Option -> int (1-based)

    def ordering(self) -> list:
        return sorted(OPTIONS, key=lambda o: self.ranks[o])

    def best(self) -> Option:
        return self.ordering()[0]


def pcm_from_priorities(priorities) -> ComparisonMatrix:
    """Build the exact-ratio comparison matrix x_ij = p_i / p_j."""
    p = np.asarray(priorities, dtype=float)
    if p.ndim != 1:
        raise ValueError("priorities must be a flat vector")
    if not np.all(p > 0):
        raise ValueError("priorities must be positive")
    if np.any(p < PRIORITY_MIN) or np.any(p > PRIORITY_MAX):
        raise ValueError(
            f"priorities must lie in [{PRIORITY_MIN:g}, {PRIORITY_MAX:g}], got {p.tolist()}"
        )
    return ComparisonMatrix(p[:, None] / p[None, :])


def normalize(pcm: ComparisonMatrix) -> NormalizedMatrix:
    """Column-normalize and take row means as the weight vector."""
    sums = pcm.column_sums()
    y = pcm.entries / sums[None, :]
    return NormalizedMatrix(entries=y, weights=y.mean(axis=1))


def consistency(pcm: ComparisonMatrix, weights) -> ConsistencyReport:
    """Consistency report via the column-sum estimate of lambda_max.

    lambda_max = sum_j colsum_j * w_j; CI = (lambda_max - n) / (n - 1);
    CR = CI / RI(n).  Rounded published weight vectors may give lambda_max
    below n, hence negative CI/CR; negative CR still counts as consistent.
    """
    w = np.asarray(weights, dtype=float)
    if w.shape != (pcm.order,):
        raise ValueError(f"weights length {w.shape} does not match matrix order {pcm.order}")
    n = pcm.order
    lam = float(pcm.column_sums() @ w)
    ci = (lam - n) / (n - 1)
    cr = ci / RANDOM_INDEX[n]
    return ConsistencyReport(lambda_max=lam, ci=ci, cr=cr, consistent=cr < CR_CONSISTENT_LIMIT)


def synthesize_rank(level1_weights, level0_weights) -> RankTable:
    """Combine per-criterion option weights with criterion weights.

    `level1_weights` is (n_options, n_criteria) with columns ordered like
    CRITERIA; each column should sum to 1 within rounding slack.  Ties are
    broken in Option declaration order (LTE before NR before D2D).
    """
    p = np.asarray(level1_weights, dtype=float)
    w = np.asarray(level0_weights, dtype=float)
    if p.shape != (len(OPTIONS), len(CRITERIA)):
        raise ValueError(f"level-1 weights must have shape {(len(OPTIONS), len(CRITERIA))}, got {p.shape}")
    if w.shape != (len(CRITERIA),):
        raise ValueError(f"level-0 weights must have length {len(CRITERIA)}, got {w.shape}")
    colsums = p.sum(axis=0)
    if np.any(np.abs(colsums - 1.0) > 0.02):
        raise ValueError(f"level-1 weight columns must each sum to 1 +/- 0.02, got {colsums.tolist()}")
    scores = p @ w
    order = sorted(range(len(OPTIONS)), key=lambda i: (-scores[i], i))
    ranks = {OPTIONS[idx]: pos + 1 for pos, idx in enumerate(order)}
    return RankTable(scores={o: float(scores[i]) for i, o in enumerate(OPTIONS)}, ranks=ranks)


# ---------------------------------------------------------------------------
# Bundled reference tables.
#
# Level-0: the published rounded comparison matrices and their published
# weight columns, kept verbatim so the bundled rankings reproduce.  Entries
# are rounded ratios, hence the slightly off column sums.
# ---------------------------------------------------------------------------

TABULATED_LEVEL0_PCM = {
    SliceName.EMBB: np.array(
        [
            [1.0, 2.0, 5.0, 10.0],
            [0.5, 1.0, 3.0, 5.0],
            [0.2, 0.3, 1.0, 2.0],
            [0.1, 0.2, 0.5, 1.0],
        ]
    ),
    SliceName.URLLC: np.array(
        [
            [1.0, 0.5, 0.42, 3.0],
            [2.0, 1.0, 0.85, 6.0],
            [2.3, 1.16, 1.0, 7.0],
            [0.3, 0.16, 0.14, 1.0],
        ]
    ),
    SliceName.MMTC: np.array(
        [
            [1.0, 0.3, 0.16, 0.1],
            [3.0, 1.0, 0.5, 0.3],
            [6.0, 2.0, 1.0, 0.6],
            [9.0, 3.0, 1.5, 1.0],
        ]
    ),
}

TABULATED_LEVEL0_WEIGHTS = {
    SliceName.EMBB: np.array([0.55, 0.28, 0.10, 0.05]),
    SliceName.URLLC: np.array([0.176, 0.354, 0.412, 0.056]),
    SliceName.MMTC: np.array([0.052, 0.121, 0.325, 0.5]),
}

# Level-1 pairwise matrices (options LTE/NR/D2D) per criterion, used by the
# "recomputed" source.  The reliability matrix is not reciprocal (0.5 vs
# 0.6); ComparisonMatrix warns and proceeds.
LEVEL1_PCMS = {
    Criterion.DATA_RATE: np.array([[1.0, 0.33, 0.5], [3.0, 1.0, 2.0], [2.0, 0.5, 1.0]]),
    Criterion.RELIABILITY: np.array([[1.0, 0.5, 0.33], [0.6, 1.0, 0.5], [3.0, 2.0, 1.0]]),
    Criterion.LATENCY: np.array([[1.0, 0.5, 0.25], [2.0, 1.0, 0.3], [4.0, 2.0, 1.0]]),
    Criterion.JITTER: np.array([[1.0, 2.0, 0.75], [0.5, 1.0, 0.3], [1.5, 2.5, 1.0]]),
}

LEVEL1_SOURCES = ("tabulated", "recomputed")


@dataclass
class AhpTables:
    """Editable decision data: slice priorities and tabulated level-1 weights."""

    priorities: dict = field(default_factory=dict)   # SliceName -> {Criterion: float}
    level1: dict = field(default_factory=dict)       # Criterion -> {Option: float}

    def profile(self, name: SliceName, level1_source: str = "tabulated") -> SliceProfile:
        return SliceProfile(name=name, priorities=dict(self.priorities[name]),
                            level1_source=level1_source)

    def level1_matrix(self) -> np.ndarray:
        return np.array([[self.level1[c][o] for c in CRITERIA] for o in OPTIONS])


def _parse_kv_lines(text: str, origin: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{origin}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        out[key.strip()] = val.strip()
    return out


def load_tables(path=None) -> AhpTables:
    """Load slice priorities and level-1 weights from a key=value file.

    Keys: slice.<name>.priority.<criterion> and level1.<criterion>.<option>.
    With no path the packaged defaults are used.
    """
    if path is None:
        text = resources.files("d2dsim.data").joinpath("ahp_tables.txt").read_text()
        origin = "ahp_tables.txt"
    else:
        with open(path) as fh:
            text = fh.read()
        origin = str(path)
    kv = _parse_kv_lines(text, origin)

    tables = AhpTables()
    for key, val in kv.items():
        parts = key.split(".")
        try:
            if parts[0] == "slice" and len(parts) == 4 and parts[2] == "priority":
                name = SliceName(parts[1])
                crit = Criterion(parts[3])
                tables.priorities.setdefault(name, {})[crit] = float(val)
            elif parts[0] == "level1" and len(parts) == 3:
                crit = Criterion(parts[1])
                opt = Option(parts[2])
                tables.level1.setdefault(crit, {})[opt] = float(val)
            else:
                raise ValueError
        except ValueError:
            raise ValueError(f"{origin}: unrecognized key {key!r}") from None

    for name in SliceName:
        missing = [c.value for c in CRITERIA if c not in tables.priorities.get(name, {})]
        if missing:
            raise ValueError(f"{origin}: slice {name.value!r} missing priorities for {missing}")
    for crit in CRITERIA:
        missing = [o.value for o in OPTIONS if o not in tables.level1.get(crit, {})]
        if missing:
            raise ValueError(f"{origin}: level1 {crit.value!r} missing options {missing}")
    return tables


_DEFAULT_TABLES = None


def default_tables() -> AhpTables:
    global _DEFAULT_TABLES
    if _DEFAULT_TABLES is None:
        _DEFAULT_TABLES = load_tables()
    return _DEFAULT_TABLES


def recomputed_level1_matrix() -> np.ndarray:
    """Level-1 option weights re-derived from the bundled pairwise matrices."""
    cols = []
    for crit in CRITERIA:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConsistencyWarning)
            ncm = normalize(ComparisonMatrix(LEVEL1_PCMS[crit]))
        cols.append(ncm.weights)
    return np.stack(cols, axis=1)


@dataclass
class SliceRanking:
    """slice_ranking output: rank table plus the level-0 diagnostics."""

    profile: SliceProfile
    table: RankTable
    level0_weights: np.ndarray
    level0_report: ConsistencyReport
    level1_weights: np.ndarray


def slice_ranking(profile: SliceProfile, tables: AhpTables | None = None) -> SliceRanking:
    """Full two-level pipeline for one slice profile.

    Level 0 is built from the profile's exact-ratio matrix; level 1 comes
    from the tabulated file or is recomputed per `profile.level1_source`.
    Inconsistent matrices (CR >= 0.1) warn but do not fail.
    """
    if profile.level1_source not in LEVEL1_SOURCES:
        raise ValueError(f"unknown level1 source {profile.level1_source!r}; expected {LEVEL1_SOURCES}")
    if tables is None:
        tables = default_tables()

    pcm = pcm_from_priorities(profile.priority_vector())
    ncm = normalize(pcm)
    report = consistency(pcm, ncm.weights)
    if not report.consistent:
        warnings.warn(
            f"slice {profile.name.value}: level-0 CR {report.cr:.3f} >= {CR_CONSISTENT_LIMIT}",
            ConsistencyWarning,
            stacklevel=2,
        )

    if profile.level1_source == "tabulated":
        p = tables.level1_matrix()
    else:
        p = recomputed_level1_matrix()

    table = synthesize_rank(p, ncm.weights)
    return SliceRanking(profile=profile, table=table, level0_weights=ncm.weights,
                        level0_report=report, level1_weights=p)

"""Regular LDPC code construction and systematic encoding over GF(2).

Gallager-style ensemble: every column of H has weight 3, row weights are
balanced to (3n)/m.  Draws are deterministic per seed and repeated until
the parity-check matrix has full row rank, so k = n - m exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

COLUMN_WEIGHT = 3


def gf2_rref(h: np.ndarray):
    """Reduced row echelon form over GF(2); returns (rref, pivot_cols)."""
    a = (h.astype(np.uint8) & 1).copy()
    rows, cols = a.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        pivot_rows = np.nonzero(a[r:, c])[0]
        if pivot_rows.size == 0:
            continue
        p = r + pivot_rows[0]
        if p != r:
            a[[r, p]] = a[[p, r]]
        hits = np.nonzero(a[:, c])[0]
        hits = hits[hits != r]
        a[hits] ^= a[r]
        pivots.append(c)
        r += 1
    return a, pivots


def gf2_rank(h: np.ndarray) -> int:
    return len(gf2_rref(h)[1])


@dataclass
class LdpcCode:
    """Binary LDPC code with a systematic encoder.

    Information bits occupy `info_cols` of the codeword; `parity_map` is the
    m x k GF(2) matrix giving parity bits as parity_map @ u mod 2, placed at
    `pivot_cols`.
    """

    n: int
    k: int
    h: np.ndarray
    pivot_cols: np.ndarray
    info_cols: np.ndarray
    parity_map: np.ndarray
    seed: int
    _edge_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def rate(self) -> float:
        return self.k / self.n

    def edge_structure(self):
        """Index arrays for message passing (built once, cached).

        Returns a dict with:
          edge_var: (E,) variable index of each edge, edges grouped by check
          check_edges: (m, d_max) edge index per check, -1 padded
          var_edges: (n, 3) edge index per variable
        """
        if self._edge_cache:
            return self._edge_cache
        chk_idx, var_idx = np.nonzero(self.h)
        order = np.lexsort((var_idx, chk_idx))
        edge_var = var_idx[order].astype(np.int32)
        edge_chk = chk_idx[order].astype(np.int32)
        m = self.h.shape[0]
        deg = np.bincount(edge_chk, minlength=m)
        d_max = int(deg.max())
        check_edges = np.full((m, d_max), -1, dtype=np.int32)
        pos = np.zeros(m, dtype=np.int64)
        for e, c in enumerate(edge_chk):
            check_edges[c, pos[c]] = e
            pos[c] += 1
        var_edges = np.full((self.n, COLUMN_WEIGHT), -1, dtype=np.int32)
        vpos = np.zeros(self.n, dtype=np.int64)
        for e, v in enumerate(edge_var):
            var_edges[v, vpos[v]] = e
            vpos[v] += 1
        self._edge_cache.update(
            edge_var=edge_var,
            check_edges=check_edges,
            check_deg=deg.astype(np.int32),
            var_edges=var_edges,
        )
        return self._edge_cache


def _draw_parity_matrix(n: int, m: int, rng: np.random.Generator) -> np.ndarray | None:
    """One attempt at a column-weight-3 matrix with balanced row weights."""
    total = COLUMN_WEIGHT * n
    base, extra = divmod(total, m)
    caps = np.full(m, base, dtype=np.int64)
    if extra:
        caps[rng.choice(m, size=extra, replace=False)] += 1
    h = np.zeros((m, n), dtype=np.uint8)
    for col in range(n):
        avail = np.nonzero(caps > 0)[0]
        if avail.size < COLUMN_WEIGHT:
            return None  # greedy fill painted itself into a corner
        rows = rng.choice(avail, size=COLUMN_WEIGHT, replace=False)
        h[rows, col] = 1
        caps[rows] -= 1
    return h


def make_code(n: int, rate: float, seed: int) -> LdpcCode:
    """Draw a regular code deterministically; redraw until H has full rank."""
    if n < 8 or n % 2:
        raise ValueError(f"code length must be even and >= 8, got {n}")
    if not 0.0 < rate < 1.0:
        raise ValueError(f"rate must be in (0, 1), got {rate}")
    m = round(n * (1.0 - rate))
    if m < COLUMN_WEIGHT:
        raise ValueError(f"rate {rate} leaves too few checks ({m}) for column weight {COLUMN_WEIGHT}")
    rng = np.random.default_rng(seed)
    while True:
        h = _draw_parity_matrix(n, m, rng)
        if h is None:
            continue
        rref, pivots = gf2_rref(h)
        if len(pivots) == m:
            break
    pivot_cols = np.array(pivots, dtype=np.int64)
    mask = np.ones(n, dtype=bool)
    mask[pivot_cols] = False
    info_cols = np.nonzero(mask)[0]
    # rref rows read "c[pivot_i] + sum_j rref[i, info_j] * c[info_j] = 0"
    parity_map = rref[:, info_cols].copy()
    return LdpcCode(n=n, k=n - m, h=h, pivot_cols=pivot_cols,
                    info_cols=info_cols, parity_map=parity_map, seed=seed)


def encode(code: LdpcCode, message: np.ndarray) -> np.ndarray:
    """Systematic encoding of one message (k,) or a batch (B, k)."""
    u = np.asarray(message)
    if u.ndim == 1:
        return encode(code, u[None, :])[0]
    if u.ndim != 2 or u.shape[1] != code.k:
        raise ValueError(f"message must have {code.k} bits per row, got shape {u.shape}")
    if not np.isin(u, (0, 1)).all():
        raise ValueError("message bits must be 0/1")
    u = u.astype(np.uint8)
    cw = np.zeros((u.shape[0], code.n), dtype=np.uint8)
    cw[:, code.info_cols] = u
    parity = (u.astype(np.int64) @ code.parity_map.T.astype(np.int64)) & 1
    cw[:, code.pivot_cols] = parity.astype(np.uint8)
    return cw

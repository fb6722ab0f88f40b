"""Monte-Carlo BLER/BER calibration of the LDPC link, per modulation.

One decoding campaign per (modulation, SNR) grid point, seeded
independently so the table is reproducible point by point.  The raw BLER
estimates are smoothed with a non-increasing isotonic fit (pool adjacent
violators) before lookup; lookups interpolate in dB and clamp at the
grid edges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .code import make_code
from .code import encode as ldpc_encode
from .decoder import DEFAULT_MAX_ITERS, decode_batch
from .modem import MODULATIONS, Modulation, transmit_awgn

_META_KEYS = ("n", "k", "rate", "code_seed", "channel_seed", "max_iters")
_INT_KEYS = {"n", "k", "code_seed", "channel_seed", "max_iters"}


def pav_nonincreasing(y, weights=None):
    """Weighted least-squares fit of a non-increasing sequence to y."""
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)
    blocks = []  # [mean, weight, count]
    for v, wt in zip(y, w):
        blocks.append([float(v), float(wt), 1])
        while len(blocks) > 1 and blocks[-2][0] < blocks[-1][0]:
            v1, w1, c1 = blocks.pop()
            v0, w0, c0 = blocks.pop()
            blocks.append([(v0 * w0 + v1 * w1) / (w0 + w1), w0 + w1, c0 + c1])
    return np.concatenate([np.full(c, v) for v, _, c in blocks])


@dataclass(frozen=True)
class BlerCurve:
    """Fitted error-rate curve of one modulation on the SNR grid."""

    modulation: Modulation
    snr_db: np.ndarray
    bler: np.ndarray
    ber: np.ndarray
    trials: np.ndarray

    def bler_at(self, snr_db: float) -> float:
        return float(np.interp(snr_db, self.snr_db, self.bler))

    def ber_at(self, snr_db: float) -> float:
        return float(np.interp(snr_db, self.snr_db, self.ber))


@dataclass(frozen=True)
class CalibrationTable:
    """Per-modulation curves plus the link parameters they were run with."""

    meta: dict
    curves: dict

    def curve(self, mod: Modulation) -> BlerCurve:
        try:
            return self.curves[mod]
        except KeyError:
            raise ValueError(f"no calibration curve for {mod.value}") from None

    def bler(self, mod: Modulation, snr_db: float) -> float:
        return self.curve(mod).bler_at(snr_db)

    def ber(self, mod: Modulation, snr_db: float) -> float:
        return self.curve(mod).ber_at(snr_db)

    def mismatches(self, expected: dict) -> list:
        """Human-readable differences between `expected` and this table's meta."""
        out = []
        for key, want in expected.items():
            have = self.meta.get(key)
            if key == "rate":
                ok = have is not None and abs(float(have) - float(want)) < 1e-9
            else:
                ok = have == want
            if not ok:
                out.append(f"{key}: table has {have!r}, run wants {want!r}")
        return out

    def save(self, path, extra_comments=()) -> None:
        lines = ["# d2dsim ldpc calibration v1"]
        for extra in extra_comments:
            lines.append(f"# {extra}")
        for key in _META_KEYS:
            val = self.meta[key]
            lines.append(f"# {key} {val:.10g}" if key == "rate" else f"# {key} {int(val)}")
        lines.append("# columns: modulation snr_db bler ber trials")
        for mod in MODULATIONS:
            if mod not in self.curves:
                continue
            cu = self.curves[mod]
            for s, bl, be, tr in zip(cu.snr_db, cu.bler, cu.ber, cu.trials):
                lines.append(f"{mod.value} {s:.10g} {bl:.8f} {be:.8f} {int(tr)}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "CalibrationTable":
        meta = {}
        rows = {}
        with open(path) as fh:
            for raw in fh:
                line = raw.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    parts = line[1:].split()
                    if len(parts) == 2 and parts[0] in _META_KEYS:
                        key = parts[0]
                        meta[key] = int(parts[1]) if key in _INT_KEYS else float(parts[1])
                    continue
                parts = line.split()
                if len(parts) != 5:
                    raise ValueError(f"bad calibration row: {line!r}")
                mod = Modulation(parts[0])
                rows.setdefault(mod, []).append(
                    (float(parts[1]), float(parts[2]), float(parts[3]), int(parts[4]))
                )
        missing = [k for k in _META_KEYS if k not in meta]
        if missing:
            raise ValueError(f"calibration file lacks metadata: {', '.join(missing)}")
        if not rows:
            raise ValueError("calibration file has no data rows")
        curves = {}
        for mod, pts in rows.items():
            pts.sort(key=lambda p: p[0])
            arr = np.array(pts, dtype=float)
            curves[mod] = BlerCurve(
                mod, arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3].astype(int)
            )
        return cls(meta, curves)


def snr_grid(snr_min_db=-2.0, snr_max_db=26.0, snr_step_db=2.0) -> np.ndarray:
    if snr_step_db <= 0:
        raise ValueError("snr_step_db must be positive")
    if snr_max_db < snr_min_db:
        raise ValueError("snr_max_db must be >= snr_min_db")
    return np.arange(snr_min_db, snr_max_db + snr_step_db / 2.0, snr_step_db)


def calibrate(
    *,
    n=512,
    rate=0.5,
    code_seed=7,
    snr_min_db=-2.0,
    snr_max_db=26.0,
    snr_step_db=2.0,
    trials=1000,
    seed=12345,
    max_iters=DEFAULT_MAX_ITERS,
    modulations=MODULATIONS,
    progress=None,
) -> CalibrationTable:
    """Run the decoding campaigns and return the fitted table.

    Point (mod, snr index) gets its own child generator, so a rerun with
    the same parameters reproduces every estimate exactly.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    code = make_code(n, rate, code_seed)
    snrs = snr_grid(snr_min_db, snr_max_db, snr_step_db)
    curves = {}
    for mod in modulations:
        mod_idx = MODULATIONS.index(mod)
        raw_bler = np.empty(snrs.size)
        raw_ber = np.empty(snrs.size)
        for pi, snr in enumerate(snrs):
            rng = np.random.default_rng(np.random.SeedSequence([seed, mod_idx, pi]))
            msgs = rng.integers(0, 2, size=(trials, code.k), dtype=np.uint8)
            cws = ldpc_encode(code, msgs)
            llrs = transmit_awgn(cws, mod, float(snr), rng=rng)
            bits, _, _ = decode_batch(code, llrs, max_iters)
            errs = bits != msgs
            raw_bler[pi] = errs.any(axis=1).mean()
            raw_ber[pi] = errs.mean()
            if progress is not None:
                progress(mod, float(snr), float(raw_bler[pi]))
        curves[mod] = BlerCurve(
            mod,
            snrs.copy(),
            pav_nonincreasing(raw_bler),
            raw_ber,
            np.full(snrs.size, trials, dtype=int),
        )
    meta = {
        "n": code.n,
        "k": code.k,
        "rate": rate,
        "code_seed": code_seed,
        "channel_seed": seed,
        "max_iters": max_iters,
    }
    return CalibrationTable(meta, curves)

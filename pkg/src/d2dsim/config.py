"""Flat key=value run configuration.

Precedence: built-in defaults, then a config file, then D2DSIM_*
environment variables, then command-line overrides.  Unknown keys are
rejected and every numeric key is range checked, with the offending key
named in the error.  The canonical line listing feeds a short hash that
output files embed, so results are traceable to the exact configuration.
"""

from __future__ import annotations

import hashlib
import os
from collections.abc import Mapping
from dataclasses import dataclass

from .ahp import CRITERIA, OPTIONS, AhpTables, Criterion, Option, SliceName, default_tables
from .ldpc.modem import Modulation
from .radio import Rat, RatId
from .selection import Selector

ENV_PREFIX = "D2DSIM_"

_MODULATION_NAMES = {m.value: m for m in Modulation}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class KeySpec:
    default: object
    kind: str  # int | float | bool | str | choice
    lo: float | None = None
    hi: float | None = None
    choices: tuple = ()


def _num(default, kind, lo, hi):
    return KeySpec(default, kind, lo, hi)


def _choice(default, *choices):
    return KeySpec(default, "choice", choices=tuple(choices))


def _build_registry() -> dict:
    reg = {
        "seed": _num(1, "int", 0, 2**63 - 1),
        "slice": _choice("embb", "embb", "urllc", "mmtc"),
        "sweep": _choice("speed", "speed", "users"),
        "selectors": KeySpec("proposed,rsrp_max,sdn_joint,jmsra", "str"),
        "sweep.speeds": KeySpec("2,4,6,8,10", "str"),
        "sweep.users": KeySpec("20,40,60,80,100", "str"),
        "ahp.level1_source": _choice("tabulated", "tabulated", "recomputed"),
        "select.sigmoid.center": _num(-90.0, "float", -200.0, 0.0),
        "select.sigmoid.scale": _num(10.0, "float", 1e-6, 100.0),
        "select.hysteresis_db": _num(0.6, "float", 0.0, 100.0),
        "select.sdn_hom_cqi": _num(1, "int", 0, 15),
        "select.sdn_ttt_steps": _num(3, "int", 1, 1000),
        "select.jmsra_ber_threshold": _num(1e-3, "float", 1e-12, 1.0),
        "select.jmsra_rate_min_bps": _num(1e6, "float", 1.0, 1e12),
        "select.max_d2d_distance_m": _num(80.0, "float", 1.0, 10000.0),
        "phy.packet_bytes": _num(1500, "int", 1, 65536),
        "phy.overhead": _num(0.14, "float", 0.0, 0.99),
        "phy.bler_target": _num(0.1, "float", 1e-6, 0.999),
        "phy.speed_penalty_db_per_mps": _num(0.2, "float", 0.0, 10.0),
        "phy.penalty_qpsk_db": _num(0.0, "float", 0.0, 20.0),
        "phy.penalty_qam16_db": _num(0.5, "float", 0.0, 20.0),
        "phy.penalty_qam64_db": _num(1.0, "float", 0.0, 20.0),
        "phy.penalty_qam256_db": _num(1.5, "float", 0.0, 20.0),
        "phy.sched_ttis": _num(0.5, "float", 0.0, 100.0),
        "phy.decode_ttis": _num(0.1, "float", 0.0, 100.0),
        "phy.harq_rtt_ttis": _num(8.0, "float", 0.0, 1000.0),
        "phy.queue_base_ms": _num(2.0, "float", 0.0, 1000.0),
        "phy.latency_cap_ms": _num(100.0, "float", 0.1, 1e5),
        "phy.shadow_sigma_db": _num(7.0, "float", 0.0, 50.0),
        "phy.bs_height_m": _num(25.0, "float", 1.1, 300.0),
        "phy.ue_height_m": _num(1.5, "float", 1.1, 10.0),
        "phy.jitter_window": _num(20, "int", 2, 1000),
        "phy.per_packet_decoding": KeySpec(False, "bool"),
        "phy.calibration_file": KeySpec("calibration.txt", "str"),
        "engine.steps": _num(100, "int", 1, 1_000_000),
        "engine.runs": _num(10, "int", 1, 100_000),
        "engine.n_ue": _num(40, "int", 2, 10_000),
        "engine.speed_mps": _num(4.0, "float", 0.0, 100.0),
        "engine.area_m": _num(1000.0, "float", 10.0, 1e6),
        "engine.n_enb": _num(1, "int", 1, 100),
        "engine.n_gnb": _num(2, "int", 1, 100),
        "engine.dt_s": _num(1.0, "float", 1e-3, 3600.0),
        "engine.node_capacity": _num(50, "int", 1, 1_000_000),
        "engine.handover_penalty_ms": _num(30.0, "float", 0.0, 1000.0),
        "engine.log_file": KeySpec("", "str"),
        "engine.workers": _num(1, "int", 1, 256),
        "ldpc.n": _num(512, "int", 16, 16384),
        "ldpc.rate": _num(0.5, "float", 0.05, 0.95),
        "ldpc.seed": _num(7, "int", 0, 2**63 - 1),
        "ldpc.max_iters": _num(50, "int", 1, 1000),
        "cal.snr_min_db": _num(-2.0, "float", -50.0, 100.0),
        "cal.snr_max_db": _num(26.0, "float", -50.0, 100.0),
        "cal.snr_step_db": _num(2.0, "float", 0.1, 50.0),
        "cal.trials": _num(1000, "int", 1, 1_000_000),
        "cal.seed": _num(12345, "int", 0, 2**63 - 1),
    }
    for rid, carrier, power, nf, scs, cap in (
        ("nr", 5.5, 35.0, 6.0, 30.0, "qam256"),
        ("lte", 2.1, 35.0, 7.0, 15.0, "qam64"),
        ("d2d", 2.4, 15.0, 5.0, 15.0, "qam64"),
    ):
        reg[f"rat.{rid}.carrier_ghz"] = _num(carrier, "float", 0.1, 100.0)
        reg[f"rat.{rid}.bandwidth_hz"] = _num(20e6, "float", 1e5, 1e9)
        reg[f"rat.{rid}.tx_power_dbm"] = _num(power, "float", -30.0, 60.0)
        reg[f"rat.{rid}.noise_figure_db"] = _num(nf, "float", 0.0, 20.0)
        reg[f"rat.{rid}.scs_khz"] = _num(scs, "float", 1.0, 960.0)
        reg[f"rat.{rid}.max_modulation"] = _choice(cap, *sorted(_MODULATION_NAMES))
        reg[f"rat.{rid}.diversity_bonus_db"] = _num(0.0, "float", -20.0, 20.0)
    tables = default_tables()
    for sl in SliceName:
        for crit in CRITERIA:
            reg[f"slice.{sl.value}.priority.{crit.value}"] = _num(
                tables.priorities[sl][crit], "float", 1.0, 10.0
            )
    for crit in CRITERIA:
        for opt in OPTIONS:
            reg[f"level1.{crit.value}.{opt.value}"] = _num(
                tables.level1[crit][opt], "float", 0.0, 1.0
            )
    return reg


REGISTRY = _build_registry()


def parse_value(key: str, text):
    """Coerce and range-check one override; raises ConfigError naming the key."""
    try:
        spec = REGISTRY[key]
    except KeyError:
        raise ConfigError(f"unknown config key {key!r}") from None
    if not isinstance(text, str):
        value = text
    elif spec.kind == "int":
        try:
            value = int(text)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {text!r}") from None
    elif spec.kind == "float":
        try:
            value = float(text)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {text!r}") from None
    elif spec.kind == "bool":
        low = text.strip().lower()
        if low in ("1", "true", "yes", "on"):
            value = True
        elif low in ("0", "false", "no", "off"):
            value = False
        else:
            raise ConfigError(f"{key}: expected a boolean, got {text!r}")
    else:
        value = text.strip()
    if spec.kind in ("int", "float"):
        if spec.lo is not None and value < spec.lo:
            raise ConfigError(f"{key}: {value!r} below minimum {spec.lo!r}")
        if spec.hi is not None and value > spec.hi:
            raise ConfigError(f"{key}: {value!r} above maximum {spec.hi!r}")
    if spec.kind == "choice" and value not in spec.choices:
        raise ConfigError(
            f"{key}: {value!r} is not one of {', '.join(spec.choices)}"
        )
    return value


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


class Config(Mapping):
    """Immutable typed view of the merged configuration."""

    def __init__(self, values: dict):
        unknown = set(values) - set(REGISTRY)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        merged = {k: spec.default for k, spec in REGISTRY.items()}
        merged.update(values)
        self._values = merged

    def __getitem__(self, key):
        return self._values[key]

    def __iter__(self):
        return iter(sorted(self._values))

    def __len__(self):
        return len(self._values)

    def lines(self) -> list:
        return [f"{k}={_format_value(self._values[k])}" for k in sorted(self._values)]

    def hash12(self) -> str:
        digest = hashlib.sha256("\n".join(self.lines()).encode()).hexdigest()
        return digest[:12]

    def replace(self, **kv) -> "Config":
        vals = dict(self._values)
        for k, v in kv.items():
            key = k.replace("__", ".")
            vals[key] = parse_value(key, v if isinstance(v, str) else v)
        return Config(vals)


def read_config_file(path) -> dict:
    """Parse `key = value` lines; '#' lines and blanks are skipped."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, text = line.partition("=")
            key = key.strip()
            out[key] = parse_value(key, text.strip())
    return out


def env_overrides(environ=None) -> dict:
    env = os.environ if environ is None else environ
    out = {}
    for key in REGISTRY:
        name = ENV_PREFIX + key.upper().replace(".", "_")
        if name in env:
            out[key] = parse_value(key, env[name])
    return out


def build_config(file_path=None, environ=None, overrides=()) -> Config:
    """Merge defaults < file < environment < explicit overrides."""
    values = {}
    if file_path:
        values.update(read_config_file(file_path))
    values.update(env_overrides(environ))
    for key, text in overrides:
        values[key] = parse_value(key, text)
    cfg = Config(values)
    validate(cfg)
    return cfg


def validate(cfg: Config) -> None:
    """Cross-key checks the per-key ranges cannot express."""
    if cfg["cal.snr_max_db"] < cfg["cal.snr_min_db"]:
        raise ConfigError("cal.snr_max_db must be >= cal.snr_min_db")
    selectors_from_config(cfg)
    sweep_speeds(cfg)
    sweep_users(cfg)


def selectors_from_config(cfg: Config) -> list:
    names = [s.strip() for s in cfg["selectors"].split(",") if s.strip()]
    if not names:
        raise ConfigError("selectors: at least one selector required")
    valid = {s.value: s for s in Selector}
    out = []
    for name in names:
        if name not in valid:
            raise ConfigError(
                f"selectors: unknown selector {name!r}; expected {', '.join(valid)}"
            )
        if valid[name] in out:
            raise ConfigError(f"selectors: duplicate selector {name!r}")
        out.append(valid[name])
    return out


def _parse_list(key: str, text: str, conv, lo, what: str) -> list:
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise ConfigError(f"{key}: empty list")
    out = []
    for item in items:
        try:
            v = conv(item)
        except ValueError:
            raise ConfigError(f"{key}: bad {what} {item!r}") from None
        if v < lo:
            raise ConfigError(f"{key}: {what} {item!r} below minimum {lo}")
        out.append(v)
    return out


def sweep_speeds(cfg: Config) -> list:
    return _parse_list("sweep.speeds", cfg["sweep.speeds"], float, 0.0, "speed")


def sweep_users(cfg: Config) -> list:
    return _parse_list("sweep.users", cfg["sweep.users"], int, 2, "count")


def slice_from_config(cfg: Config) -> SliceName:
    return SliceName(cfg["slice"])


def tables_from_config(cfg: Config) -> AhpTables:
    priorities = {
        sl: {c: float(cfg[f"slice.{sl.value}.priority.{c.value}"]) for c in CRITERIA}
        for sl in SliceName
    }
    level1 = {
        c: {o: float(cfg[f"level1.{c.value}.{o.value}"]) for o in OPTIONS}
        for c in CRITERIA
    }
    return AhpTables(priorities=priorities, level1=level1)


def rats_from_config(cfg: Config) -> dict:
    out = {}
    for rid in RatId:
        p = f"rat.{rid.value}."
        out[rid] = Rat(
            id=rid,
            carrier_ghz=cfg[p + "carrier_ghz"],
            bandwidth_hz=cfg[p + "bandwidth_hz"],
            scs_khz=cfg[p + "scs_khz"],
            tx_power_dbm=cfg[p + "tx_power_dbm"],
            noise_figure_db=cfg[p + "noise_figure_db"],
            max_modulation=_MODULATION_NAMES[cfg[p + "max_modulation"]],
            diversity_bonus_db=cfg[p + "diversity_bonus_db"],
        )
    return out


def mod_penalties_from_config(cfg: Config) -> dict:
    return {
        Modulation.QPSK: cfg["phy.penalty_qpsk_db"],
        Modulation.QAM16: cfg["phy.penalty_qam16_db"],
        Modulation.QAM64: cfg["phy.penalty_qam64_db"],
        Modulation.QAM256: cfg["phy.penalty_qam256_db"],
    }

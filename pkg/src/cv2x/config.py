"""Run configuration files.

A config is a flat list of dotted ``key = value`` lines (valid TOML) in
human units: per-km and per-km^2 densities, dB, dBm, MHz and Mbps. Parsing
converts everything to SI once; the rest of the package never sees human
units.
"""

from dataclasses import dataclass, field
import math
import sys

from .channel import NetworkParams, db_to_linear, dbm_to_watts
from .errors import ParameterError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

KM = 1000.0


class ConfigError(ParameterError):
    """Malformed or invalid configuration file."""


# key -> (type, default, unit hint)
SCHEMA = {
    "network.mu_l_per_km": (float, None, "road length per area, 1/km"),
    "network.lambda_1_per_km2": (float, None, "tier-1 density, 1/km^2"),
    "network.lambda_2_per_km": (float, None, "tier-2 density per road, 1/km"),
    "network.lambda_r_per_km": (float, 15.0, "receiver density per road, 1/km"),
    "network.alpha": (float, 4.0, "path-loss exponent, > 2"),
    "power.p1_dbm": (float, 40.0, "tier-1 transmit power, dBm"),
    "power.p2_dbm": (float, 23.0, "tier-2 transmit power, dBm"),
    "gain.g1_main_db": (float, 0.0, "tier-1 main-lobe gain, dB"),
    "gain.g2_main_db": (float, 0.0, "tier-2 main-lobe gain, dB"),
    "gain.front_to_side_1_db": (float, 20.0, "tier-1 main-to-side-lobe ratio, dB"),
    "gain.front_to_side_2_db": (float, 20.0, "tier-2 main-to-side-lobe ratio, dB"),
    "gain.q_c": (float, 0.05, "main-lobe alignment probability"),
    "bias.b1_db": (float, 0.0, "tier-1 selection bias, dB"),
    "bias.b2_db": (float, 0.0, "tier-2 selection bias, dB"),
    "fading.m1": (int, 1, "Nakagami m, tier 1"),
    "fading.m20": (int, 1, "Nakagami m, tier 2 on the receiver's road"),
    "fading.m21": (int, 1, "Nakagami m, other tier-2 nodes"),
    "shadowing.omega_1_db": (float, 0.0, "dB"),
    "shadowing.omega_20_db": (float, 0.0, "dB"),
    "shadowing.omega_21_db": (float, 0.0, "dB"),
    "shadowing.sigma_1_db": (float, 0.0, "dB"),
    "shadowing.sigma_20_db": (float, 0.0, "dB"),
    "shadowing.sigma_21_db": (float, 0.0, "dB"),
    "channel.bandwidth_mhz": (float, 10.0, "MHz"),
    "metric.beta_db": (float, 0.0, "SIR threshold when sweeping something else, dB"),
    "metric.target_mbps": (float, 10.0, "rate target when sweeping something else, Mbps"),
    "sweep.variable": (str, "metric.beta_db", "name of the swept key"),
    "sweep.values": (list, None, "grid for the swept key, in its own unit"),
    "run.mode": (str, "analytic", "analytic | montecarlo | validate"),
    "run.family": (str, "coverage", "result family checked by the validate command"),
    "run.output": (str, "", "CSV path (empty: command default)"),
    "run.seed": (int, 1, "master seed"),
    "run.n_trials": (int, 20000, "Monte-Carlo trials per sweep point"),
    "run.window_km": (float, 0.0, "simulation disc radius, km (0: automatic)"),
    "tol.abs": (float, 0.015, "validate-mode absolute tolerance"),
    "tol.quad": (float, 1e-8, "relative quadrature tolerance"),
    "tol.j_trunc": (float, 1e-9, "load PMF tail tolerance"),
}

MODES = ("analytic", "montecarlo", "validate")
FAMILIES = ("coverage", "rate", "assoc", "load")
SWEEPABLE = tuple(k for k, (t, _, _) in SCHEMA.items()
                  if t in (float, int) and k.split(".")[0] in
                  ("network", "power", "gain", "bias", "fading", "shadowing", "channel", "metric"))


def _flatten(tree, prefix=""):
    out = {}
    for k, v in tree.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _coerce(key, value):
    typ, _, unit = SCHEMA[key]
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number ({unit}), got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(f"{key} must be finite ({unit})")
        return value
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError(f"{key} must be an integer ({unit}), got {value!r}")
        return value
    if typ is str:
        if not isinstance(value, str):
            raise ConfigError(f"{key} must be a string ({unit}), got {value!r}")
        return value
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{key} must be a non-empty list ({unit})")
    for v in value:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigError(f"{key} entries must be finite numbers, got {v!r}")
    return [float(v) for v in value]


@dataclass(frozen=True)
class RunConfig:
    """Validated settings keyed by canonical dotted names (human units)."""

    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def with_values(self, **changes):
        """Copy with some keys replaced; keys use ``__`` in place of dots."""
        return from_mapping({**self.values, **{k.replace("__", "."): v for k, v in changes.items()}})

    def with_key(self, key, value):
        return from_mapping({**self.values, key: value})

    @property
    def mode(self):
        return self.values["run.mode"]

    @property
    def sweep_variable(self):
        return self.values["sweep.variable"]

    @property
    def sweep_values(self):
        return list(self.values["sweep.values"])

    @property
    def beta(self):
        return db_to_linear(self.values["metric.beta_db"])

    @property
    def target_rate(self):
        return self.values["metric.target_mbps"] * 1e6

    @property
    def window_m(self):
        return self.values["run.window_km"] * KM

    @property
    def params(self):
        v = self.values
        g1 = db_to_linear(v["gain.g1_main_db"])
        g2 = db_to_linear(v["gain.g2_main_db"])
        return NetworkParams(
            mu_l=v["network.mu_l_per_km"] / KM,
            lambda_1=v["network.lambda_1_per_km2"] / KM ** 2,
            lambda_2=v["network.lambda_2_per_km"] / KM,
            lambda_r=v["network.lambda_r_per_km"] / KM,
            alpha=v["network.alpha"],
            P1=dbm_to_watts(v["power.p1_dbm"]),
            P2=dbm_to_watts(v["power.p2_dbm"]),
            G1=g1, g1=g1 / db_to_linear(v["gain.front_to_side_1_db"]),
            G2=g2, g2=g2 / db_to_linear(v["gain.front_to_side_2_db"]),
            q_c=v["gain.q_c"],
            B1=db_to_linear(v["bias.b1_db"]), B2=db_to_linear(v["bias.b2_db"]),
            m1=v["fading.m1"], m20=v["fading.m20"], m21=v["fading.m21"],
            omega_1=v["shadowing.omega_1_db"], omega_20=v["shadowing.omega_20_db"],
            omega_21=v["shadowing.omega_21_db"],
            sigma_1=v["shadowing.sigma_1_db"], sigma_20=v["shadowing.sigma_20_db"],
            sigma_21=v["shadowing.sigma_21_db"],
            W=v["channel.bandwidth_mhz"] * 1e6,
        )

    def at(self, value):
        """Config with the swept key set to ``value``."""
        return self.with_key(self.sweep_variable, value)


def from_mapping(flat):
    unknown = sorted(set(flat) - set(SCHEMA))
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}")
    values = {}
    for key, (typ, default, unit) in SCHEMA.items():
        if key in flat:
            values[key] = _coerce(key, flat[key])
        elif default is None and key != "sweep.values":
            raise ConfigError(f"missing required key {key} ({unit})")
        else:
            values[key] = default
    if values["network.alpha"] <= 2:
        raise ConfigError("network.alpha must be > 2: the interference sum diverges otherwise")
    if values["run.mode"] not in MODES:
        raise ConfigError(f"run.mode must be one of {MODES}, got {values['run.mode']!r}")
    if values["run.family"] not in FAMILIES:
        raise ConfigError(f"run.family must be one of {FAMILIES}, got {values['run.family']!r}")
    if values["sweep.variable"] not in SWEEPABLE:
        raise ConfigError(f"sweep.variable must name a numeric model key, got {values['sweep.variable']!r}")
    if values["sweep.values"] is None:
        values["sweep.values"] = [values[values["sweep.variable"]]]
    if values["run.n_trials"] < 1:
        raise ConfigError("run.n_trials must be >= 1")
    if values["run.window_km"] < 0:
        raise ConfigError("run.window_km must be >= 0")
    if not 0 < values["tol.quad"] <= 1e-3:
        raise ConfigError("tol.quad must lie in (0, 1e-3]")
    if values["tol.abs"] < 0:
        raise ConfigError("tol.abs must be >= 0")
    cfg = RunConfig(values)
    try:
        cfg.params
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def parse_text(text):
    try:
        tree = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid key = value text: {exc}") from None
    return from_mapping(_flatten(tree))


def parse_config(path):
    try:
        with open(path, "rb") as fh:
            raw = fh.read().decode("utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_text(raw)


def _fmt(v):
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, list):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize(cfg):
    """Canonical text: every key in schema order, one per line."""
    return "".join(f"{k} = {_fmt(cfg.values[k])}\n" for k in SCHEMA)


def normalize(text):
    return serialize(parse_text(text))


def parse_override(item):
    """``key=value`` from the command line; the value is read as TOML."""
    if "=" not in item:
        raise ConfigError(f"override must look like key=value, got {item!r}")
    key, raw = item.split("=", 1)
    key = key.strip()
    try:
        value = tomllib.loads(f"v = {raw.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    return key, value

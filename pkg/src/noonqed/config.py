"""Line-oriented run configuration.

Grammar (one item per line, ``#`` starts a comment)::

    file     := { line }
    line     := blank | comment | header | pair
    header   := "[" name "]"
    pair     := key "=" value
    value    := number | pi-expr | word | list
    pi-expr  := [number "*"] "pi" ["/" number]
    list     := value { "," value } | "linspace(" number "," number "," integer ")"

Keys before the first header belong to ``[run]``.  Keys may appear once per
section.  Frequencies in ``[params]`` are in units of omega_a; the optional
``[physical]`` block takes frequencies f = omega/2pi in MHz and lifetimes in
microseconds, normalized with the mandatory ``omega_a_mhz`` reference.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import DecoherenceRates
from .model import SystemParams

EXPERIMENTS = ("scan_crossing", "coupling_vs_g", "shift_vs_g", "rabi", "decoherence_sweep",
               "protocol", "table1", "pathsum_report")

PARAM_KEYS = ("omega_a", "omega_b", "omega_eg", "omega_fg", "g_a", "g_b", "theta", "g_ab")
RATE_KEYS = tuple(DecoherenceRates.__dataclass_fields__)
PHYSICAL_FREQS = {f"{k}_mhz": k for k in ("omega_b", "omega_eg", "omega_fg", "g_a", "g_b", "g_ab")}
PHYSICAL_FREQS.update(rabi_eg_mhz="rabi_eg", rabi_fg_mhz="rabi_fg")
PHYSICAL_TIMES = {f"{k}_us": k for k in RATE_KEYS}
UNIT_SUFFIXES = ("_mhz", "_ghz", "_us", "_ns", "_hz")

SECTION_KEYS = {
    "run": {"experiment", "output", "cutoff_a", "cutoff_b", "label"},
    "params": set(PARAM_KEYS),
    "physical": {"omega_a_mhz", "theta", *PHYSICAL_FREQS, *PHYSICAL_TIMES},
    "decoherence": {"gamma", *RATE_KEYS},
    "sweep": {"spacing", "lo", "hi", "points", "pair", "resonance", "coupling", "values",
              "window"},
    "rabi": {"initial", "targets", "t_final", "samples", "noon", "resonance", "backend"},
    "grid": {"gammas"},
    "protocol": {"targets", "g_ab_ratios", "shifts", "pulse_mode", "rabi_eg", "rabi_fg",
                 "force_unmatched", "park_offset", "cutoff_margin"},
}


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        where = "".join([f"line {line}: " if line else "", f"{key}: " if key else ""])
        super().__init__(where + message)
        self.line, self.key = line, key


_PI = re.compile(r"^(?:(?P<num>[-+0-9.eE]+)\s*\*\s*)?(?P<sign>-)?pi(?:\s*/\s*(?P<den>[-+0-9.eE]+))?$")


def parse_scalar(text: str):
    text = text.strip()
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    m = _PI.match(low)
    if m:
        value = math.pi * float(m["num"] or 1.0) / float(m["den"] or 1.0)
        return -value if m["sign"] else value
    return text


def parse_value(text: str):
    text = text.strip()
    m = re.match(r"^linspace\(\s*([^,]+),([^,]+),([^,]+)\)$", text)
    if m:
        lo, hi, n = (parse_scalar(x) for x in m.groups())
        if not isinstance(n, int) or isinstance(n, bool):
            raise ValueError("linspace count must be an integer")
        return [float(x) for x in np.linspace(lo, hi, n)]
    if "," in text:
        return [parse_scalar(x) for x in text.split(",")]
    return parse_scalar(text)


def parse_text(text: str) -> dict[str, dict]:
    sections: dict[str, dict] = {"run": {}}
    current = "run"
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError("unterminated section header", lineno)
            current = line[1:-1].strip().lower()
            if current not in SECTION_KEYS:
                raise ConfigError(f"unknown section [{current}]", lineno)
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", lineno)
        key, value = (x.strip() for x in line.split("=", 1))
        key = key.lower()
        if current == "params" and key.endswith(UNIT_SUFFIXES):
            raise ConfigError("unit-bearing keys belong in [physical]", lineno, key)
        if key not in SECTION_KEYS[current]:
            raise ConfigError(f"unknown key in [{current}]", lineno, key)
        if key in sections[current]:
            raise ConfigError("duplicate key", lineno, key)
        try:
            sections[current][key] = parse_value(value)
        except ValueError as exc:
            raise ConfigError(str(exc), lineno, key) from None
    return sections


# --- physical units -------------------------------------------------------

def to_dimensionless(physical: dict) -> tuple[dict, dict]:
    """Split a [physical] block into dimensionless params and rates/extras."""
    if "omega_a_mhz" not in physical:
        raise ConfigError("the [physical] block needs the omega_a_mhz reference", key="omega_a_mhz")
    f_a = float(physical["omega_a_mhz"])
    if f_a <= 0:
        raise ConfigError("omega_a_mhz must be positive", key="omega_a_mhz")
    params, extra = {"omega_a": 1.0}, {}
    for key, value in physical.items():
        if key in PHYSICAL_FREQS:
            target = PHYSICAL_FREQS[key]
            (extra if target.startswith("rabi") else params)[target] = value / f_a
        elif key in PHYSICAL_TIMES:
            # lifetime in us -> rate in units of omega_a = 2 pi f_a
            extra[PHYSICAL_TIMES[key]] = 1.0 / (value * 1e-6 * 2 * math.pi * f_a * 1e6)
        elif key == "theta":
            params["theta"] = value
    return params, extra


def to_physical(params: dict, rates: dict, f_a_mhz: float) -> dict:
    out = {"omega_a_mhz": f_a_mhz}
    for key, target in PHYSICAL_FREQS.items():
        source = rates if target.startswith("rabi") else params
        if target in source:
            out[key] = source[target] * f_a_mhz
    for key, target in PHYSICAL_TIMES.items():
        if target in rates:
            out[key] = 1.0 / (rates[target] * 2 * math.pi * f_a_mhz * 1e6) * 1e6
    if "theta" in params:
        out["theta"] = params["theta"]
    return out


# --- resolved configuration -----------------------------------------------

@dataclass
class RunConfig:
    experiment: str
    output: Path
    params: dict  # SystemParams fields; g_b / spacings may be symbolic
    rates: DecoherenceRates | None
    sections: dict[str, dict]
    cutoffs: tuple[int, int] | None = None
    label: str = ""
    extras: dict = field(default_factory=dict)

    def system(self, **overrides) -> SystemParams:
        values = {k: v for k, v in self.params.items() if not isinstance(v, str)}
        values.update(overrides)
        return SystemParams(**values)

    def section(self, name: str) -> dict:
        return self.sections.get(name, {})


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return build_config(parse_text(text), base=path.parent)


def build_config(sections: dict[str, dict], base: Path = Path(".")) -> RunConfig:
    run = sections.get("run", {})
    experiment = run.get("experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {', '.join(EXPERIMENTS)}", key="experiment")
    params = dict(sections.get("params", {}))
    extras = {}
    if "physical" in sections:
        phys_params, extras = to_dimensionless(sections["physical"])
        clash = set(phys_params) & set(params) - {"omega_a"}
        if clash:
            raise ConfigError(f"given in both [params] and [physical]: {', '.join(sorted(clash))}")
        if params.get("omega_a", 1.0) != 1.0:
            raise ConfigError("omega_a is the unit when [physical] is used", key="omega_a")
        params.update(phys_params)
    for required in ("omega_b", "g_a"):
        if required not in params:
            raise ConfigError("missing required parameter", key=required)
    for key, value in params.items():
        if isinstance(value, str):
            ok = (key == "g_b" and value == "matched") or (
                key in ("omega_eg", "omega_fg") and value == "resonant")
            if not ok:
                raise ConfigError(f"invalid value {value!r}", key=key)
        elif not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError("expected a number", key=key)
    params.setdefault("omega_a", 1.0)
    try:
        SystemParams(**{k: v for k, v in params.items() if not isinstance(v, str)})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None

    rate_values = {k: v for k, v in extras.items() if k in RATE_KEYS}
    dec = sections.get("decoherence", {})
    if "gamma" in dec:
        if len(dec) > 1:
            raise ConfigError("gamma sets every rate; do not combine it with single rates",
                              key="gamma")
        rate_values = dict.fromkeys(RATE_KEYS, float(dec["gamma"]))
    elif dec:
        if rate_values:
            raise ConfigError("rates given in both [decoherence] and [physical]")
        rate_values = {k: float(v) for k, v in dec.items()}
    try:
        rates = DecoherenceRates(**rate_values) if rate_values else None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    cutoffs = None
    if "cutoff_a" in run or "cutoff_b" in run:
        cutoffs = (int(run.get("cutoff_a", run.get("cutoff_b"))),
                   int(run.get("cutoff_b", run.get("cutoff_a"))))
        if min(cutoffs) < 0:
            raise ConfigError("cutoffs must be non-negative", key="cutoff_a")
    output = Path(str(run.get("output", "results")))
    if not output.is_absolute():
        output = base / output
    return RunConfig(experiment, output, params, rates, sections, cutoffs,
                     str(run.get("label", "")), {k: v for k, v in extras.items()
                                                 if k not in RATE_KEYS})


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ", ".join(format_value(v) for v in value)
    return str(value)


def dump_sections(sections: dict[str, dict]) -> str:
    lines = []
    for name, items in sections.items():
        lines.append(f"[{name}]")
        lines += [f"{k} = {format_value(v)}" for k, v in items.items()]
        lines.append("")
    return "\n".join(lines)

"""Run configuration: a flat ``[section]`` / ``key = value`` text format.

Grammar
-------
* ``#`` starts a comment (outside quotes); blank lines are ignored.
* ``[name]`` opens a section; ``key = value`` sets a key in it.
* Before the first section header a dotted key ``section.key = value`` may
  be used instead, e.g. ``loop1.kp = 400``.
* Values are Python literals (numbers, lists, ``True``/``False``, ``None``,
  quoted strings); anything else is taken as a bare string, so
  ``mode = sequential`` and ``enabled = true`` work.
* Per-joint vectors accept a scalar (broadcast to all 7 joints) or a list of 7.
* Every omitted key takes its default (nominal subject, gains and rates).
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass
from types import MappingProxyType

import numpy as np

from .analysis import SWEEP_HEIGHTS_IN, SWEEP_WEIGHTS_LB, SweepGrid
from .anthropometry import NOMINAL_SEGMENTS, SegmentSet, SubjectProfile, segment_parameters, to_si
from .control import GainSet, routh_hurwitz_stable
from .friction import FrictionParams
from .model import N_JOINTS, RobotModel, build_robot_model
from .simulation import SimConfig
from .trajectory import DEFAULT_AMPLITUDES_DEG, TrajectorySpec


class ConfigError(ValueError):
    """Configuration problem, optionally tied to a line of the input."""

    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        where = f"line {line}: " if line is not None else ""
        what = f"{key}: " if key else ""
        super().__init__(f"{where}{what}{message}")
        self.line = line
        self.key = key


class ConfigSyntaxError(ConfigError):
    pass


class UnknownKeyError(ConfigError):
    pass


class ConfigTypeError(ConfigError):
    pass


class RomViolationError(ConfigError):
    pass


class UnstableGainsConfigError(ConfigError):
    pass


# key -> (kind, default). Kinds are handled by _coerce.
SCHEMA = {
    "subject": {
        "height_in": ("pos", 67.0),
        "weight_lb": ("pos", 163.0),
    },
    "model": {
        "segments": (("choice", ("nominal", "contini")), "nominal"),
        "gravity": ("opt_vec3", None),
        "u_ref": ("float", 0.0),
    },
    "loop1": {
        "kp": ("vec7", (500.0,) * N_JOINTS),
        "kv": ("vec7", (7500.0,) * N_JOINTS),
    },
    "loop2": {
        "kp": ("vec7", (1e4,) * N_JOINTS),
        "ki": ("vec7", (250.0,) * N_JOINTS),
        "kv": ("vec7", (55e3, 50e3, 5500.0, 300.0, 5500.0, 5500.0, 5500.0)),
    },
    "control": {
        "integral_clamp": ("pos", 10.0),
        "friction_feedforward": ("bool", True),
    },
    "friction": {
        "enabled": ("bool", True),
        "omega_brk": ("pos", 0.01),
        "viscous": ("nonneg", 0.1),
        "T_C": ("opt_vec7", None),
        "T_brk": ("opt_vec7", None),
    },
    "trajectory": {
        "mode": (("choice", ("sequential", "simultaneous")), "sequential"),
        "amplitudes_deg": ("vec7", tuple(DEFAULT_AMPLITUDES_DEG)),
        "motion_time": ("vec7", (1.5,) * N_JOINTS),
        "dwell": ("nonneg", 0.5),
        "total_duration": ("opt_pos", None),
        "return_home": ("bool", True),
    },
    "simulation": {
        "scheme": (("choice", ("ctc", "mrctc", "rmrctc")), "rmrctc"),
        "schedule": (("choice", ("zoh", "continuous")), "continuous"),
        "slow_hz": ("pos_int", 100),
        "fast_hz": ("pos_int", 1000),
        "substeps": ("pos_int", 10),
    },
    "sweep": {
        "weights": ("poslist", SWEEP_WEIGHTS_LB),
        "heights": ("poslist", SWEEP_HEIGHTS_IN),
        "mapping": (("choice", ("scaled", "contini")), "scaled"),
        "bin_width": ("pos", 0.05),
        "workers": ("pos_int", 1),
    },
    "friction_curve": {
        "T_peak": ("nonneg", 100.0),
        "omega_brk": ("pos", 0.01),
        "f": ("nonneg", 5.0),
        "omega_max": ("pos", 100.0),
        "points": ("pos_int", 2001),
    },
    "output": {
        "dir": ("str", "out"),
    },
}

_TRUE = {"true", "yes", "on"}
_FALSE = {"false", "no", "off"}


def _literal(text: str):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _num(v) -> float:
    if not _is_num(v) or not math.isfinite(v):
        raise TypeError(f"expected a finite number, got {v!r}")
    return float(v)


def _coerce(kind, v):
    """Normalize ``v`` to the canonical value for ``kind``; raise TypeError/ValueError."""
    if isinstance(kind, tuple) and kind[0] == "choice":
        if not isinstance(v, str) or v not in kind[1]:
            raise ValueError(f"expected one of {', '.join(kind[1])}, got {v!r}")
        return v
    if kind.startswith("opt_"):
        return None if v is None else _coerce(kind[4:], v)
    if kind == "float":
        return _num(v)
    if kind == "pos":
        x = _num(v)
        if x <= 0:
            raise ValueError(f"must be positive, got {v!r}")
        return x
    if kind == "nonneg":
        x = _num(v)
        if x < 0:
            raise ValueError(f"must be non-negative, got {v!r}")
        return x
    if kind == "pos_int":
        if isinstance(v, bool) or not isinstance(v, int):
            raise TypeError(f"expected an integer, got {v!r}")
        if v <= 0:
            raise ValueError(f"must be positive, got {v!r}")
        return int(v)
    if kind == "bool":
        if isinstance(v, bool):
            return v
        if isinstance(v, str) and v.lower() in _TRUE | _FALSE:
            return v.lower() in _TRUE
        raise TypeError(f"expected a boolean, got {v!r}")
    if kind == "str":
        if not isinstance(v, str) or not v:
            raise TypeError(f"expected a non-empty string, got {v!r}")
        return v
    if kind in ("vec7", "vec3"):
        n = 7 if kind == "vec7" else 3
        if _is_num(v) and kind == "vec7":
            v = [v] * n
        if not isinstance(v, (list, tuple)) or len(v) != n:
            raise TypeError(f"expected a number or a list of {n} numbers, got {v!r}")
        return tuple(_num(x) for x in v)
    if kind == "poslist":
        if _is_num(v):
            v = [v]
        if not isinstance(v, (list, tuple)) or not v:
            raise TypeError(f"expected a non-empty list of numbers, got {v!r}")
        out = tuple(_num(x) for x in v)
        if any(x <= 0 for x in out):
            raise ValueError("all entries must be positive")
        return out
    raise AssertionError(f"unhandled kind {kind}")


def _strip_comment(line: str) -> str:
    quote = None
    for i, ch in enumerate(line):
        if quote:
            if ch == quote:
                quote = None
        elif ch in "'\"":
            quote = ch
        elif ch == "#":
            return line[:i]
    return line


def _defaults() -> dict:
    return {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()}


@dataclass(frozen=True, eq=False)
class Config:
    """Fully resolved settings, one canonical value per schema key."""

    settings: MappingProxyType
    lines: MappingProxyType = MappingProxyType({})   # (section, key) -> source line

    def __eq__(self, other):
        if not isinstance(other, Config):
            return NotImplemented
        return {s: dict(v) for s, v in self.settings.items()} == {s: dict(v) for s, v in other.settings.items()}

    def __getitem__(self, section: str):
        return self.settings[section]

    def get(self, section: str, key: str):
        return self.settings[section][key]

    def with_values(self, **overrides) -> "Config":
        """Copy with ``section__key=value`` overrides, re-validated."""
        data = {s: dict(v) for s, v in self.settings.items()}
        for name, value in overrides.items():
            section, key = name.split("__", 1)
            if section not in SCHEMA or key not in SCHEMA[section]:
                raise UnknownKeyError("unknown key", key=f"{section}.{key}")
            try:
                data[section][key] = _coerce(SCHEMA[section][key][0], value)
            except (TypeError, ValueError) as exc:
                raise ConfigTypeError(str(exc), key=f"{section}.{key}") from exc
        return _validated(data, dict(self.lines))

    # -- derived objects ---------------------------------------------------
    @property
    def subject(self) -> SubjectProfile:
        s = self.settings["subject"]
        return SubjectProfile(height_in=s["height_in"], weight_lb=s["weight_lb"])

    def segments(self) -> SegmentSet:
        if self.get("model", "segments") == "contini":
            return to_si(segment_parameters(self.subject))
        return NOMINAL_SEGMENTS

    def model(self) -> RobotModel:
        m = self.settings["model"]
        return build_robot_model(self.segments(), gravity=m["gravity"], u_ref=m["u_ref"])

    @property
    def gains(self) -> GainSet:
        l1, l2 = self.settings["loop1"], self.settings["loop2"]
        return GainSet(l1["kp"], l1["kv"], l2["kp"], l2["ki"], l2["kv"])

    def friction_params(self) -> tuple | None:
        f = self.settings["friction"]
        if f["T_C"] is None and f["T_brk"] is None:
            return None
        return tuple(FrictionParams(tc, tb, f["omega_brk"], f["viscous"])
                     for tc, tb in zip(f["T_C"], f["T_brk"]))

    @property
    def trajectory_spec(self) -> TrajectorySpec:
        t = self.settings["trajectory"]
        return TrajectorySpec(mode=t["mode"], amplitudes=tuple(np.radians(t["amplitudes_deg"])),
                              motion_time=t["motion_time"], dwell=t["dwell"],
                              total_duration=t["total_duration"], return_home=t["return_home"])

    def sim_config(self, model: RobotModel | None = None) -> SimConfig:
        model = self.model() if model is None else model
        s, f, c = self.settings["simulation"], self.settings["friction"], self.settings["control"]
        return SimConfig(plant=model, reference=model, gains=self.gains, scheme=s["scheme"],
                         schedule=s["schedule"], slow_hz=s["slow_hz"], fast_hz=s["fast_hz"],
                         substeps=s["substeps"], friction_enabled=f["enabled"],
                         friction=self.friction_params(), omega_brk=f["omega_brk"], viscous=f["viscous"],
                         friction_feedforward=c["friction_feedforward"],
                         integral_clamp=c["integral_clamp"])

    def sweep_grid(self) -> SweepGrid:
        s = self.settings["sweep"]
        return SweepGrid(weights=s["weights"], heights=s["heights"], nominal=self.subject,
                         mapping=s["mapping"], bin_width=s["bin_width"], base=self.segments())

    def as_dict(self) -> dict:
        return {s: dict(v) for s, v in self.settings.items()}


def _check(fn, exc_type, lines, keys):
    try:
        return fn()
    except (ValueError, ArithmeticError) as exc:
        line, key = None, None
        for k in keys:
            if k in lines:
                line, key = lines[k], ".".join(k)
                break
        if key is None and keys:
            key = ".".join(keys[0])
        raise exc_type(str(exc), line=line, key=key) from exc


def _validated(data: dict, lines: dict) -> Config:
    """Cross-field validation: every module precondition is checked here."""
    cfg = Config(MappingProxyType({s: MappingProxyType(v) for s, v in data.items()}),
                 MappingProxyType(dict(lines)))

    # gains: locate the offending key for the error line
    verdict = routh_hurwitz_stable(cfg.gains)
    if not verdict.stable:
        bad = []
        if not all(verdict.loop1):
            bad += [("loop1", k) for k in ("kp", "kv") if min(data["loop1"][k]) <= 0]
        if not all(verdict.loop2):
            bad += [("loop2", k) for k in ("kp", "ki", "kv") if min(data["loop2"][k]) <= 0]
        bad.sort(key=lambda k: lines.get(k, 1 << 30))
        k = bad[0] if bad else ("loop1", "kp")
        raise UnstableGainsConfigError(verdict.describe(), line=lines.get(k), key=".".join(k))

    _check(lambda: cfg.trajectory_spec, RomViolationError, lines,
           [("trajectory", "amplitudes_deg"), ("trajectory", "motion_time"), ("trajectory", "total_duration"),
            ("trajectory", "mode")])
    f = data["friction"]
    if (f["T_C"] is None) != (f["T_brk"] is None):
        k = ("friction", "T_C") if f["T_C"] is not None else ("friction", "T_brk")
        raise ConfigTypeError("T_C and T_brk must be given together", line=lines.get(k), key=".".join(k))
    _check(cfg.friction_params, ConfigTypeError, lines, [("friction", "T_C"), ("friction", "T_brk")])
    _check(cfg.model, ConfigTypeError, lines,
           [("model", "gravity"), ("model", "segments"), ("subject", "height_in"), ("subject", "weight_lb")])
    _check(lambda: cfg.sim_config(), ConfigTypeError, lines,
           [("simulation", "fast_hz"), ("simulation", "slow_hz")])
    _check(cfg.sweep_grid, ConfigTypeError, lines, [("sweep", "weights"), ("sweep", "heights")])
    return cfg


def parse_config(text: str) -> Config:
    """Parse and validate configuration text; omitted keys take their defaults."""
    data = _defaults()
    lines: dict = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigSyntaxError("unterminated section header", line=lineno)
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise UnknownKeyError("unknown section", line=lineno, key=f"[{section}]")
            continue
        if "=" not in line:
            raise ConfigSyntaxError(f"expected 'key = value', got {line!r}", line=lineno)
        key, value = (p.strip() for p in line.split("=", 1))
        if section is None:
            if "." not in key:
                raise ConfigSyntaxError("keys outside a section must be dotted (section.key)",
                                        line=lineno, key=key)
            sec, key = key.split(".", 1)
        else:
            sec = section
        name = f"{sec}.{key}"
        if sec not in SCHEMA or key not in SCHEMA[sec]:
            raise UnknownKeyError("unknown key", line=lineno, key=name)
        if (sec, key) in lines:
            raise ConfigSyntaxError(f"duplicate key (first set on line {lines[(sec, key)]})",
                                    line=lineno, key=name)
        if not value:
            raise ConfigSyntaxError("missing value", line=lineno, key=name)
        try:
            data[sec][key] = _coerce(SCHEMA[sec][key][0], _literal(value))
        except (TypeError, ValueError) as exc:
            raise ConfigTypeError(str(exc), line=lineno, key=name) from exc
        lines[(sec, key)] = lineno
    return _validated(data, lines)


def _emit_value(v) -> str:
    if isinstance(v, tuple):
        return "[" + ", ".join(repr(x) for x in v) + "]"
    return repr(v)


def emit(cfg: Config) -> str:
    """Serialize every setting; ``parse_config(emit(c)) == c``."""
    out = []
    for section, keys in SCHEMA.items():
        out.append(f"[{section}]")
        for key in keys:
            out.append(f"{key} = {_emit_value(cfg.get(section, key))}")
        out.append("")
    return "\n".join(out)


def default_config() -> Config:
    return parse_config("")


__all__ = [
    "Config", "ConfigError", "ConfigSyntaxError", "ConfigTypeError", "RomViolationError", "SCHEMA",
    "UnknownKeyError", "UnstableGainsConfigError", "default_config", "emit", "parse_config",
]

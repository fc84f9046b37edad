"""INI run configuration.

One section per module.  Frequencies are linear (Hz); ``RunConfig.params()``
converts to angular units.  Times are dimensionless (units of 1/gamma_s).
"""

from __future__ import annotations

import configparser
import hashlib
import math
import re
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import ConfigError
from .model import TWO_PI, PhysicalParams, derived_rates

AUTO = "auto"


def _float(s):
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _int(s):
    v = float(s)
    if not v.is_integer():
        raise ValueError("must be an integer")
    return int(v)


def _positive_int(s):
    v = _int(s)
    if v < 1:
        raise ValueError("must be >= 1")
    return v


def _auto_or(parse):
    def inner(s):
        return AUTO if s.strip().lower() == AUTO else parse(s)
    return inner


def _choice(*options):
    def inner(s):
        s = s.strip().lower()
        if s not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return s
    return inner


def _list(parse):
    def inner(s):
        items = [x for x in re.split(r"[,\s]+", s.strip()) if x]
        return tuple(parse(x) for x in items)
    return inner


def _text(s):
    return s.strip()


def _fmt(v):
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def opt(default, parse, required=False):
    return field(default=default, metadata={"parse": parse, "required": required})


@dataclass(frozen=True)
class ModelSection:
    omega_c_hz: float = opt(None, _float, True)
    omega_s_hz: float = opt(None, _float, True)
    rabi_hz: float = opt(None, _float, True)
    g_hz: float = opt(None, _float, True)
    kappa_hz: float = opt(None, _float, True)
    n_spins: int = opt(None, _positive_int, True)
    nbar: float | None = opt(None, _float)
    temperature_k: float | None = opt(None, _float)
    j_subspace: float | None = opt(None, _float)


@dataclass(frozen=True)
class MarkovSection:
    method: str = opt("auto", _choice("auto", "uniformization", "krylov"))
    max_dim: int = opt(2_000_001, _positive_int)
    tol: float = opt(1e-13, _float)


@dataclass(frozen=True)
class LindbladSection:
    n_max: object = opt(AUTO, _auto_or(_positive_int))
    method: str = opt("auto", _choice("auto", "sector", "expm_multiply", "ode"))
    leakage_threshold: float = opt(1e-6, _float)


@dataclass(frozen=True)
class AnalysisSection:
    engine: str = opt("markov", _choice("markov", "full", "both"))
    t_start: float = opt(0.0, _float)
    t_stop: object = opt(AUTO, _auto_or(_float))
    t_count: int = opt(400, _positive_int)
    t_spacing: str = opt("linear", _choice("linear", "log"))
    n_list: tuple = opt((), _list(_positive_int))
    nbar_grid: tuple = opt((), _list(_float))
    kappa_ratios: tuple = opt((0.5, 1.0, 5.0, 10.0), _list(_float))
    window_level: float = opt(0.99, _float)
    noise_floor: float = opt(1e-3, _float)


@dataclass(frozen=True)
class OutputSection:
    out_dir: str | None = opt(None, _text)


SECTIONS = {
    "model": ModelSection,
    "markov_engine": MarkovSection,
    "lindblad_engine": LindbladSection,
    "analysis": AnalysisSection,
    "cli_io": OutputSection,
}


@dataclass(frozen=True)
class RunConfig:
    model: ModelSection
    markov_engine: MarkovSection = field(default_factory=MarkovSection)
    lindblad_engine: LindbladSection = field(default_factory=LindbladSection)
    analysis: AnalysisSection = field(default_factory=AnalysisSection)
    cli_io: OutputSection = field(default_factory=OutputSection)

    def params(self) -> PhysicalParams:
        m = self.model
        return PhysicalParams.from_linear(
            m.omega_c_hz, m.omega_s_hz, m.rabi_hz, m.g_hz, m.kappa_hz,
            nbar=m.nbar, temperature=m.temperature_k,
            n_spins=m.n_spins, j_subspace=m.j_subspace,
        )

    def n_max(self, n_spins=None):
        v = self.lindblad_engine.n_max
        return max(n_spins if n_spins is not None else self.model.n_spins, 1) if v == AUTO else v

    def times(self):
        """Explicit grid, or None when ``t_stop = auto``."""
        a = self.analysis
        if a.t_stop == AUTO:
            return None
        if a.t_spacing == "log":
            return np.geomspace(a.t_start, a.t_stop, a.t_count)
        return np.linspace(a.t_start, a.t_stop, a.t_count)

    def to_ini(self) -> str:
        lines = []
        for name in SECTIONS:
            lines.append(f"[{name}]")
            section = getattr(self, name)
            for f in fields(section):
                v = getattr(section, f.name)
                if v is None:
                    continue
                lines.append(f"{f.name} = {_fmt(v)}")
            lines.append("")
        return "\n".join(lines)

    def sha256(self):
        return hashlib.sha256(self.to_ini().encode()).hexdigest()

    def echo(self):
        """Config as a dict with linear and angular frequencies side by side."""
        out = {}
        for name in SECTIONS:
            section = getattr(self, name)
            out[name] = {f.name: getattr(section, f.name) for f in fields(section)}
        m = out["model"]
        for key in ("omega_c", "omega_s", "rabi", "g", "kappa"):
            m[key + "_rad_s"] = TWO_PI * m[key + "_hz"]
        p = self.params()
        m["nbar_effective"] = p.nbar
        m["j_effective"] = p.j_subspace
        m["gamma_s_per_s"] = derived_rates(p).gamma_s
        return out


def _line_numbers(text):
    """Map (section, key) and section headers to 1-based line numbers."""
    where = {}
    section = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            where.setdefault((section, None), i)
            continue
        m = re.match(r"([^=:]+)[=:]", s)
        if m and section is not None:
            where.setdefault((section, m.group(1).strip().lower()), i)
    return where


def parse_override(item):
    if "=" not in item:
        raise ConfigError(f"override {item!r}: expected section.key=value")
    lhs, value = item.split("=", 1)
    if "." not in lhs:
        raise ConfigError(f"override {item!r}: expected section.key=value")
    section, key = lhs.strip().split(".", 1)
    return section.strip(), key.strip().lower(), value.strip()


def loads(text, overrides=(), source="<config>") -> RunConfig:
    """Parse INI text; every problem found is reported in one ConfigError."""
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    where = _line_numbers(text)
    origin = {}
    for item in overrides:
        section, key, value = parse_override(item)
        if section not in SECTIONS:
            raise ConfigError(f"override {item!r}: unknown section [{section}]")
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, key, value)
        origin[(section, key)] = f"override {item!r}"

    def loc(section, key=None):
        if (section, key) in origin:
            return origin[(section, key)]
        line = where.get((section, key))
        return f"{source}:{line}" if line else source

    problems = []
    for section in cp.sections():
        if section not in SECTIONS:
            problems.append(f"{loc(section)}: unknown section [{section}]")
    built = {}
    for name, cls in SECTIONS.items():
        present = cp[name] if cp.has_section(name) else {}
        known = {f.name: f for f in fields(cls)}
        for key in present:
            if key not in known:
                problems.append(f"{loc(name, key)}: unknown key '{key}' in [{name}]")
        values = {}
        for key, f in known.items():
            if key in present:
                raw = present[key]
                try:
                    values[key] = f.metadata["parse"](raw)
                except (ValueError, TypeError) as exc:
                    problems.append(f"{loc(name, key)}: [{name}] {key} = {raw!r}: {exc}")
            elif f.metadata["required"]:
                problems.append(f"{loc(name)}: missing required key '{key}' in [{name}]")
        built[name] = values
    if problems:
        raise ConfigError("\n".join(problems))
    sections = {name: SECTIONS[name](**vals) for name, vals in built.items()}
    cfg = RunConfig(**sections)
    validate(cfg, loc)
    return cfg


def validate(cfg: RunConfig, loc=lambda s, k=None: "<config>"):
    m = cfg.model
    if m.nbar is not None and m.temperature_k is not None:
        raise ConfigError(f"{loc('model', 'temperature_k')}: give nbar or temperature_k, not both")
    a = cfg.analysis
    if a.t_spacing == "log" and not a.t_start > 0:
        raise ConfigError(f"{loc('analysis', 't_start')}: log spacing needs t_start > 0")
    if a.t_stop != AUTO and not a.t_stop > a.t_start:
        raise ConfigError(f"{loc('analysis', 't_stop')}: t_stop must exceed t_start")
    if a.t_stop != AUTO and a.t_count < 2:
        raise ConfigError(f"{loc('analysis', 't_count')}: need at least 2 time points")
    if any(x < 0 for x in a.nbar_grid):
        raise ConfigError(f"{loc('analysis', 'nbar_grid')}: nbar values must be >= 0")
    if any(x <= 0 for x in a.kappa_ratios):
        raise ConfigError(f"{loc('analysis', 'kappa_ratios')}: ratios must be > 0")
    try:
        cfg.params()
    except ValueError as exc:
        raise ConfigError(f"{loc('model')}: {exc}") from exc


def load(path, overrides=()) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return loads(text, overrides, source=str(path))


def with_overrides(cfg: RunConfig, overrides) -> RunConfig:
    return loads(cfg.to_ini(), overrides) if overrides else replace(cfg)

"""Scenario configuration: sectioned key-value files with line-referenced errors.

Example::

    [model]
    d = 5
    alpha = 2.0
    beta = 0.5
    V = 1.0

    [domain]
    L = 8
    torus = true

    [schedule]
    T = 20, 50
    tau_w = auto
    h = 1.0
    replicas = 10
    grid = 64

    [test_functions]
    phi0 = gaussian width=1.0
    phi1 = bump width=1.5 amplitude=2

    [limit]
    mode = eta
    times = 0, 0.25, 0.5, 0.75, 1
    z = 0.5, 1, 2
    samples = 200
    level = 0

    [outputs]
    directory = out
    formats = csv, json

    [run]
    seed = 12345
    workers = 1
"""

from __future__ import annotations

import configparser
import hashlib
import io
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, OccFluctError

__all__ = ["ConfigError", "ScenarioConfig", "TestFunctionSpec", "load_config", "loads_config", "dumps_config"]


class ConfigError(OccFluctError, ValueError):
    """Invalid configuration; the message carries ``path:line``."""


_SCHEMA = {
    "model": {"d": int, "alpha": float, "beta": float, "V": float},
    "domain": {"L": float, "torus": bool},
    "schedule": {"T": "floats", "tau_w": "auto_float", "h": float, "replicas": int, "grid": int},
    "test_functions": None,   # free names
    "limit": {"mode": str, "times": "floats", "z": "floats", "samples": int, "level": int},
    "outputs": {"directory": str, "formats": "strs"},
    "run": {"seed": int, "workers": int, "max_particles": int},
}
_REQUIRED = {"model": ("d", "alpha", "beta", "V")}
_MODES = ("eta", "eta1", "eta2", "xi", "sdsm")
_KINDS = ("gaussian", "bump")


@dataclass(frozen=True)
class TestFunctionSpec:
    name: str
    kind: str
    width: float
    amplitude: float = 1.0
    center: tuple | None = None

    def build(self, dim: int, side: float):
        from .testfunctions import GaussianBump, SmoothBump

        center = np.asarray(self.center if self.center is not None else [side / 2] * dim, float)
        if center.size != dim:
            raise DomainError(f"{self.name}: center has {center.size} coordinates, expected {dim}")
        cls = GaussianBump if self.kind == "gaussian" else SmoothBump
        return cls(center, self.width, self.amplitude)

    def dumps(self) -> str:
        out = f"{self.kind} width={self.width!r} amplitude={self.amplitude!r}"
        if self.center is not None:
            out += " center=" + ",".join(repr(float(c)) for c in self.center)
        return out


@dataclass(frozen=True)
class ScenarioConfig:
    d: int
    alpha: float
    beta: float
    V: float
    L: float = 8.0
    torus: bool = True
    T: tuple = (20.0,)
    tau_w: float | None = None       # None = default L^alpha / 4
    h: float = 1.0
    replicas: int = 10
    grid: int = 64
    test_functions: tuple = (TestFunctionSpec("phi0", "gaussian", 1.0),)
    mode: str = "eta"
    times: tuple = (0.0, 0.25, 0.5, 0.75, 1.0)
    z: tuple = (0.5, 1.0, 2.0)
    samples: int = 200
    level: int = 0
    directory: str = "out"
    formats: tuple = ("csv", "json")
    seed: int = 12345
    workers: int = 1
    max_particles: int = 20_000_000
    source: str = field(default="<string>", compare=False)

    @property
    def config_hash(self) -> str:
        """sha256 of the canonical text without [outputs] and workers, neither of which changes results."""
        return hashlib.sha256(dumps_config(self, outputs=False).encode()).hexdigest()

    def with_overrides(self, **kw) -> "ScenarioConfig":
        vals = {k: getattr(self, k) for k in self.__dataclass_fields__}
        vals.update({k: v for k, v in kw.items() if v is not None})
        new = ScenarioConfig(**vals)
        _validate(new, lambda section, key=None: "command line")
        return new


def _key_lines(text: str) -> dict:
    """(section, key) -> line number, plus section -> line number."""
    lines, section = {}, None
    for no, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if not s or s[0] in "#;":
            continue
        m = re.match(r"\[(.+)\]$", s)
        if m:
            section = m.group(1).strip()
            lines[(section, None)] = no
            continue
        m = re.match(r"([^=:]+)[=:]", s)
        if m and section is not None:
            lines[(section, m.group(1).strip())] = no
    return lines


def _parse_value(kind, raw: str):
    raw = raw.strip()
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    if kind is bool:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if kind is str:
        return raw
    if kind == "floats":
        return tuple(float(x) for x in raw.split(",") if x.strip())
    if kind == "strs":
        return tuple(x.strip() for x in raw.split(",") if x.strip())
    if kind == "auto_float":
        return None if raw.lower() == "auto" else float(raw)
    raise AssertionError(kind)


def _parse_test_function(name: str, raw: str) -> TestFunctionSpec:
    parts = raw.split()
    if not parts or parts[0] not in _KINDS:
        raise ValueError(f"kind must be one of {_KINDS}")
    opts = {}
    for tok in parts[1:]:
        if "=" not in tok:
            raise ValueError(f"expected key=value, got {tok!r}")
        k, v = tok.split("=", 1)
        if k not in ("width", "amplitude", "center"):
            raise ValueError(f"unknown test-function option {k!r}")
        opts[k] = tuple(float(x) for x in v.split(",")) if k == "center" else float(v)
    if "width" not in opts:
        raise ValueError("width is required")
    return TestFunctionSpec(name, parts[0], opts["width"], opts.get("amplitude", 1.0), opts.get("center"))


def loads_config(text: str, source: str = "<string>") -> ScenarioConfig:
    """Parse and validate a configuration text."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    lines = _key_lines(text)

    def where(section, key=None):
        no = lines.get((section, key)) or lines.get((section, None))
        return f"{source}:{no}" if no else source

    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    values: dict = {"source": source}
    tfs = []
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{where(section)}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if section == "test_functions":
                try:
                    tfs.append(_parse_test_function(key, raw))
                except ValueError as exc:
                    raise ConfigError(f"{where(section, key)}: [test_functions] {key}: {exc}") from None
                continue
            kind = _SCHEMA[section].get(key)
            if kind is None:
                raise ConfigError(f"{where(section, key)}: unknown key {key!r} in [{section}]")
            try:
                values[key] = _parse_value(kind, raw)
            except ValueError as exc:
                raise ConfigError(f"{where(section, key)}: [{section}] {key}: {exc}") from None
    for section, keys in _REQUIRED.items():
        for key in keys:
            if key not in values:
                raise ConfigError(f"{where(section)}: missing required key {key!r} in [{section}]")
    if tfs:
        values["test_functions"] = tuple(tfs)
    cfg = ScenarioConfig(**values)
    _validate(cfg, where)
    return cfg


def _validate(cfg: ScenarioConfig, where):
    checks = [
        (("model", "d"), cfg.d >= 1, "d must be a positive integer"),
        (("model", "alpha"), 0 < cfg.alpha <= 2, "alpha must lie in (0, 2]"),
        (("model", "beta"), 0 < cfg.beta < 1, "beta must lie in (0, 1)"),
        (("model", "V"), cfg.V >= 0, "V must be nonnegative"),
        (("domain", "L"), cfg.L > 0 and math.isfinite(cfg.L), "L must be positive"),
        (("schedule", "T"), len(cfg.T) > 0 and all(t > 0 for t in cfg.T), "T values must be positive"),
        (("schedule", "tau_w"), cfg.tau_w is None or cfg.tau_w >= 0, "tau_w must be 'auto' or >= 0"),
        (("schedule", "h"), cfg.h > 0, "h must be positive"),
        (("schedule", "replicas"), cfg.replicas >= 0, "replicas must be >= 0"),
        (("schedule", "grid"), cfg.grid >= 2, "grid must be >= 2"),
        (("limit", "mode"), cfg.mode in _MODES, f"mode must be one of {_MODES}"),
        (("limit", "times"), all(t >= 0 for t in cfg.times), "times must be nonnegative"),
        (("limit", "samples"), cfg.samples >= 0, "samples must be >= 0"),
        (("limit", "level"), 0 <= cfg.level <= 4, "level must lie in 0..4"),
        (("outputs", "formats"), set(cfg.formats) <= {"csv", "json"}, "formats are csv and/or json"),
        (("run", "seed"), 0 <= cfg.seed < 2**64, "seed must be a 64-bit unsigned integer"),
        (("run", "workers"), cfg.workers >= 1, "workers must be >= 1"),
        (("run", "max_particles"), cfg.max_particles >= 1, "max_particles must be >= 1"),
    ]
    for (section, key), ok, msg in checks:
        if not ok:
            raise ConfigError(f"{where(section, key)}: [{section}] {key}: {msg}")
    for tf in cfg.test_functions:
        if not tf.width > 0:
            raise ConfigError(f"{where('test_functions', tf.name)}: {tf.name}: width must be positive")
        if tf.center is not None and len(tf.center) != cfg.d:
            raise ConfigError(f"{where('test_functions', tf.name)}: {tf.name}: center needs {cfg.d} coordinates")


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        return loads_config(fh.read(), source=str(path))


def _fmt_floats(xs):
    return ", ".join(repr(float(x)) for x in xs)


def dumps_config(cfg: ScenarioConfig, outputs: bool = True) -> str:
    """Canonical text form; ``loads_config(dumps_config(c)) == c``."""
    buf = io.StringIO()
    buf.write(f"[model]\nd = {cfg.d}\nalpha = {cfg.alpha!r}\nbeta = {cfg.beta!r}\nV = {cfg.V!r}\n\n")
    buf.write(f"[domain]\nL = {cfg.L!r}\ntorus = {str(cfg.torus).lower()}\n\n")
    tau = "auto" if cfg.tau_w is None else repr(float(cfg.tau_w))
    buf.write(f"[schedule]\nT = {_fmt_floats(cfg.T)}\ntau_w = {tau}\nh = {cfg.h!r}\n"
              f"replicas = {cfg.replicas}\ngrid = {cfg.grid}\n\n")
    buf.write("[test_functions]\n")
    for tf in cfg.test_functions:
        buf.write(f"{tf.name} = {tf.dumps()}\n")
    buf.write(f"\n[limit]\nmode = {cfg.mode}\ntimes = {_fmt_floats(cfg.times)}\nz = {_fmt_floats(cfg.z)}\n"
              f"samples = {cfg.samples}\nlevel = {cfg.level}\n\n")
    if outputs:
        buf.write(f"[outputs]\ndirectory = {cfg.directory}\nformats = {', '.join(cfg.formats)}\n\n")
    buf.write(f"[run]\nseed = {cfg.seed}\nmax_particles = {cfg.max_particles}\n")
    if outputs:
        buf.write(f"workers = {cfg.workers}\n")
    return buf.getvalue()

"""Scenario configuration: flat ``key = value unit`` text normalized to SI, rad and rad/s."""
from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, field, fields

from .errors import ConfigError

TWO_PI = 2 * math.pi

# factor to SI; frequencies in Hz become rad/s
_UNITS = {
    "s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9,
    "m": 1.0, "mm": 1e-3, "m/s": 1.0,
    "hz": TWO_PI, "khz": TWO_PI * 1e3, "mhz": TWO_PI * 1e6,
    "rad/s": 1.0, "rad": 1.0,
    "pi": math.pi,
}

# keys whose values are multiples of the peak coupling when given as "<x> omega0"
_COUPLING_RELATIVE = {"delta0", "Delta"}

_ALIASES = {
    "tc": "T_c", "t_c": "T_c", "nt": "n_t", "theta": "theta_r", "thetar": "theta_r",
    "tr": "t_r", "delta": "Delta", "seeds": "seed", "out": "output_dir", "tk_gamma": "tk_gamma",
}


@dataclass
class ScenarioConfig:
    """Resolved parameters of one scenario run.

    Physical quantities are SI (s, m, m/s) with angles in rad and frequencies
    in rad/s. Exactly one of ``theta_r`` and ``t_r`` is needed; the other
    follows from the coupling profile at velocity ``v``.
    """

    scenario: str = ""
    omega0: float = TWO_PI * 50e3
    w: float = 6e-3
    v: float = 70.0
    delta0: float = 2.2 * TWO_PI * 50e3
    theta_r: float | None = None
    t_r: float | None = None
    u: float = 0.45 * math.pi
    Delta: float = 8 * TWO_PI * 50e3
    T_c: float = 0.065
    n_t: float = 0.05
    p_at: float = 0.3
    tk_gamma: float = 0.08
    alpha: float = math.sqrt(2.7)
    dim: int = 51
    dim_two_mode: int = 10
    iterations: int = 200
    seed: int = 12345
    grid_points: int = 61
    grid_span: float = 3.0
    output_dir: str = "results"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self):
        positive = ("omega0", "w", "v", "T_c", "Delta", "dim", "dim_two_mode", "iterations", "grid_points")
        for key in positive:
            if not getattr(self, key) > 0:
                raise ConfigError(f"must be positive, got {getattr(self, key)}", key)
        for key in ("n_t", "p_at"):
            if getattr(self, key) < 0:
                raise ConfigError(f"must be >= 0, got {getattr(self, key)}", key)
        if not 0 <= self.u < math.pi / 2:
            raise ConfigError(f"must lie in [0, pi/2), got {self.u}", "u")
        if self.theta_r is not None and self.t_r is not None:
            raise ConfigError("give either theta_r or t_r, not both", "t_r")
        for key in ("theta_r", "t_r"):
            val = getattr(self, key)
            if val is not None and not val > 0:
                raise ConfigError(f"must be positive, got {val}", key)

    @property
    def profile(self):
        from .propagators import CouplingProfile

        return CouplingProfile(omega0=self.omega0, w=self.w)

    def resolved_theta_r(self, default=math.pi / 2):
        """theta_r, derived from t_r through the coupling integral when only t_r is set."""
        if self.theta_r is not None:
            return self.theta_r
        if self.t_r is not None:
            return float(self.profile.theta(-self.t_r / 2, self.t_r / 2, self.v))
        return default

    def resolved_t_r(self, default_theta=math.pi / 2):
        if self.t_r is not None:
            return self.t_r
        try:
            return float(self.profile.t_r_for_theta(self.resolved_theta_r(default_theta), self.v))
        except ValueError as exc:
            raise ConfigError(str(exc), "theta_r") from exc

    def to_dict(self):
        return dataclasses.asdict(self)

    def replace(self, **changes):
        return apply_overrides(self, changes)


_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"


def parse_value(key, text):
    """Parse ``"<number> [unit]"`` (or ``"pi/2"``-style angles) into the internal unit for ``key``."""
    text = text.strip()
    names = {f.name for f in fields(ScenarioConfig)}
    ftype = {f.name: f.type for f in fields(ScenarioConfig)}
    if key in ("scenario", "output_dir"):
        return text
    if key in names and ftype[key] == "int":
        try:
            return int(float(text))
        except ValueError:
            raise ConfigError(f"expected an integer, got {text!r}", key) from None
    m = re.fullmatch(rf"({_NUMBER})?\s*\*?\s*([A-Za-z][A-Za-z0-9]*(?:/[A-Za-z]+)?)?(?:\s*/\s*({_NUMBER}))?", text)
    if not m or (m.group(1) is None and m.group(2) is None):
        raise ConfigError(f"cannot parse {text!r}", key)
    number = float(m.group(1)) if m.group(1) is not None else 1.0
    unit = (m.group(2) or "").lower()
    if m.group(3) is not None:
        number /= float(m.group(3))
    if not unit:
        return number
    if unit == "omega0" and key in _COUPLING_RELATIVE:
        return ("omega0", number)
    if unit not in _UNITS:
        raise ConfigError(f"unknown unit {unit!r}", key)
    return number * _UNITS[unit]


def _canonical_key(key):
    key = key.strip().replace("-", "_")
    return _ALIASES.get(key.lower(), key)


def apply_overrides(cfg, items):
    """Return a copy of ``cfg`` with ``items`` (key -> raw text or value) applied and validated."""
    names = {f.name for f in fields(ScenarioConfig)}
    data = dataclasses.asdict(cfg)
    relative = {}
    for raw_key, value in items.items():
        key = _canonical_key(raw_key)
        if key not in names:
            data["extra"] = dict(data["extra"], **{key: value})
            continue
        parsed = parse_value(key, value) if isinstance(value, str) else value
        if isinstance(parsed, tuple):
            relative[key] = parsed[1]
            continue
        data[key] = parsed
        if key == "theta_r":
            data["t_r"] = None
        elif key == "t_r":
            data["theta_r"] = None
    for key, mult in relative.items():
        data[key] = mult * data["omega0"]
    return ScenarioConfig(**data)


def parse_config_text(text, base=None):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    items = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'", line)
        key, value = line.split("=", 1)
        items[key.strip()] = value.strip()
    return apply_overrides(base or ScenarioConfig(), items)


def load_config(path, base=None):
    with open(path) as fh:
        return parse_config_text(fh.read(), base)

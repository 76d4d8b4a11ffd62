"""Run configuration shared by the command line and the experiment scripts."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

COMMANDS = ("cone-metric", "cone-angle", "geodesic", "transport-validate", "heis", "accept")


class ConfigError(ValueError):
    """Invalid or inconsistent configuration (exit code 1)."""


@dataclass
class RunConfig:
    command: str = "cone-metric"
    k: int = 2
    t: list = field(default_factory=lambda: [1.0])
    rmin: float = 1e-3
    rmax: float = 50.0
    rn: int = 64
    degree: int = 24
    degrees: list = field(default_factory=lambda: [16, 24, 32])
    out: str | None = None
    json: bool = False
    seed: int = 0
    p: list | None = None          # cone point (r, alpha)
    q: list | None = None
    N: int = 257
    scaling: bool = False
    kernel: list | None = None     # Heisenberg point (x, y, u)
    constants: bool = False
    heis_degrees: list = field(default_factory=lambda: [4, 8, 12, 16, 20, 24])
    upper_degree: int = 12
    only: list | None = None       # acceptance criteria subset
    tolerances: dict = field(default_factory=dict)

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.k not in (2, 4):
            raise ConfigError("--k must be 2 or 4")
        if not self.t or any(float(x) <= 0 for x in self.t):
            raise ConfigError("--t values must be positive")
        if self.rn < 2 or not (0 < self.rmin < self.rmax):
            raise ConfigError("empty or invalid radial grid (need 0 < rmin < rmax, rn >= 2)")
        if self.degree < 1 or any(int(d) < 1 for d in self.degrees):
            raise ConfigError("basis degrees must be positive")
        if self.N < 3:
            raise ConfigError("--N must be at least 3")
        for name in ("p", "q"):
            v = getattr(self, name)
            if v is not None and (len(v) != 2 or float(v[0]) < 0):
                raise ConfigError(f"--{name} takes r >= 0 and an angle")
        if self.kernel is not None and len(self.kernel) != 3:
            raise ConfigError("--kernel takes x y u")
        return self

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from e
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d)

    def merged(self, overrides: dict):
        """Copy with the given values replacing ours (None means not given)."""
        d = asdict(self)
        d.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig.from_dict(d)

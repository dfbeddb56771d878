"""Run configuration: a flat ``key = value`` text file with ``#`` comments."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .discretize import build_grid, build_weight
from .nonlinearity import make_preset


class ConfigError(ValueError):
    def __init__(self, message: str, line: int = 0):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


@dataclass(frozen=True)
class RunConfig:
    dim: int = 1
    n: int = 31
    m: int = 64
    R: float = math.nan  # extension height; nan means 6 / sqrt(lambda_1)
    nonlinearity: str = "exp"
    weight: str = "one"
    tol: float = 1e-10
    max_iter: int = 10_000
    policy: str = "adaptive"
    lambda_grid: tuple = field(default=())
    lambda_start: float = 1e-3
    lambda_step: float = 0.05
    bracket_tol: float = 1e-3
    lambda_fraction: float = 0.01  # uniqueness: lambda = fraction * lambda*
    eps: float = math.nan  # props: nan means 0.1 for class R, 1 for class S
    starts: int = 20
    seed: int = 0
    svg: bool = False
    out: str = "out"

    def validate(self) -> "RunConfig":
        for name in ("n", "m", "tol", "max_iter", "lambda_start", "lambda_step",
                     "bracket_tol", "lambda_fraction", "starts"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not (math.isnan(self.R) or self.R > 0):
            raise ConfigError("R must be positive")
        if not (math.isnan(self.eps) or self.eps > 0):
            raise ConfigError("eps must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if self.policy not in ("grid", "adaptive"):
            raise ConfigError(f"policy must be grid or adaptive, got {self.policy!r}")
        if any(not lam > 0 for lam in self.lambda_grid):
            raise ConfigError("lambda_grid values must be positive")
        try:
            grid = build_grid(self.dim, self.n)
            make_preset(self.nonlinearity)
            build_weight(self.weight, grid)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key: str, raw: str):
    kind = _TYPES[key]
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "bool":
        low = raw.lower()
        if low not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError(f"not a boolean: {raw!r}")
        return low in ("true", "1", "yes")
    if kind == "tuple":
        return tuple(float(v) for v in raw.replace(",", " ").split())
    return raw


def parse_config(text: str, base: RunConfig = RunConfig()) -> RunConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = (s.strip() for s in line.partition("="))
        if not sep or not key:
            raise ConfigError("expected 'key = value'", lineno)
        if key not in _TYPES:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        try:
            values[key] = _convert(key, raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}", lineno) from exc
    return replace(base, **values).validate()


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return parse_config(text)

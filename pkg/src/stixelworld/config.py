"""Flat run configuration.

A config file holds one ``key = value`` per line; ``#`` starts a comment.
Every key is also a command-line flag (``--c_bic 3``) that overrides the
file. Unknown keys are rejected so a typo in a prior weight cannot pass
silently.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields

from .model import GroundModel, NoiseModel, SensorParams
from .params import StixelParams
from .prior import PriorParams


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    # ground plane
    alpha: float = 0.4
    v_horizon: float = 308.0
    # sensor model
    p_out: float = 0.7
    d_range: int = 128
    a_norm: float = 1.0
    sigma_ground: float = 1.0
    sigma_object: float = 1.0
    sigma_sky: float = 0.8
    slope_ground: float = 0.0
    slope_object: float = 0.0
    slope_sky: float = 0.0
    # prior
    c_bic: float = 4.0
    c_gravity: float = 1.0
    c_ordering: float = 1.0
    c_diving: float = 1.0
    ordering_margin: float = 1.0
    first_ground: float = 0.0
    first_object: float = 2.0
    first_sky: float = math.inf
    # pipeline
    stixel_width: int = 5
    exact: bool = True
    scale: float = 256.0
    invalid_value: int = 65535
    threads: int = 1
    repeat: int = 10

    def __post_init__(self):
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if self.repeat < 1:
            raise ConfigError(f"repeat must be >= 1, got {self.repeat}")
        if not self.scale > 0:
            raise ConfigError(f"scale must be positive, got {self.scale}")
        try:
            self.stixel_params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def stixel_params(self) -> StixelParams:
        return StixelParams(
            ground=GroundModel(self.alpha, self.v_horizon),
            sensor=SensorParams(
                self.p_out,
                self.d_range,
                self.a_norm,
                NoiseModel(
                    self.sigma_ground, self.sigma_object, self.sigma_sky,
                    self.slope_ground, self.slope_object, self.slope_sky,
                ),
            ),
            prior=PriorParams(
                self.c_bic, self.c_gravity, self.c_ordering, self.c_diving,
                self.ordering_margin, self.first_ground, self.first_object, self.first_sky,
            ),
            stixel_width=self.stixel_width,
            exact=self.exact,
        )

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def convert(key: str, text: str):
    """Parse ``text`` as the type of config field ``key``."""
    if key not in FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    kind = FIELD_TYPES[key]
    try:
        if kind == "bool":
            return parse_bool(text)
        if kind == "int":
            return int(text)
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from exc


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = convert(key, value)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from exc
    return values


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the file at ``path``, then ``overrides``."""
    values = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
        values.update(parse_config_text(text, str(path)))
    for key, value in (overrides or {}).items():
        if key not in FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = value
    return RunConfig(**values)


def dump_config(cfg: RunConfig) -> str:
    return "".join(f"{f.name} = {getattr(cfg, f.name)}\n" for f in fields(cfg))

"""Experiment configuration: TOML file plus command-line overrides."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .model import Coefficients, make_coefficients

OUTPUT_ENV = "CHLDP_OUTPUT_DIR"


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    b: str = "cubic"
    sigma: str = "one"
    sigma_param: float = 2.0
    u0: str = "cos"
    u0_params: list = field(default_factory=lambda: [2.0, 0.1])
    n: int = 8
    n_list: list = field(default_factory=lambda: [8, 16, 32])
    m: int = 64
    m_base: int = 64
    n_base: int = 8
    T: float = 0.5
    eps: float = 0.1
    eps_list: list = field(default_factory=lambda: [0.4, 0.2, 0.1])
    xbar: float = 1.0
    y: Optional[float] = None
    y_offset: float = 0.5
    y_list: list = field(default_factory=list)
    target_rate: float = 1.0
    samples: int = 10_000
    seed: int = 0
    threads: int = 0
    output_dir: Optional[str] = None
    importance_sampling: bool = True
    full_path: bool = False
    J: int = 512

    def coefficients(self) -> Coefficients:
        try:
            return make_coefficients(self.b, self.sigma, self.sigma_param, self.u0, self.u0_params)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def validate(self) -> None:
        if self.n < 2:
            raise ConfigError("n must be at least 2")
        if any(int(k) < 2 for k in self.n_list):
            raise ConfigError("every entry of n_list must be at least 2")
        if self.m < 1 or self.m_base < 1:
            raise ConfigError("m must be positive")
        if self.T <= 0:
            raise ConfigError("T must be positive")
        if not 0.0 <= self.xbar <= 3.141592653589793:
            raise ConfigError("xbar must lie in [0, pi]")
        if not 0.0 < self.eps <= 1.0:
            raise ConfigError("eps must lie in (0, 1]")
        if any(not 0.0 < e <= 1.0 for e in self.eps_list):
            raise ConfigError("eps_list entries must lie in (0, 1]")
        if any(a <= b for a, b in zip(self.eps_list, self.eps_list[1:])):
            raise ConfigError("eps_list must be strictly decreasing")
        if self.samples < 100:
            raise ConfigError("samples must be at least 100")
        if self.threads < 0:
            raise ConfigError("threads must be nonnegative")
        self.coefficients()

    @property
    def worker_count(self) -> int:
        return self.threads if self.threads > 0 else (os.cpu_count() or 1)

    def resolved_output_dir(self) -> str:
        return self.output_dir or os.environ.get(OUTPUT_ENV) or "."

    def digest(self) -> str:
        """Hash of everything that affects numerical output (not threads or paths)."""
        d = dataclasses.asdict(self)
        for k in ("threads", "output_dir"):
            d.pop(k)
        blob = json.dumps(d, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


_SCALAR_TYPES = {f.name: type(f.default) for f in dataclasses.fields(ExperimentConfig)
                 if isinstance(f.default, (bool, int, float, str))}
_LIST_TYPES = {"n_list": int, "eps_list": float, "y_list": float, "u0_params": float}


def _coerce(key, value):
    """Cast a config value to the field's type, rejecting lossy conversions."""
    if key in _LIST_TYPES:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key} must be a list")
        return [_cast(key, _LIST_TYPES[key], v) for v in value]
    if key == "y":
        return None if value is None else _cast(key, float, value)
    if key in _SCALAR_TYPES:
        return _cast(key, _SCALAR_TYPES[key], value)
    return value


def _cast(key, typ, value):
    if typ is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be true or false")
        return value
    if typ is str:
        if not isinstance(value, str):
            raise ConfigError(f"{key} must be a string")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number, got {value!r}")
    if typ is int and float(value) != int(value):
        raise ConfigError(f"{key} must be an integer, got {value!r}")
    return typ(value)


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> ExperimentConfig:
    data = {}
    if path:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    # allow a [coefficients] table for readability
    coeff = data.pop("coefficients", {})
    data.update(coeff)
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        cfg = ExperimentConfig(**{k: _coerce(k, v) for k, v in data.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    cfg.validate()
    return cfg

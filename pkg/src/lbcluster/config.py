"""Flat ``key = value`` experiment configuration."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Callable

from .graph import VolumeConvention
from .matching import AlmostRegularEmulation, ProtocolVariant, Regular
from .protocol import ProtocolConfig


class ConfigError(ValueError):
    pass


def _opt_int(text: str) -> int | None:
    return None if text.lower() in ("none", "") else int(text)


@dataclass(frozen=True)
class ExperimentConfig:
    # generator
    n: int = 500
    k: int = 2
    d: int = 16
    cross_swaps: int = 5
    # protocol
    beta: float = 0.4
    C_T: float = 5.0
    T_override: int | None = None
    variant: str = "regular"
    D: int | None = None
    # analysis
    C_good: float = 1.0
    well_clustered_constant: float = 1.0
    ratio_cap: float = 10.0
    runs: int = 100
    trials: int = 10
    convention: str = "paper-literal"
    # bookkeeping
    master_seed: int = 0
    out: str = "out"

    def __post_init__(self) -> None:
        VolumeConvention.parse(self.convention)
        if self.variant not in ("regular", "emulate"):
            raise ConfigError(f"variant must be 'regular' or 'emulate', got {self.variant!r}")
        if self.variant == "emulate" and self.D is None:
            raise ConfigError("variant 'emulate' needs D")
        if not 0 < self.beta <= 0.5:
            raise ConfigError(f"beta={self.beta} must lie in (0, 1/2]")

    def protocol_variant(self) -> ProtocolVariant:
        return Regular() if self.variant == "regular" else AlmostRegularEmulation(int(self.D))

    def volume_convention(self) -> VolumeConvention:
        return VolumeConvention.parse(self.convention)

    def protocol(self, rng_seed: int | None = None) -> ProtocolConfig:
        return ProtocolConfig(
            beta=self.beta,
            C_T=self.C_T,
            T_override=self.T_override,
            rng_seed=self.master_seed if rng_seed is None else rng_seed,
            variant=self.protocol_variant(),
            convention=self.volume_convention(),
        )

    def to_text(self) -> str:
        return "".join(f"{f.name} = {_render(getattr(self, f.name))}\n" for f in fields(self))

    def to_json(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        values: dict[str, Any] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            values[key.strip()] = val.strip()
        return cls().override(values)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_text(Path(path).read_text())

    def override(self, values: dict[str, Any]) -> "ExperimentConfig":
        parsed = {}
        for key, val in values.items():
            if key not in _PARSERS:
                raise ConfigError(f"unknown config key {key!r}")
            try:
                parsed[key] = _PARSERS[key](val) if isinstance(val, str) else val
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from None
        return replace(self, **parsed)


def _render(v: Any) -> str:
    if v is None:
        return "none"
    if isinstance(v, float):
        return repr(v)
    return str(v)


_PARSERS: dict[str, Callable[[str], Any]] = {
    "n": int,
    "k": int,
    "d": int,
    "cross_swaps": int,
    "beta": float,
    "C_T": float,
    "T_override": _opt_int,
    "variant": str,
    "D": _opt_int,
    "C_good": float,
    "well_clustered_constant": float,
    "ratio_cap": float,
    "runs": int,
    "trials": int,
    "convention": str,
    "master_seed": int,
    "out": str,
}

"""
Runtime settings. Values come from the environment (optionally a .env file in the
working directory) and fall back to the defaults below.
"""
import logging
import os
from dataclasses import asdict, dataclass

from dotenv import find_dotenv, load_dotenv

from processing.errors import ConfigurationError

DEFAULT_BRUTEFORCE_CAP = 20
DEFAULT_COVER_CAP_FACTOR = 10.0
DEFAULT_SPECTRAL_PROBES = 200
DEFAULT_EXTENSION_PROBABILITY = 0.25
DEFAULT_LOG_LEVEL = "WARNING"


def _read(name: str, cast, default):
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return cast(raw.strip())
    except ValueError as oops:
        raise ConfigurationError(f"environment variable {name}={raw!r} is invalid: {oops}") from oops


@dataclass(frozen=True)
class Settings:
    bruteforce_cap: int = DEFAULT_BRUTEFORCE_CAP
    cover_cap_factor: float = DEFAULT_COVER_CAP_FACTOR
    spectral_probes: int = DEFAULT_SPECTRAL_PROBES
    extension_probability: float = DEFAULT_EXTENSION_PROBABILITY
    log_level: str = DEFAULT_LOG_LEVEL

    @classmethod
    def from_env(cls, dotenv: bool = True) -> "Settings":
        if dotenv:
            load_dotenv(find_dotenv(usecwd=True))
        settings = cls(
            bruteforce_cap=_read("OVERLAY_BRUTEFORCE_CAP", int, DEFAULT_BRUTEFORCE_CAP),
            cover_cap_factor=_read("OVERLAY_COVER_CAP_FACTOR", float, DEFAULT_COVER_CAP_FACTOR),
            spectral_probes=_read("OVERLAY_SPECTRAL_PROBES", int, DEFAULT_SPECTRAL_PROBES),
            extension_probability=_read("OVERLAY_EXTENSION_PROBABILITY", float, DEFAULT_EXTENSION_PROBABILITY),
            log_level=_read("OVERLAY_LOG_LEVEL", str, DEFAULT_LOG_LEVEL).upper(),
        )
        settings.validate()
        return settings

    def validate(self) -> None:
        if self.bruteforce_cap < 1:
            raise ConfigurationError("OVERLAY_BRUTEFORCE_CAP must be at least 1")
        if self.cover_cap_factor <= 0:
            raise ConfigurationError("OVERLAY_COVER_CAP_FACTOR must be positive")
        if self.spectral_probes < 1:
            raise ConfigurationError("OVERLAY_SPECTRAL_PROBES must be at least 1")
        if not 0.0 <= self.extension_probability <= 1.0:
            raise ConfigurationError("OVERLAY_EXTENSION_PROBABILITY must lie in [0, 1]")
        if not isinstance(logging.getLevelName(self.log_level), int):
            raise ConfigurationError(f"OVERLAY_LOG_LEVEL {self.log_level!r} is not a logging level")

    def to_dict(self) -> dict:
        return asdict(self)

from contextlib import contextmanager
from contextvars import ContextVar
from typing import Dict, Iterator

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

_overrides: ContextVar[Dict] = ContextVar("qrex_setting_overrides", default={})


class QrexSettings(BaseSettings):
    """Runtime limits and defaults, overridable through ``QREX_*`` environment variables."""

    model_config = SettingsConfigDict(env_prefix="QREX_")

    dim_cap: int = Field(default=8192, gt=0, description="Largest dense operator dimension")
    atom_cap: int = Field(default=10**7, gt=0, description="Largest log-spectrum atom count")
    enumeration_cap: int = Field(default=2**20, gt=0, description="Largest exactly enumerated hash family")
    default_tol: float = Field(default=1e-6, gt=0, description="Bisection tolerance in bits")
    log_level: str = "WARNING"


def get_settings() -> QrexSettings:
    # Not cached: tests and the CLI change QREX_* between calls.
    return QrexSettings(**_overrides.get())


@contextmanager
def override_settings(**values) -> Iterator[QrexSettings]:
    """Temporarily replace settings fields; None values are ignored."""
    merged = {**_overrides.get(), **{key: value for key, value in values.items() if value is not None}}
    token = _overrides.set(merged)
    try:
        yield get_settings()
    finally:
        _overrides.reset(token)


def resolve_cap(value, name: str) -> int:
    """Return ``value`` or, when it is None, the configured cap ``name``."""
    if value is None:
        return getattr(get_settings(), name)
    return int(value)

"""Server configuration: a small TOML file plus environment overrides.

Only the admin token lives in the environment (SYM_ADMIN_TOKEN); every
tunable the operator may want under version control sits in the file.
"""

import os
from dataclasses import dataclass, fields
from datetime import timedelta
from pathlib import Path
from typing import Optional, Union

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from sym.errors import ValidationError
from sym.lexicon import UpdateParams

ADMIN_TOKEN_ENV = "SYM_ADMIN_TOKEN"


@dataclass(frozen=True)
class ServiceConfig:
    listen_addr: str = "127.0.0.1:8000"
    data_dir: str = "./sym-data"
    update_interval_hours: float = 24.0
    default_k: int = 3
    alpha: float = 0.2
    min_samples: int = 5

    def __post_init__(self):
        if self.update_interval_hours <= 0:
            raise ValidationError("update_interval_hours must be positive")
        if self.default_k < 1:
            raise ValidationError("default_k must be >= 1")
        # alpha / min_samples ranges are enforced where they are consumed.
        UpdateParams(alpha=self.alpha, min_samples=self.min_samples)
        self.host, self.port  # fail early on a malformed listen_addr

    @property
    def host(self) -> str:
        return self._split_addr()[0]

    @property
    def port(self) -> int:
        return self._split_addr()[1]

    def _split_addr(self) -> tuple:
        addr = self.listen_addr
        if ":" not in addr:
            raise ValidationError(f"listen_addr must be host:port, got {addr!r}")
        host, _, port = addr.rpartition(":")
        try:
            return host, int(port)
        except ValueError:
            raise ValidationError(f"listen_addr port is not a number: {addr!r}")

    @property
    def update_interval(self) -> timedelta:
        return timedelta(hours=self.update_interval_hours)

    @property
    def update_params(self) -> UpdateParams:
        return UpdateParams(alpha=self.alpha, min_samples=self.min_samples)


def load_config(path: Union[str, Path, None] = None) -> ServiceConfig:
    """Load the TOML config; a missing path means all defaults.

    Unknown keys are rejected so a typo cannot silently fall back to a
    default value.
    """
    if path is None:
        return ServiceConfig()
    with open(path, "rb") as handle:
        raw = tomllib.load(handle)
    known = {f.name for f in fields(ServiceConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ValidationError(f"unknown config keys: {', '.join(unknown)}")
    return ServiceConfig(**raw)


def admin_token() -> Optional[str]:
    """The shared secret protecting /v1/admin routes; None disables the check."""
    return os.environ.get(ADMIN_TOKEN_ENV) or None

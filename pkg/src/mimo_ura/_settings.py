"""Environment-variable settings for the result store, logging and the service config."""

from __future__ import annotations

import os

_STORE_PREFIX = "MIMO_URA_STORE_"


def get_backend_name() -> str:
    """Return the selected result-store backend name (default: ``memory``)."""
    return os.environ.get(f"{_STORE_PREFIX}BACKEND", "memory").lower()


def get_store_config() -> dict[str, str]:
    """Collect all ``MIMO_URA_STORE_*`` env vars (excluding ``MIMO_URA_STORE_BACKEND``) as backend config."""
    skip = f"{_STORE_PREFIX}BACKEND"
    return {
        key.removeprefix(_STORE_PREFIX).lower(): value
        for key, value in os.environ.items()
        if key.startswith(_STORE_PREFIX) and key != skip
    }


def get_log_level() -> str:
    return os.environ.get("MIMO_URA_LOG_LEVEL", "WARNING").upper()


def get_config_path() -> str | None:
    """Default config file for the HTTP service, if any."""
    return os.environ.get("MIMO_URA_CONFIG") or None

"""Factory for creating the configured result store."""

from __future__ import annotations

from mimo_ura._results import ResultStore
from mimo_ura._settings import get_backend_name, get_store_config


def create_result_store() -> ResultStore:
    """Instantiate the result store selected by ``MIMO_URA_STORE_BACKEND``."""
    name = get_backend_name()
    config = get_store_config()

    if name == "memory":
        from mimo_ura._results import MemoryResultStore

        return MemoryResultStore()

    if name == "filesystem":
        from mimo_ura._results_filesystem import FilesystemResultStore

        return FilesystemResultStore(root_dir=config.get("root_dir", "./mimo_ura_runs"))

    raise ValueError(f"Unknown result store backend: {name!r}")

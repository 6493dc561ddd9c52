"""Tests for the result store factory and its environment settings."""

from __future__ import annotations

from unittest.mock import patch

import pytest

from mimo_ura._results import MemoryResultStore
from mimo_ura._settings import get_backend_name, get_config_path, get_log_level, get_store_config


def _create(backend: str, config: dict[str, str] | None = None):
    """Helper: call create_result_store() with mocked settings."""
    config = config or {}
    with (
        patch("mimo_ura._results_factory.get_backend_name", return_value=backend),
        patch("mimo_ura._results_factory.get_store_config", return_value=config),
    ):
        from mimo_ura._results_factory import create_result_store

        return create_result_store()


class TestMemoryBackend:
    def test_default(self) -> None:
        assert isinstance(_create("memory"), MemoryResultStore)


class TestFilesystemBackend:
    def test_creates_instance(self, tmp_path) -> None:
        store = _create("filesystem", {"root_dir": str(tmp_path / "runs_root")})
        from mimo_ura._results_filesystem import FilesystemResultStore

        assert isinstance(store, FilesystemResultStore)
        assert (tmp_path / "runs_root").is_dir()


class TestUnknownBackend:
    def test_raises(self) -> None:
        with pytest.raises(ValueError, match="Unknown result store backend"):
            _create("s3")


class TestSettings:
    def test_backend_defaults_to_memory(self, monkeypatch) -> None:
        monkeypatch.delenv("MIMO_URA_STORE_BACKEND", raising=False)
        assert get_backend_name() == "memory"

    def test_backend_is_lowercased(self, monkeypatch) -> None:
        monkeypatch.setenv("MIMO_URA_STORE_BACKEND", "FileSystem")
        assert get_backend_name() == "filesystem"

    def test_store_config_strips_prefix(self, monkeypatch) -> None:
        monkeypatch.setenv("MIMO_URA_STORE_BACKEND", "filesystem")
        monkeypatch.setenv("MIMO_URA_STORE_ROOT_DIR", "/data/runs")
        config = get_store_config()
        assert config["root_dir"] == "/data/runs"
        assert "backend" not in config

    def test_log_level(self, monkeypatch) -> None:
        monkeypatch.delenv("MIMO_URA_LOG_LEVEL", raising=False)
        assert get_log_level() == "WARNING"
        monkeypatch.setenv("MIMO_URA_LOG_LEVEL", "debug")
        assert get_log_level() == "DEBUG"

    def test_config_path(self, monkeypatch) -> None:
        monkeypatch.setenv("MIMO_URA_CONFIG", "")
        assert get_config_path() is None
        monkeypatch.setenv("MIMO_URA_CONFIG", "cfg.toml")
        assert get_config_path() == "cfg.toml"

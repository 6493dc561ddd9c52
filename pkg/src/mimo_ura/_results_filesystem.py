"""Filesystem result store."""

from __future__ import annotations

import logging
import os
import shutil
import tempfile
from pathlib import Path

from mimo_ura._results import StoredRun, encode_artifact_name, parse_run, serialize_run

logger = logging.getLogger(__name__)


class FilesystemResultStore:
    """Result store that persists runs to the local filesystem.

    Layout::

        {root_dir}/runs/{run_uuid}/run.json
        {root_dir}/runs/{run_uuid}/{encoded_artifact_name}     (e.g. sweep.csv)
    """

    def __init__(self, root_dir: str = "./mimo_ura_runs") -> None:
        self._root = Path(root_dir)
        self._root.mkdir(parents=True, exist_ok=True)

    def _run_dir(self, run_uuid: str) -> Path:
        return self._root / "runs" / run_uuid

    def _run_path(self, run_uuid: str) -> Path:
        return self._run_dir(run_uuid) / "run.json"

    @staticmethod
    def _atomic_write(target: Path, data: bytes) -> None:
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=target.parent)
        try:
            os.write(fd, data)
            os.close(fd)
            fd = -1
            os.replace(tmp, target)
        except BaseException:
            if fd >= 0:
                os.close(fd)
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def get_run(self, run_uuid: str) -> StoredRun | None:
        path = self._run_path(run_uuid)
        if not path.exists():
            return None
        return parse_run(path.read_bytes())

    def put_run(self, run_uuid: str, run: StoredRun) -> None:
        self._atomic_write(self._run_path(run_uuid), serialize_run(run))
        for name, content in run.artifacts.items():
            self.put_artifact(run_uuid, name, content)
        logger.info("stored %s run %s under %s", run.kind, run.run_id, self._run_dir(run_uuid))

    def delete_run(self, run_uuid: str) -> bool:
        run_dir = self._run_dir(run_uuid)
        if not run_dir.exists():
            return False
        shutil.rmtree(run_dir)
        return True

    def list_runs(self, kind: str | None = None) -> list[StoredRun]:
        runs_dir = self._root / "runs"
        if not runs_dir.exists():
            return []
        result: list[StoredRun] = []
        for entry in runs_dir.iterdir():
            path = entry / "run.json"
            if not entry.is_dir() or not path.exists():
                continue
            run = parse_run(path.read_bytes())
            if kind is None or run.kind == kind:
                result.append(run)
        return sorted(result, key=lambda r: r.created)

    def get_artifact(self, run_uuid: str, name: str) -> bytes | None:
        path = self._run_dir(run_uuid) / encode_artifact_name(name)
        if name == "run.json" or not path.exists():
            return None
        return path.read_bytes()

    def put_artifact(self, run_uuid: str, name: str, content: bytes) -> None:
        if not self._run_path(run_uuid).exists():
            raise KeyError(f"Run {run_uuid!r} not found")
        if name == "run.json":
            raise ValueError("artifact name 'run.json' is reserved")
        self._atomic_write(self._run_dir(run_uuid) / encode_artifact_name(name), content)

"""Pluggable store for finished runs, plus the plot-ready CSV and JSON sidecar writers."""

from __future__ import annotations

import csv
import io
import json
import re
import urllib.parse
import uuid
from collections.abc import Sequence
from dataclasses import dataclass, field
from datetime import UTC, datetime
from pathlib import Path
from typing import TYPE_CHECKING, Any, Protocol, runtime_checkable

import numpy as np

from mimo_ura._config import SystemConfig, config_to_dict

if TYPE_CHECKING:
    from mimo_ura._simulation import SweepResult

SWEEP_CSV_COLUMNS = ("axis", "p_md", "p_fa", "P_e", "trials", "ci95", "mean_decode_ms")

_URN_UUID_RE = re.compile(r"^urn:uuid:[0-9a-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{12}$", re.IGNORECASE)


@dataclass
class StoredRun:
    """A persisted trial batch or sweep."""

    run_id: str  # full urn:uuid: string
    kind: str  # "trial" or "sweep"
    created: str
    config: dict[str, Any]
    result: dict[str, Any]
    artifacts: dict[str, bytes] = field(default_factory=dict, repr=False)

    def summary(self) -> dict[str, str]:
        return {"id": self.run_id, "kind": self.kind, "created": self.created}


@runtime_checkable
class ResultStore(Protocol):
    """Protocol for result-store backends."""

    def get_run(self, run_uuid: str) -> StoredRun | None: ...
    def put_run(self, run_uuid: str, run: StoredRun) -> None: ...
    def delete_run(self, run_uuid: str) -> bool: ...
    def list_runs(self, kind: str | None = None) -> list[StoredRun]: ...
    def get_artifact(self, run_uuid: str, name: str) -> bytes | None: ...
    def put_artifact(self, run_uuid: str, name: str, content: bytes) -> None: ...


def make_run_id(u: uuid.UUID | None = None) -> str:
    """``urn:uuid:`` identifier for a run; a fresh v4 UUID when *u* is None."""
    return f"urn:uuid:{u or uuid.uuid4()}"


def parse_run_id(value: str) -> uuid.UUID:
    """Extract the UUID of a ``urn:uuid:`` run id; raises ``ValueError`` otherwise."""
    if not _URN_UUID_RE.match(value):
        raise ValueError(f"Invalid urn:uuid: {value!r}")
    return uuid.UUID(value[9:])


def new_run(kind: str, config: dict[str, Any], result: dict[str, Any]) -> tuple[str, StoredRun]:
    """A fresh run record and the bare UUID it is stored under."""
    run_uuid = uuid.uuid4()
    created = datetime.now(UTC).isoformat(timespec="seconds")
    return str(run_uuid), StoredRun(
        run_id=make_run_id(run_uuid), kind=kind, created=created, config=config, result=result,
    )


def encode_artifact_name(name: str) -> str:
    """Percent-encode an artifact name for use as a flat file name."""
    return urllib.parse.quote(name, safe="")


def serialize_run(run: StoredRun) -> bytes:
    return json.dumps(
        {
            "id": run.run_id,
            "kind": run.kind,
            "created": run.created,
            "config": run.config,
            "result": run.result,
        },
        indent=2,
    ).encode()


def parse_run(data: bytes) -> StoredRun:
    meta = json.loads(data)
    return StoredRun(
        run_id=meta["id"], kind=meta["kind"], created=meta["created"], config=meta["config"], result=meta["result"],
    )


# ---------------------------------------------------------------------------
# Output files
# ---------------------------------------------------------------------------


def sweep_csv_text(sweep: SweepResult) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=SWEEP_CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in sweep.rows():
        writer.writerow({key: repr(value) if isinstance(value, float) else value for key, value in row.items()})
    return buffer.getvalue()


def write_sweep_csv(path: str | Path, sweep: SweepResult) -> Path:
    """One row per axis value with columns ``axis, p_md, p_fa, P_e, trials, ci95, mean_decode_ms``."""
    path = Path(path)
    path.write_text(sweep_csv_text(sweep), encoding="utf-8")
    return path


def sidecar_path(path: str | Path) -> Path:
    return Path(path).with_suffix(".json")


def write_sidecar(path: str | Path, cfg: SystemConfig, extra: dict[str, Any] | None = None) -> Path:
    """JSON file holding the full config (with derived fields) next to a CSV result."""
    path = Path(path)
    payload = {"config": config_to_dict(cfg), **(extra or {})}
    path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    return path


def dump_activity_csv(path: str | Path, estimates: Sequence[np.ndarray]) -> Path:
    """Per-subslot activity estimates; only entries above zero are written."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["subslot", "index", "gamma"])
        for sub, gamma in enumerate(estimates):
            for index in np.flatnonzero(np.asarray(gamma) > 0):
                writer.writerow([sub, int(index), repr(float(gamma[index]))])
    return path


# ---------------------------------------------------------------------------
# In-memory backend
# ---------------------------------------------------------------------------


class MemoryResultStore:
    """In-memory result store backed by a dict."""

    def __init__(self) -> None:
        self._runs: dict[str, StoredRun] = {}

    def clear(self) -> None:
        """Remove all runs."""
        self._runs.clear()

    def get_run(self, run_uuid: str) -> StoredRun | None:
        return self._runs.get(run_uuid)

    def put_run(self, run_uuid: str, run: StoredRun) -> None:
        existing = self._runs.get(run_uuid)
        if existing is not None:
            run.artifacts = existing.artifacts
        self._runs[run_uuid] = run

    def delete_run(self, run_uuid: str) -> bool:
        return self._runs.pop(run_uuid, None) is not None

    def list_runs(self, kind: str | None = None) -> list[StoredRun]:
        runs = [r for r in self._runs.values() if kind is None or r.kind == kind]
        return sorted(runs, key=lambda r: r.created)

    def get_artifact(self, run_uuid: str, name: str) -> bytes | None:
        run = self._runs.get(run_uuid)
        if run is None:
            return None
        return run.artifacts.get(name)

    def put_artifact(self, run_uuid: str, name: str, content: bytes) -> None:
        run = self._runs.get(run_uuid)
        if run is None:
            raise KeyError(f"Run {run_uuid!r} not found")
        run.artifacts[name] = content

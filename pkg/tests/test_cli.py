"""Tests for the ``mimo-ura`` command line."""

from __future__ import annotations

import csv
import json

import pytest

from mimo_ura._cli import build_parser, design_point_from_config, main
from mimo_ura._config import config_to_dict, reference_config, small_config


def _write_config(tmp_path, **overrides) -> str:
    data = config_to_dict(small_config())
    data.update(overrides)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


class TestParser:
    def test_command_required(self) -> None:
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    def test_sweep_needs_axis(self) -> None:
        with pytest.raises(SystemExit):
            build_parser().parse_args(["sweep", "--values", "1"])

    def test_defaults(self) -> None:
        args = build_parser().parse_args(["run"])
        assert args.trials == 20
        assert args.seed is None
        assert args.threads == 1
        assert args.preset == "small"


class TestDesign:
    def test_reference_point_json(self, capsys) -> None:
        assert main(["design", "--preset", "reference", "--ebn0-db", "0"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["sum_rate"]["lhs_bits"] == 900
        assert report["design"]["active_users"] == 300
        assert report["ebn0_db"] == pytest.approx(0.0)

    def test_text(self, capsys) -> None:
        assert main(["design", "--format", "text", "--active-users", "50"]) == 0
        assert "user_caps.max_active_users" in capsys.readouterr().out

    def test_design_point_from_config(self) -> None:
        point = design_point_from_config(reference_config())
        assert point.outer_rate == pytest.approx(0.25)
        assert point.ebn0 == pytest.approx(1.0)
        assert design_point_from_config(reference_config(), active_users=10, c=2.0).active_users == 10


class TestRun:
    def test_writes_csv_and_sidecar(self, tmp_path, capsys) -> None:
        out = tmp_path / "point.csv"
        assert main(["run", "--trials", "2", "--seed", "4", "--out", str(out)]) == 0
        printed = json.loads(capsys.readouterr().out)
        assert printed["trials"] == 2
        with out.open(encoding="utf-8") as fh:
            (row,) = list(csv.DictReader(fh))
        assert int(row["trials"]) == 2
        sidecar = json.loads((tmp_path / "point.json").read_text(encoding="utf-8"))
        assert sidecar["config"]["n"] == 160
        assert sidecar["sweep"]["master_seed"] == 4

    def test_dump_activity(self, tmp_path) -> None:
        dump = tmp_path / "activity.csv"
        assert main(["run", "--trials", "1", "--dump-activity", str(dump)]) == 0
        assert dump.read_text(encoding="utf-8").splitlines()[0] == "subslot,index,gamma"

    def test_config_file(self, tmp_path, capsys) -> None:
        path = _write_config(tmp_path, active_users=1)
        assert main(["run", "--config", path, "--trials", "1"]) == 0
        assert json.loads(capsys.readouterr().out)["axis_value"] == 1

    def test_invalid_config_exits_2(self, tmp_path, capsys) -> None:
        path = _write_config(tmp_path, n=161)
        assert main(["run", "--config", path, "--trials", "1"]) == 2
        assert capsys.readouterr().err.startswith("error: NON_DIVISIBLE_SLOT:")

    def test_non_numeric_field_exits_2(self, tmp_path, capsys) -> None:
        path = _write_config(tmp_path, n="many")
        assert main(["run", "--config", path, "--trials", "1"]) == 2
        assert capsys.readouterr().err.startswith("error: INVALID_FIELD:")

    def test_missing_config_file(self, tmp_path, capsys) -> None:
        assert main(["run", "--config", str(tmp_path / "missing.json")]) == 1
        assert capsys.readouterr().err.startswith("error:")

    def test_zero_trials(self, capsys) -> None:
        assert main(["run", "--trials", "0"]) == 1
        assert "--trials" in capsys.readouterr().err


class TestSweep:
    def test_antenna_sweep(self, tmp_path, capsys) -> None:
        out = tmp_path / "sweep.csv"
        argv = ["sweep", "--axis", "antennas", "--values", "8", "16", "--trials", "2", "--seed", "1", "--out", str(out)]
        assert main(argv) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["axis"] == "antennas"
        assert [p["axis_value"] for p in data["points"]] == [8.0, 16.0]
        with out.open(encoding="utf-8") as fh:
            assert len(list(csv.DictReader(fh))) == 2

    def test_text_rows(self, capsys) -> None:
        assert main(["sweep", "--axis", "ka", "--values", "1", "--trials", "1", "--format", "text"]) == 0
        assert "P_e=" in capsys.readouterr().out


class TestSelftest:
    def test_passes(self, capsys) -> None:
        assert main(["selftest"]) == 0
        out = capsys.readouterr().out
        assert "FAIL" not in out
        assert "tree_round_trip" in out

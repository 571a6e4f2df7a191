"""Tests for the PostgreSQL export module that need no running database.

Round trips against a real PostgreSQL live in tests/integration/test_database.py.
"""

import json
import math
from unittest.mock import MagicMock, patch

import pytest

from stellar_modes.database import (
    _batch_upsert,
    _finite,
    export_results_to_db,
    get_database_url,
    import_modes,
    import_stars,
    load_from_db,
)

STAR = {"star_key": "abc", "gamma": 1.5, "nu": 2.0, "radius_R": 3.65, "mass": 2.7, "rho_O": 1.0, "tau": 1.0}


def _mode(n: int, **extra) -> dict:
    return {"star_key": "abc", "l": 2, "branch": "p", "n": n, "lambda": 10.0 * n, **extra}


class TestDatabaseUrl:
    def test_reads_environment(self, monkeypatch):
        monkeypatch.setenv("DATABASE_URL", "postgresql://localhost/modes")
        assert get_database_url() == "postgresql://localhost/modes"

    def test_missing(self, monkeypatch):
        monkeypatch.delenv("DATABASE_URL", raising=False)
        with pytest.raises(ValueError, match="DATABASE_URL"):
            get_database_url()


class TestFinite:
    @pytest.mark.parametrize("value", [None, "", math.nan, math.inf, -math.inf])
    def test_null_values(self, value):
        assert _finite(value) is None

    def test_numbers(self):
        assert _finite("2.5") == 2.5
        assert _finite(3) == 3.0


class TestBatchUpsert:
    """Row preparation and deduplication; execute_values is mocked."""

    def test_empty(self):
        assert _batch_upsert([], MagicMock(), "SQL", lambda r: (r,)) == 0

    def test_dedup_last_wins(self):
        conn = MagicMock()
        data = [{"k": 1, "v": "a"}, {"k": 2, "v": "b"}, {"k": 1, "v": "c"}]
        with patch("stellar_modes.database.execute_values") as mock_exec:
            count = _batch_upsert(data, conn, "SQL", lambda r: (r["k"], r["v"]))
        assert count == 2
        rows = mock_exec.call_args.args[2]
        assert rows == [(1, "c"), (2, "b")]

    def test_skips_bad_records(self):
        conn = MagicMock()
        data = [{"k": 1}, {"missing": True}, {"k": None}]

        def prepare(r):
            return None if r["k"] is None else (r["k"],)

        with patch("stellar_modes.database.execute_values") as mock_exec:
            assert _batch_upsert(data, conn, "SQL", prepare) == 1
        mock_exec.assert_called_once()

    def test_batches(self):
        conn = MagicMock()
        data = [{"k": i} for i in range(5)]
        with patch("stellar_modes.database.execute_values") as mock_exec:
            _batch_upsert(data, conn, "SQL", lambda r: (r["k"],), batch_size=2)
        assert mock_exec.call_count == 3


class TestImporters:
    def test_star_row(self):
        with patch("stellar_modes.database.execute_values") as mock_exec:
            assert import_stars([STAR], MagicMock()) == 1
        row = mock_exec.call_args.args[2][0]
        assert row[:7] == ("abc", 1.5, 2.0, 3.65, 2.7, 1.0, 1.0)
        assert json.loads(row[7]) == STAR

    def test_mode_rows(self):
        data = [
            _mode(1, x_plus=math.nan, flags="multiple_roots"),
            _mode(2, formulation="ode4"),
            {"star_key": "abc", "l": 2, "branch": "p", "n": 3, "error": "NoRootInWindow: none"},
        ]
        with patch("stellar_modes.database.execute_values") as mock_exec:
            assert import_modes(data, MagicMock()) == 3
        rows = mock_exec.call_args.args[2]
        assert rows[0][4:9] == ("gough", False, 10.0, None, 0)
        assert rows[0][11] == "multiple_roots"
        assert rows[1][4] == "ode4"
        assert rows[2][6] is None
        assert rows[2][12] == "NoRootInWindow: none"

    def test_mode_key_includes_cowling(self):
        data = [_mode(1), _mode(1, cowling=True)]
        with patch("stellar_modes.database.execute_values"):
            assert import_modes(data, MagicMock()) == 2


class TestExportResults:
    def test_missing_directory(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            export_results_to_db(str(tmp_path / "absent"), "postgresql://x")

    def test_imports_parents_first(self, tmp_path):
        (tmp_path / "modes_abc.json").write_text(json.dumps([_mode(1)]), encoding="utf-8")
        (tmp_path / "star_abc.json").write_text(json.dumps(STAR), encoding="utf-8")
        (tmp_path / "compare.json").write_text("[]", encoding="utf-8")
        calls = []
        importers = {
            "stars": lambda records, conn: calls.append("stars") or len(records),
            "modes": lambda records, conn: calls.append("modes") or len(records),
        }
        with patch("stellar_modes.database.create_database"), \
             patch("stellar_modes.database.get_db_connection", return_value=MagicMock()), \
             patch.dict("stellar_modes.database._IMPORTERS", importers):
            counts = export_results_to_db(str(tmp_path), "postgresql://x")
        assert calls == ["stars", "modes"]
        assert counts == {"stars": 1, "modes": 1}


def test_load_from_db_unknown_table():
    """Table names are checked before connecting."""
    with pytest.raises(ValueError, match="Unknown table"):
        load_from_db("races")

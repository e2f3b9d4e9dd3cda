import json

import pytest
from pydantic import ValidationError

from codingtrees.config import CodingTreesConfig, config
from codingtrees.history import RunHistory, RunReport, RunStatus
from codingtrees.utils import emit_status, save_artifact, save_report


@pytest.fixture
def history():
    return RunHistory(max_items=2)


class TestRunHistory:
    def test_append_drops_the_oldest(self, history):
        """Test the history keeps at most max_items reports"""
        for name in ("brd", "amalg", "indiv"):
            history.append(RunReport(subcommand=name))
        assert [r.subcommand for r in history] == ["amalg", "indiv"]
        assert len(history) == 2

    def test_set_outcome_updates_the_current_report(self, history):
        """Test outcome and stats land on the most recent report"""
        history.append(RunReport(subcommand="brd"))
        history.set_outcome("ok", {"total": 2})
        current = history.get_current_item()
        assert current.outcome == "ok"
        assert current.stats == {"total": 2}

    def test_stats_may_use_any_key(self, history):
        """Test stats named like the outcome parameter are stored as data"""
        history.append(RunReport(subcommand="amalg"))
        history.set_outcome("ok", {"outcome": "fails", "cases": 3})
        current = history.get_current_item()
        assert current.outcome == "ok"
        assert current.stats == {"outcome": "fails", "cases": 3}

    def test_set_outcome_on_empty_history(self, history):
        """Test setting an outcome without reports is a no-op"""
        history.set_outcome("ok")
        assert history.get_current_item() is None

    def test_serialization(self, history):
        """Test the history round-trips through JSON"""
        history.append(RunReport(subcommand="prefix", parameters={"size": "5"}, artifacts=["out.json"]))
        again = RunHistory.model_validate_json(history.model_dump_json())
        assert again[0].parameters == {"size": "5"}
        assert again[0].artifacts == ["out.json"]


class TestUtils:
    def test_save_artifact_creates_parents(self, tmp_path):
        """Test atomic writes into a fresh directory"""
        path = save_artifact(tmp_path / "a" / "b" / "tree.gv", "digraph tree {}\n")
        assert path.read_text() == "digraph tree {}\n"
        assert [p.name for p in path.parent.iterdir()] == ["tree.gv"]

    def test_save_artifact_replaces(self, tmp_path):
        """Test an existing artifact is overwritten"""
        path = tmp_path / "out.json"
        save_artifact(path, "old")
        save_artifact(path, "new")
        assert path.read_text() == "new"

    def test_save_report_writes_history(self, tmp_path, monkeypatch):
        """Test the decorator dumps the history even when the call fails"""
        monkeypatch.setattr(config, "output_path", tmp_path)

        class Runner:
            def __init__(self):
                self.persist = True
                self.history = RunHistory()

            @save_report()
            def run(self, fail: bool):
                self.history.append(RunReport(subcommand="diag"))
                if fail:
                    raise RuntimeError("boom")
                return 0

        runner = Runner()
        assert runner.run(False) == 0
        with pytest.raises(RuntimeError):
            runner.run(True)
        saved = json.loads((tmp_path / "run_history.json").read_text())
        assert [item["subcommand"] for item in saved["items"]] == ["diag", "diag"]

    def test_save_report_respects_persist(self, tmp_path, monkeypatch):
        """Test nothing is written when persist is off"""
        monkeypatch.setattr(config, "output_path", tmp_path)

        class Runner:
            persist = False
            history = RunHistory()

            @save_report()
            def run(self):
                return 1

        assert Runner().run() == 1
        assert not (tmp_path / "run_history.json").exists()

    def test_emit_status(self):
        """Test status updates reach the callback"""
        seen = []
        emit_status(seen.append, "brd", "copy 1/2", progress=50.0)
        emit_status(None, "brd", "ignored")
        assert seen == [RunStatus(task_name="brd", status="copy 1/2", progress=50.0)]


class TestConfig:
    def test_log_level_is_normalised(self):
        """Test log levels are upper-cased and validated"""
        assert CodingTreesConfig(log_level="debug").log_level == "DEBUG"
        with pytest.raises(ValidationError):
            CodingTreesConfig(log_level="chatty")

    def test_bounds_are_validated(self):
        """Test search bounds must be positive"""
        with pytest.raises(ValidationError):
            CodingTreesConfig(sdap_bound1=0)

    def test_environment_override(self, monkeypatch):
        """Test the log level is read from the environment"""
        monkeypatch.setenv("CODINGTREES_LOG_LEVEL", "warning")
        assert CodingTreesConfig().log_level == "WARNING"

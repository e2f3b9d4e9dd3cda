import json

import pytest

from codingtrees.catalogue import parse_class
from codingtrees.config import config
from codingtrees.errors import SpecParseError
from codingtrees.main import build_parser, load_structure, main


@pytest.fixture
def chain2(tmp_path):
    path = tmp_path / "chain2.json"
    path.write_text(json.dumps({"size": 2, "tuples": {"<": [[0, 1]]}}))
    return path


@pytest.fixture
def edge(tmp_path):
    path = tmp_path / "edge.json"
    path.write_text(json.dumps({"size": 2, "tuples": {"E": [[0, 1]]}}))
    return path


class TestParser:
    def test_subcommands(self):
        """Test nested subcommands parse into command and action"""
        args = build_parser().parse_args(["diag", "build", "--class", "q", "--depth", "3", "--labeled"])
        assert (args.command, args.action, args.cls, args.depth, args.labeled) == ("diag", "build", "q", 3, True)

    def test_usage_errors_exit_1(self, capsys):
        """Test malformed command lines exit with status 1"""
        assert main(["bogus"]) == 1
        assert main(["tree", "build", "--class", "q"]) == 1


class TestLoadStructure:
    def test_without_language(self, chain2):
        """Test files without lang are read over the class language"""
        A = load_structure(chain2, parse_class("q"))
        assert A.size == 2
        assert A.holds("<", (0, 1))

    def test_malformed(self, tmp_path):
        """Test unreadable files raise SpecParseError"""
        path = tmp_path / "bad.json"
        path.write_text("[1, 2]")
        with pytest.raises(SpecParseError):
            load_structure(path, parse_class("q"))
        path.write_text(json.dumps({"size": 2, "tuples": {"F": [[0, 1]]}}))
        with pytest.raises(SpecParseError):
            load_structure(path, parse_class("q"))
        with pytest.raises(SpecParseError):
            load_structure(tmp_path / "missing.json", parse_class("q"))


class TestCommands:
    def test_brd(self, chain2, capsys):
        """Test the degree of a two-element chain"""
        assert main(["brd", "--class", "q", "--structure", str(chain2)]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["total"] == 2
        assert payload["schema_version"] == config.schema_version

    def test_brd_edge(self, edge, capsys):
        """Test the degree of an edge in the random graph"""
        assert main(["brd", "--class", "rado", "--structure", str(edge)]) == 0
        assert json.loads(capsys.readouterr().out)["total"] == 2

    def test_brd_list_shapes(self, chain2, capsys):
        """Test shape listing"""
        assert main(["brd", "--class", "q", "--structure", str(chain2), "--list-shapes", "json"]) == 0
        assert len(json.loads(capsys.readouterr().out)["shapes"]) == 2

    def test_brd_out_of_scope(self, tmp_path):
        """Test hypergraph structures are rejected"""
        path = tmp_path / "triple.json"
        path.write_text(json.dumps({"size": 3, "tuples": {"R": [[0, 1, 2]]}}))
        assert main(["brd", "--class", "hypergraph:3", "--structure", str(path)]) == 1

    def test_unknown_class(self, chain2):
        """Test bad class specs exit with status 1"""
        assert main(["brd", "--class", "nonsense", "--structure", str(chain2)]) == 1

    def test_prefix_is_deterministic(self, capsys):
        """Test the same seed gives byte-identical prefixes"""
        assert main(["prefix", "--class", "rado", "--size", "6", "--seed", "3"]) == 0
        first = capsys.readouterr().out
        assert main(["prefix", "--class", "rado", "--size", "6", "--seed", "3"]) == 0
        assert capsys.readouterr().out == first
        assert json.loads(first)["size"] == 6

    def test_tree_build_dot(self, capsys):
        """Test DOT output of a coding tree"""
        assert main(["tree", "build", "--class", "q", "--depth", "2", "--format", "dot"]) == 0
        assert capsys.readouterr().out.startswith("digraph tree {")

    def test_wrong_format(self):
        """Test formats a subcommand does not write"""
        assert main(["prefix", "--class", "q", "--size", "2", "--format", "dot"]) == 1

    def test_diag_check(self, capsys):
        """Test a freshly built diagonal tree passes its checks"""
        assert main(["diag", "check", "--class", "q", "--depth", "4"]) == 0
        assert json.loads(capsys.readouterr().out)["violations"] == []

    def test_diag_build_to_file(self, tmp_path):
        """Test --output writes the artifact"""
        out = tmp_path / "diag.json"
        assert main(["diag", "build", "--class", "q", "--depth", "3", "--output", str(out)]) == 0
        assert json.loads(out.read_text())["kind"] == "diagonal_tree"

    def test_amalg_failure_is_replayed(self, capsys):
        """Test failing audits carry a replayed witness"""
        assert main(["amalg", "--class", "q", "--property", "fap", "--bound2", "3"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["outcome"] == "fails"
        assert payload["replayed"] is True

    def test_amalg_is_recorded(self, tmp_path, monkeypatch, capsys):
        """Test audit verdicts land in the run report stats"""
        monkeypatch.setattr(config, "output_path", tmp_path)
        assert main(["--record", "amalg", "--class", "rado", "--property", "fap", "--bound2", "3"]) == 0
        saved = json.loads((tmp_path / "run_history.json").read_text())
        assert saved["items"][0]["outcome"] == "ok"
        assert saved["items"][0]["stats"]["verdict"] == "holds"

    def test_amalg_inconclusive_exits_2(self, monkeypatch, capsys):
        """Test an exhausted budget exits with status 2"""
        monkeypatch.setattr(config, "search_budget", 3)
        assert main(["amalg", "--class", "rado", "--property", "sdap", "--bound1", "4", "--bound2", "4"]) == 2
        assert json.loads(capsys.readouterr().out)["outcome"] == "inconclusive"

    def test_indiv_jsonl(self, capsys):
        """Test one JSON line per seed"""
        code = main(["indiv", "--class", "rado", "--depth", "10", "--target", "2", "--colors", "1", "--seeds", "2"])
        assert code == 0
        lines = capsys.readouterr().out.splitlines()
        assert [json.loads(line)["seed"] for line in lines] == [0, 1]

    def test_record(self, tmp_path, monkeypatch, capsys):
        """Test --record appends a run report"""
        monkeypatch.setattr(config, "output_path", tmp_path)
        assert main(["--record", "prefix", "--class", "q", "--size", "3"]) == 0
        saved = json.loads((tmp_path / "run_history.json").read_text())
        assert saved["items"][0]["subcommand"] == "prefix"
        assert saved["items"][0]["outcome"] == "ok"
